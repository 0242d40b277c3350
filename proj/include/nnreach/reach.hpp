#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nnreach/graph.hpp"
#include "nnreach/lp.hpp"
#include "nnreach/relax.hpp"
#include "nnreach/sets.hpp"

namespace nnreach {

/// Fixed outward directions c_i in state space.
struct Template {
  std::vector<Eigen::VectorXd> directions;

  std::size_t size() const { return directions.size(); }
  std::size_t dim() const { return directions.empty() ? 0 : static_cast<std::size_t>(directions.front().size()); }
  /// One direction per row.
  Eigen::MatrixXd matrix() const;

  /// +e_i, -e_i for each i.
  static Template box(std::size_t n);
  /// box plus (+-e_i +- e_j)/sqrt(2) for i < j.
  static Template octagon(std::size_t n);
  static Template from_directions(std::vector<Eigen::VectorXd> dirs);
  /// "box" or "octagon".
  static Template preset(const std::string& name, std::size_t n);
};

/// {z | c_i^T z >= J_i} with its bounding box.
struct PolytopeApprox {
  Template tmpl;
  Eigen::VectorXd support;
  Box box;

  /// max_i (J_i - c_i^T z); positive values lie outside.
  double violation(const Eigen::VectorXd& z) const;
  InputSet as_input_set() const;

  /// Template rendering of a box.
  static PolytopeApprox from_box(const Template& t, const Box& b);
  /// Builds the polytope from support values and computes its bounding box.
  static PolytopeApprox from_support(const Template& t, Eigen::VectorXd support);
};

enum class Method { Interval, ForwardLin, BackwardLin, LP, BnB };
const char* to_string(Method m);
Method parse_method(const std::string& s);

/// How activation-argument bounds are obtained. Auto uses the method itself
/// for BackwardLin and LP, the LP for BnB, and the method's own pass for
/// Interval and ForwardLin.
enum class PreactMode { Auto, Interval, Backward, LP };

struct PropagatorConfig {
  AlphaRule alpha;
  LpOptions lp;
  BnbOptions bnb;
  PreactMode preact = PreactMode::Auto;
};

struct Propagator {
  Method method = Method::LP;
  PropagatorConfig config;

  /// Built from one instance of the verification problem per direction.
  bool separable() const { return method != Method::ForwardLin; }
};

enum class StepStatus { Ok, SolverIncomplete };
const char* to_string(StepStatus s);

struct PropagateOutcome {
  PolytopeApprox set;
  StepStatus status = StepStatus::Ok;
};

/// One sound lower bound per template direction on the value of `output`.
/// `preact` caches activation-argument bounds for these sources across calls.
PropagateOutcome propagate(const Propagator& p, const CompGraph& g, const InputSets& sources, NodeId output,
                           const Template& tmpl, BoundMap* preact = nullptr);

enum class Framework { Recursive, OneShot };
const char* to_string(Framework f);

struct ReachStep {
  std::size_t t = 0;
  PolytopeApprox set;
  double wall_ms = 0.0;
  StepStatus status = StepStatus::Ok;
};

struct ReachResult {
  Framework framework = Framework::Recursive;
  Method method = Method::LP;
  std::vector<ReachStep> steps;  // t = 0..T
};

ReachResult recursive_reach(const Propagator& p, const CompGraph& f, const Box& x0, const Box* w, std::size_t steps,
                            const Template& tmpl);
ReachResult one_shot_reach(const Propagator& p, const CompGraph& f, const Box& x0, const Box* w, std::size_t steps,
                           const Template& tmpl);

struct StepComparison {
  std::size_t t = 0;
  Eigen::VectorXd gaps;   // support(a) - support(b)
  bool a_in_b = false;    // every gap >= -tol
  bool b_in_a = false;
  Eigen::VectorXd width_a, width_b;
};

/// Throws TemplateMismatch when templates or horizons differ.
std::vector<StepComparison> compare_tightness(const ReachResult& a, const ReachResult& b, double tol = 1e-7);

enum class Verdict { Safe, Unknown };
const char* to_string(Verdict v);

/// Safe at t when the polytope at t misses every avoid box.
std::vector<Verdict> check_avoid(const ReachResult& r, const std::vector<Box>& avoid);

/// True when {c_i^T z >= J_i} and the box intersect.
bool intersects(const PolytopeApprox& p, const Box& b);

nlohmann::json to_json(const ReachResult& r);

}  // namespace nnreach
