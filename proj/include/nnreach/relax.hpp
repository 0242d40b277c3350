#pragma once

#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "nnreach/graph.hpp"
#include "nnreach/sets.hpp"

namespace nnreach {

/// Lower-slope choice for an unstable ReLU (y >= alpha x).
struct AlphaRule {
  enum class Mode { Adaptive, Zero, One, Constant };
  Mode mode = Mode::Adaptive;
  double value = 0.0;  // Constant mode only, in [0, 1]

  /// Adaptive: 1 when u >= |l|, else 0.
  double alpha(double l, double u) const;
};

enum class ReluCase { Identity, Zero, Unstable };

struct ReluRelaxation {
  ReluCase kind = ReluCase::Identity;
  double upper_slope = 1.0;
  double upper_intercept = 0.0;
  double lower_slope = 1.0;
};

/// Sign-pattern case split; unstable neurons get the chord upper line
/// through (l, 0) and (u, u) and the lower line y >= alpha x.
ReluRelaxation relu_relaxation(double l, double u, const AlphaRule& rule = {});

struct TanhRelaxation {
  double lower_slope = 0.0;
  double lower_intercept = 0.0;
  double upper_slope = 0.0;
  double upper_intercept = 0.0;

  double lower(double x) const { return lower_slope * x + lower_intercept; }
  double upper(double x) const { return upper_slope * x + upper_intercept; }
};

/// Sound linear bounds of tanh on [l, u]; see relaxation.cpp for the
/// construction. Throws InvalidInterval when l > u.
TanhRelaxation tanh_relaxation(double l, double u);

/// Supporting lines at x of the convex hull of tanh's graph over [l, u],
/// padded outward by 1e-12. x is clamped to [l, u].
TanhRelaxation tanh_hull_lines(double l, double u, double x);

/// Largest amount by which the relaxation misses tanh on an n-point grid.
double tanh_relaxation_violation(const TanhRelaxation& r, double l, double u, int points = 1000);

/// Per-node intervals, indexed by node id.
class BoundMap {
 public:
  BoundMap() = default;
  explicit BoundMap(std::size_t nodes) : bounds_(nodes) {}

  bool has(NodeId id) const { return id.value < bounds_.size() && bounds_[id.value].has_value(); }
  const IntervalBound& at(NodeId id) const;
  void set(NodeId id, IntervalBound b);
  std::size_t size() const { return bounds_.size(); }

 private:
  std::vector<std::optional<IntervalBound>> bounds_;
};

/// Interval bounds for every node computable from the sources.
BoundMap interval_propagate(const CompGraph& g, const InputSets& sources);

/// Lower bounds of c_r^T z_output for each row c_r of `directions`, by
/// backward substitution of the linear relaxations. `preact` must hold the
/// bounds of every activation argument in the extracted subgraph.
Eigen::VectorXd backward_bounds(const CompGraph& g, const Eigen::MatrixXd& directions,
                                const InputSets& sources, const BoundMap& preact, NodeId output,
                                const AlphaRule& alpha = {});

/// Single-direction form of backward_bounds.
double backward_lin_prop(const CompGraph& g, const Eigen::VectorXd& c, const InputSets& sources,
                         const BoundMap& preact, NodeId output, const AlphaRule& alpha = {});

/// Activation-argument bounds computed layer by layer with backward_bounds
/// itself. Entries already present in `seed` are reused.
BoundMap backward_preactivations(const CompGraph& g, const InputSets& sources, NodeId output,
                                 const AlphaRule& alpha = {}, const BoundMap* seed = nullptr);

/// Affine lower/upper functions of the concatenated source vector.
struct LinearBoundFn {
  Eigen::MatrixXd lower_a;
  Eigen::VectorXd lower_b;
  Eigen::MatrixXd upper_a;
  Eigen::VectorXd upper_b;
};

struct ForwardBounds {
  std::vector<NodeId> sources;               // ascending id
  std::vector<Eigen::Index> offsets;         // start of each source block
  Eigen::Index total_dim = 0;
  std::map<NodeId, LinearBoundFn> functions;
  BoundMap concrete;                         // concretized intervals per node

  /// min over the sources of a^T s + b, where s is the source concatenation.
  double concretize(const InputSets& sets, const Eigen::VectorXd& a, double b) const;
  /// Lower bound of c^T z_node.
  double lower_bound(const InputSets& sets, NodeId node, const Eigen::VectorXd& c) const;
};

/// Forward composition of linear bounds through the subgraph feeding `output`.
ForwardBounds forward_lin_prop(const CompGraph& g, const InputSets& sources, NodeId output);

}  // namespace nnreach
