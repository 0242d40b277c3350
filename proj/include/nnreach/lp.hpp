#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nnreach/graph.hpp"
#include "nnreach/relax.hpp"
#include "nnreach/sets.hpp"
#include "nnreach/simplex.hpp"

namespace nnreach {

struct LpOptions {
  SimplexOptions simplex;
  /// Unstable neurons narrower than this get the bounds 0 <= y <= u only.
  double degenerate_width = 1e-12;
  /// Tanh neurons are solved over the convex hull of the curve on their
  /// interval by adding supporting lines where the optimum leaves the hull
  /// by more than this.
  double hull_tolerance = 1e-8;
  int max_cut_rounds = 100;
  /// Worker threads for independent objectives; 0 keeps the OpenMP default.
  int threads = 0;
};

/// A block of consecutive LP variables holding one node's value.
struct VariableBlock {
  NodeId node;
  Eigen::Index offset = 0;
  Eigen::Index dim = 0;
};

/// lo <= sum coef * x <= hi, owned by one node.
struct LpRow {
  NodeId owner;
  std::vector<std::pair<Eigen::Index, double>> coef;
  double lo = -kInf;
  double hi = kInf;
};

/// The verification problem over one variable block per subgraph node.
struct VerificationLP {
  std::vector<VariableBlock> blocks;
  Eigen::VectorXd col_lo, col_hi;
  std::vector<LpRow> rows;
  Eigen::VectorXd objective;
  NodeId output;
  /// Argument and output columns of each Tanh neuron with its interval.
  struct TanhColumns {
    Eigen::Index x = 0, y = 0;
    double lo = 0.0, hi = 0.0;
  };
  std::vector<TanhColumns> tanh;

  Eigen::Index num_vars() const { return col_lo.size(); }
  const VariableBlock& block(NodeId id) const;
};

/// Node-block assembly: equality rows for Affine/Add/Concat, triangle rows
/// for unstable ReLUs, the two relaxation lines and the range [tanh l, tanh u]
/// for Tanh, halfspace rows for polytope sources. `c` is over the output node
/// (may be empty).
VerificationLP build_lp(const CompGraph& g, const SubgraphSpec& sub, const InputSets& sets,
                        const BoundMap& preact, const Eigen::VectorXd& c, const LpOptions& opts = {});

/// True when every row only touches the blocks of its owner and Pre(owner).
bool separability_audit(const CompGraph& g, const VerificationLP& lp);

/// Plain-text row listing.
void write_lp_text(std::ostream& out, const VerificationLP& lp);

struct LPSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = kInf;
  Eigen::VectorXd primal;
};

/// Solves the node-block form directly, refining Tanh rows to the hull.
LPSolution solve_lp(const VerificationLP& lp, const LpOptions& opts = {});

/// Sound value from a simplex result: the multiplier bound when it agrees
/// with the primal optimum, else the primal optimum.
double certified_value(const SimplexResult& r);

/// Presolved form of the same problem. Nodes defined by equalities are
/// substituted away; the columns are the source coordinates followed by one
/// column per unstable ReLU and per Tanh neuron.
class ReducedLp {
 public:
  struct Neuron {
    NodeId node;            // the activation node
    Eigen::Index index = 0; // coordinate within the node
    Eigen::Index column = 0;
    double lo = 0.0;        // argument bounds
    double hi = 0.0;
    Eigen::VectorXd arg;    // argument value = arg . x + arg_offset
    double arg_offset = 0.0;
  };

  ReducedLp(const CompGraph& g, const SubgraphSpec& sub, const InputSets& sets, const BoundMap& preact,
            const LpOptions& opts = {});

  const DenseLp& dense() const { return dense_; }
  Eigen::Index num_columns() const { return dense_.col_lo.size(); }
  const std::vector<Neuron>& unstable_relus() const { return relus_; }
  const std::vector<Neuron>& tanh_neurons() const { return tanh_; }

  /// Affine expression E z + e of a node's value in the reduced columns.
  const Eigen::MatrixXd& expression(NodeId id) const;
  const Eigen::VectorXd& expression_offset(NodeId id) const;

  /// Objective c^T z_node as (cost over columns, constant).
  std::pair<Eigen::VectorXd, double> objective(NodeId node, const Eigen::VectorXd& c) const;

  /// Values of the subgraph sources at a reduced point.
  std::vector<std::pair<NodeId, Eigen::VectorXd>> source_values(const Eigen::VectorXd& x) const;

  const CompGraph& graph() const { return *g_; }
  const SubgraphSpec& subgraph() const { return sub_; }

 private:
  const CompGraph* g_;
  SubgraphSpec sub_;
  DenseLp dense_;
  std::vector<Eigen::MatrixXd> expr_;
  std::vector<Eigen::VectorXd> offset_;
  std::vector<std::pair<NodeId, Eigen::Index>> source_cols_;
  std::vector<Neuron> relus_;
  std::vector<Neuron> tanh_;
};

/// Lower bounds of c_r^T z_node for each row of `directions`, one simplex
/// run per row from a shared phase-1 basis, each refined with its own hull
/// cuts. Infeasible problems give +inf.
Eigen::VectorXd lp_bounds(const ReducedLp& lp, NodeId node, const Eigen::MatrixXd& directions,
                          const LpOptions& opts = {});

/// Activation-argument bounds from the LP itself, layer by layer. A ReLU
/// argument that a backward pass already proves stable keeps that bound.
BoundMap lp_preactivations(const CompGraph& g, const InputSets& sources, NodeId output,
                           const LpOptions& opts = {}, const BoundMap* seed = nullptr);

/// Phase of an unstable ReLU inside branch and bound.
enum class Phase : std::int8_t { Free = 0, Active = 1, Inactive = -1 };

struct BnbOptions {
  double time_limit_s = 60.0;
  double tolerance = 1e-9;
  LpOptions lp;
};

struct BnbResult {
  double bound = -kInf;    // sound lower bound (exact when complete)
  double incumbent = kInf; // best value attained by a true point
  bool complete = false;
  std::size_t nodes = 0;
};

/// Best-first search over the phases of the unstable ReLUs of `lp`,
/// minimizing c^T z_node.
BnbResult branch_and_bound(const ReducedLp& lp, NodeId node, const Eigen::VectorXd& c,
                           const BnbOptions& opts = {});

/// The reduced problem with some phases fixed: active adds y = x, x >= 0;
/// inactive adds y = 0, x <= 0.
DenseLp with_phases(const ReducedLp& lp, const std::vector<Phase>& phases);

}  // namespace nnreach
