#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace nnreach {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { Le, Ge, Eq };

/// min c^T x  s.t.  row_lo <= A x <= row_hi,  col_lo <= x <= col_hi.
/// Infinite entries are allowed in any bound.
struct DenseLp {
  Eigen::MatrixXd a;
  Eigen::VectorXd row_lo, row_hi;
  Eigen::VectorXd col_lo, col_hi;

  std::size_t rows() const { return static_cast<std::size_t>(a.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(a.cols()); }

  /// Appends `coef^T x (sense) rhs`.
  void add_row(const Eigen::VectorXd& coef, Sense sense, double rhs);
  static DenseLp with_columns(std::size_t n, double lo = -kInf, double hi = kInf);
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus s);

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-10;
  std::size_t max_pivots = 1'000'000;
  /// Bland's rule engages after this many multiples of (rows + cols)
  /// consecutive pivots without objective progress.
  std::size_t bland_factor = 5;
};

struct SimplexResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = kInf;
  Eigen::VectorXd x;
  /// Row multipliers (one per row of A).
  Eigen::VectorXd duals;
  /// Lagrangian lower bound recomputed from the original data with the
  /// sign-corrected multipliers; -inf when some unbounded column prevents it.
  double dual_bound = -kInf;
  std::size_t pivots = 0;
  bool used_bland = false;
};

/// Dense bounded-variable primal simplex on the computational form
/// A x - s = 0 with one logical column per row. The phase-1 basis is kept
/// so that several objectives can be minimized over the same feasible set:
/// copy the solver after construction and call minimize() on each copy.
/// Throws Error(IterationLimit) when max_pivots is exceeded.
class SimplexSolver {
 public:
  explicit SimplexSolver(DenseLp lp, SimplexOptions opts = {});

  bool feasible() const { return feasible_; }
  std::size_t phase1_pivots() const { return phase1_pivots_; }
  const DenseLp& problem() const { return lp_; }

  /// Phase 2 from the current basis; mutates the basis. Restores
  /// feasibility first when rows were added since the last solve.
  SimplexResult minimize(const Eigen::VectorXd& c);

  /// Appends a row with its logical basic, keeping the current basis.
  void add_row(const Eigen::VectorXd& coef, Sense sense, double rhs);

 private:
  enum class Phase { One, Two };

  void pivot(Eigen::Index row, Eigen::Index col);
  bool run(Phase phase, const Eigen::VectorXd& cost, std::size_t& pivots, bool& used_bland);
  double infeasibility() const;
  void phase1_cost(Eigen::VectorXd& cost) const;

  DenseLp lp_;
  SimplexOptions opts_;
  Eigen::Index m_ = 0;
  Eigen::Index n_ = 0;
  Eigen::MatrixXd tab_;           // B^{-1} [A, -I]
  Eigen::VectorXd x_;             // values of all n + m columns
  Eigen::VectorXd lo_, hi_;       // bounds of all columns
  std::vector<Eigen::Index> basis_;
  std::vector<Eigen::Index> pos_;  // row of a basic column, -1 otherwise
  bool feasible_ = false;
  std::size_t phase1_pivots_ = 0;
};

/// One-shot helper: phase 1 + phase 2.
SimplexResult solve_dense_lp(const DenseLp& lp, const Eigen::VectorXd& c, SimplexOptions opts = {});

}  // namespace nnreach
