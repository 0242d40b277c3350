#include "nnreach/simplex.hpp"

#include <algorithm>
#include <cmath>

#include "nnreach/error.hpp"

namespace nnreach {

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "?";
}

void DenseLp::add_row(const Eigen::VectorXd& coef, Sense sense, double rhs) {
  const Eigen::Index m = a.rows();
  a.conservativeResize(m + 1, Eigen::NoChange);
  a.row(m) = coef.transpose();
  row_lo.conservativeResize(m + 1);
  row_hi.conservativeResize(m + 1);
  row_lo[m] = sense == Sense::Le ? -kInf : rhs;
  row_hi[m] = sense == Sense::Ge ? kInf : rhs;
}

DenseLp DenseLp::with_columns(std::size_t n, double lo, double hi) {
  DenseLp lp;
  const auto nn = static_cast<Eigen::Index>(n);
  lp.a.resize(0, nn);
  lp.col_lo = Eigen::VectorXd::Constant(nn, lo);
  lp.col_hi = Eigen::VectorXd::Constant(nn, hi);
  return lp;
}

namespace {

double initial_value(double lo, double hi) {
  if (std::isfinite(lo)) return lo;
  if (std::isfinite(hi)) return hi;
  return 0.0;
}

}  // namespace

SimplexSolver::SimplexSolver(DenseLp lp, SimplexOptions opts) : lp_(std::move(lp)), opts_(opts) {
  m_ = lp_.a.rows();
  n_ = lp_.a.cols();
  if (lp_.col_lo.size() != n_ || lp_.col_hi.size() != n_ || lp_.row_lo.size() != m_ || lp_.row_hi.size() != m_)
    throw Error(Errc::InvalidArgument, "inconsistent LP dimensions");
  for (Eigen::Index j = 0; j < n_; ++j)
    if (lp_.col_lo[j] > lp_.col_hi[j]) {
      feasible_ = false;
      return;
    }

  const Eigen::Index nc = n_ + m_;
  tab_.resize(m_, nc);
  // B = -I for the all-logical basis, so B^{-1}[A, -I] = [-A, I].
  tab_.leftCols(n_) = -lp_.a;
  tab_.rightCols(m_).setIdentity();
  lo_.resize(nc);
  hi_.resize(nc);
  lo_.head(n_) = lp_.col_lo;
  hi_.head(n_) = lp_.col_hi;
  lo_.tail(m_) = lp_.row_lo;
  hi_.tail(m_) = lp_.row_hi;
  x_.resize(nc);
  for (Eigen::Index j = 0; j < n_; ++j) x_[j] = initial_value(lo_[j], hi_[j]);
  x_.tail(m_) = lp_.a * x_.head(n_);
  basis_.resize(static_cast<std::size_t>(m_));
  pos_.assign(static_cast<std::size_t>(nc), -1);
  for (Eigen::Index i = 0; i < m_; ++i) {
    basis_[static_cast<std::size_t>(i)] = n_ + i;
    pos_[static_cast<std::size_t>(n_ + i)] = i;
  }

  Eigen::VectorXd cost = Eigen::VectorXd::Zero(nc);
  bool bland = false;
  feasible_ = run(Phase::One, cost, phase1_pivots_, bland);
}

double SimplexSolver::infeasibility() const {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m_; ++i) {
    const Eigen::Index b = basis_[static_cast<std::size_t>(i)];
    if (x_[b] < lo_[b] - opts_.feasibility_tol) sum += lo_[b] - x_[b];
    else if (x_[b] > hi_[b] + opts_.feasibility_tol) sum += x_[b] - hi_[b];
  }
  return sum;
}

void SimplexSolver::phase1_cost(Eigen::VectorXd& cost) const {
  cost.setZero();
  for (Eigen::Index i = 0; i < m_; ++i) {
    const Eigen::Index b = basis_[static_cast<std::size_t>(i)];
    if (x_[b] < lo_[b] - opts_.feasibility_tol) cost[b] = -1.0;
    else if (x_[b] > hi_[b] + opts_.feasibility_tol) cost[b] = 1.0;
  }
}

void SimplexSolver::pivot(Eigen::Index r, Eigen::Index j) {
  const double piv = tab_(r, j);
  tab_.row(r) /= piv;
  Eigen::VectorXd col = tab_.col(j);
  col[r] = 0.0;
  tab_.noalias() -= col * tab_.row(r);
  tab_.col(j).setZero();
  tab_(r, j) = 1.0;
  const Eigen::Index out = basis_[static_cast<std::size_t>(r)];
  pos_[static_cast<std::size_t>(out)] = -1;
  pos_[static_cast<std::size_t>(j)] = r;
  basis_[static_cast<std::size_t>(r)] = j;
}

bool SimplexSolver::run(Phase phase, const Eigen::VectorXd& cost_in, std::size_t& pivots, bool& used_bland) {
  const Eigen::Index nc = n_ + m_;
  const double tol = opts_.feasibility_tol;
  Eigen::VectorXd cost = cost_in;
  Eigen::VectorXd cb(m_);
  Eigen::VectorXd d(nc);
  const std::size_t stall_limit = opts_.bland_factor * static_cast<std::size_t>(m_ + nc);
  std::size_t stall = 0;
  bool bland = false;
  double best = kInf;

  auto objective = [&]() { return phase == Phase::One ? infeasibility() : cost.dot(x_); };
  auto refresh_basics = [&]() {
    // x_B = -T_N x_N
    Eigen::VectorXd xn = x_;
    for (Eigen::Index i = 0; i < m_; ++i) xn[basis_[static_cast<std::size_t>(i)]] = 0.0;
    const Eigen::VectorXd xb = -(tab_ * xn);
    for (Eigen::Index i = 0; i < m_; ++i) x_[basis_[static_cast<std::size_t>(i)]] = xb[i];
  };

  std::size_t since_refresh = 0;
  while (true) {
    if (phase == Phase::One) {
      if (infeasibility() <= tol) return true;
      phase1_cost(cost);
    }
    for (Eigen::Index i = 0; i < m_; ++i) cb[i] = cost[basis_[static_cast<std::size_t>(i)]];
    d.noalias() = cost - tab_.transpose() * cb;

    // Pricing.
    Eigen::Index enter = -1;
    double best_score = 0.0;
    int dir = 0;
    for (Eigen::Index j = 0; j < nc; ++j) {
      if (pos_[static_cast<std::size_t>(j)] >= 0) continue;
      int s = 0;
      if (d[j] < -opts_.optimality_tol && x_[j] < hi_[j]) s = 1;
      else if (d[j] > opts_.optimality_tol && x_[j] > lo_[j]) s = -1;
      if (s == 0) continue;
      if (bland) {
        enter = j;
        dir = s;
        break;
      }
      if (std::abs(d[j]) > best_score) {
        best_score = std::abs(d[j]);
        enter = j;
        dir = s;
      }
    }
    if (enter < 0) return phase == Phase::Two || infeasibility() <= tol;

    // Ratio test. Basic i moves at rate alpha_i = -T_ij * dir per unit step.
    const double own_range = hi_[enter] - lo_[enter];
    auto limit_of = [&](Eigen::Index i, double alpha, bool harris, double& gap) -> bool {
      const Eigen::Index b = basis_[static_cast<std::size_t>(i)];
      const double v = x_[b];
      const bool below = v < lo_[b] - tol;
      const bool above = v > hi_[b] + tol;
      const double slack = harris ? tol : 0.0;
      if (phase == Phase::One && below) {
        if (alpha <= 0.0) return false;
        gap = lo_[b] - v;
        return true;
      }
      if (phase == Phase::One && above) {
        if (alpha >= 0.0) return false;
        gap = v - hi_[b];
        return true;
      }
      if (alpha > 0.0) {
        if (!std::isfinite(hi_[b])) return false;
        gap = std::max(hi_[b] - v, 0.0) + slack;
        return true;
      }
      if (!std::isfinite(lo_[b])) return false;
      gap = std::max(v - lo_[b], 0.0) + slack;
      return true;
    };

    Eigen::Index leave = -1;
    double theta = kInf;
    if (bland) {
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double alpha = -tab_(i, enter) * dir;
        if (std::abs(alpha) <= opts_.pivot_tol) continue;
        double gap = 0.0;
        if (!limit_of(i, alpha, false, gap)) continue;
        const double ratio = gap / std::abs(alpha);
        if (ratio < theta || (ratio == theta && leave >= 0 &&
                              basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          theta = ratio;
          leave = i;
        }
      }
    } else {
      double theta_max = kInf;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double alpha = -tab_(i, enter) * dir;
        if (std::abs(alpha) <= opts_.pivot_tol) continue;
        double gap = 0.0;
        if (!limit_of(i, alpha, true, gap)) continue;
        theta_max = std::min(theta_max, gap / std::abs(alpha));
      }
      double best_alpha = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double alpha = -tab_(i, enter) * dir;
        if (std::abs(alpha) <= opts_.pivot_tol) continue;
        double gap = 0.0;
        if (!limit_of(i, alpha, false, gap)) continue;
        const double ratio = gap / std::abs(alpha);
        if (ratio <= theta_max && std::abs(alpha) > best_alpha) {
          best_alpha = std::abs(alpha);
          leave = i;
          theta = ratio;
        }
      }
    }

    if (own_range <= theta) {
      if (!std::isfinite(own_range)) {
        if (phase == Phase::Two) return false;  // unbounded ray
        return infeasibility() <= tol;
      }
      // Bound flip.
      const double step = own_range * dir;
      for (Eigen::Index i = 0; i < m_; ++i) x_[basis_[static_cast<std::size_t>(i)]] -= tab_(i, enter) * step;
      x_[enter] = dir > 0 ? hi_[enter] : lo_[enter];
    } else {
      if (leave < 0) {
        if (phase == Phase::Two) return false;
        return infeasibility() <= tol;
      }
      const Eigen::Index out = basis_[static_cast<std::size_t>(leave)];
      const double alpha = -tab_(leave, enter) * dir;
      // The leaving column settles on the bound it reached.
      const bool was_below = phase == Phase::One && x_[out] < lo_[out] - tol && alpha > 0.0;
      const bool was_above = phase == Phase::One && x_[out] > hi_[out] + tol && alpha < 0.0;
      const double step = theta * dir;
      for (Eigen::Index i = 0; i < m_; ++i) x_[basis_[static_cast<std::size_t>(i)]] -= tab_(i, enter) * step;
      x_[enter] += step;
      if (was_below) x_[out] = lo_[out];
      else if (was_above) x_[out] = hi_[out];
      else x_[out] = alpha > 0.0 ? hi_[out] : lo_[out];
      pivot(leave, enter);
    }

    if (++pivots > opts_.max_pivots) throw Error(Errc::IterationLimit, "simplex pivot limit exceeded");
    if (++since_refresh >= 64) {
      refresh_basics();
      since_refresh = 0;
    }
    const double obj = objective();
    if (obj < best - 1e-12 * (1.0 + std::abs(best))) {
      best = obj;
      stall = 0;
    } else if (++stall > stall_limit && !bland) {
      bland = true;
      used_bland = true;
    }
  }
}

void SimplexSolver::add_row(const Eigen::VectorXd& coef, Sense sense, double rhs) {
  if (coef.size() != n_) throw Error(Errc::InvalidArgument, "row size mismatch");
  lp_.add_row(coef, sense, rhs);
  if (x_.size() != n_ + m_) return;  // bounds were inconsistent, never set up
  const Eigen::Index nc = n_ + m_ + 1;
  // coef x - s = 0, with the basic structurals eliminated.
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nc);
  row.head(n_) = coef.transpose();
  row[nc - 1] = -1.0;
  for (Eigen::Index j = 0; j < n_; ++j) {
    const Eigen::Index p = pos_[static_cast<std::size_t>(j)];
    if (p >= 0 && coef[j] != 0.0) row.head(nc - 1) -= coef[j] * tab_.row(p);
  }
  tab_.conservativeResize(m_ + 1, nc);
  tab_.col(nc - 1).setZero();
  tab_.row(m_) = -row;
  lo_.conservativeResize(nc);
  hi_.conservativeResize(nc);
  lo_[nc - 1] = lp_.row_lo[m_];
  hi_[nc - 1] = lp_.row_hi[m_];
  x_.conservativeResize(nc);
  x_[nc - 1] = coef.dot(x_.head(n_));
  basis_.push_back(nc - 1);
  pos_.push_back(m_);
  ++m_;
}

SimplexResult SimplexSolver::minimize(const Eigen::VectorXd& c) {
  SimplexResult res;
  if (c.size() != n_) throw Error(Errc::InvalidArgument, "objective size mismatch");
  if (feasible_ && infeasibility() > opts_.feasibility_tol) {
    bool bland = false;
    feasible_ = run(Phase::One, Eigen::VectorXd::Zero(n_ + m_), phase1_pivots_, bland);
  }
  if (!feasible_) {
    res.status = LpStatus::Infeasible;
    return res;
  }
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n_ + m_);
  cost.head(n_) = c;
  const bool bounded = run(Phase::Two, cost, res.pivots, res.used_bland);
  res.x = x_.head(n_);
  if (!bounded) {
    res.status = LpStatus::Unbounded;
    res.objective = -kInf;
    return res;
  }
  res.status = LpStatus::Optimal;
  res.objective = c.dot(res.x);

  // Multipliers: reduced costs of the logical columns, then sign-corrected.
  Eigen::VectorXd cb(m_);
  for (Eigen::Index i = 0; i < m_; ++i) cb[i] = cost[basis_[static_cast<std::size_t>(i)]];
  Eigen::VectorXd pi = -(tab_.rightCols(m_).transpose() * cb);
  for (Eigen::Index i = 0; i < m_; ++i) {
    const bool lo_inf = !std::isfinite(lp_.row_lo[i]);
    const bool hi_inf = !std::isfinite(lp_.row_hi[i]);
    if (lo_inf && hi_inf) pi[i] = 0.0;
    else if (hi_inf) pi[i] = std::max(pi[i], 0.0);
    else if (lo_inf) pi[i] = std::min(pi[i], 0.0);
  }
  res.duals = pi;
  const Eigen::VectorXd red = c - lp_.a.transpose() * pi;
  double bound = 0.0;
  auto term = [](double coef, double lo, double hi) {
    if (coef > 0.0) return std::isfinite(lo) ? coef * lo : -kInf;
    if (coef < 0.0) return std::isfinite(hi) ? coef * hi : -kInf;
    return 0.0;
  };
  for (Eigen::Index j = 0; j < n_; ++j) bound += term(red[j], lp_.col_lo[j], lp_.col_hi[j]);
  for (Eigen::Index i = 0; i < m_; ++i) bound += term(pi[i], lp_.row_lo[i], lp_.row_hi[i]);
  res.dual_bound = std::isnan(bound) ? -kInf : bound;
  return res;
}

SimplexResult solve_dense_lp(const DenseLp& lp, const Eigen::VectorXd& c, SimplexOptions opts) {
  SimplexSolver s(lp, opts);
  return s.minimize(c);
}

}  // namespace nnreach
