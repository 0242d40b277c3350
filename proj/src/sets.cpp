#include "nnreach/sets.hpp"

#include <cmath>

#include "nnreach/error.hpp"
#include "nnreach/simplex.hpp"

namespace nnreach {

bool IntervalBound::contains(const Eigen::VectorXd& z, double tol) const {
  if (z.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (z[i] < lo[i] - tol || z[i] > hi[i] + tol) return false;
  return true;
}

void IntervalBound::validate() const {
  if (lo.size() != hi.size()) throw Error(Errc::DimensionMismatch, "interval lo/hi sizes differ");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] <= hi[i])) throw Error(Errc::InvalidInterval, "lo > hi at coordinate " + std::to_string(i));
}

IntervalBound IntervalBound::of(std::initializer_list<double> lo, std::initializer_list<double> hi) {
  IntervalBound b;
  b.lo = Eigen::Map<const Eigen::VectorXd>(lo.begin(), static_cast<Eigen::Index>(lo.size()));
  b.hi = Eigen::Map<const Eigen::VectorXd>(hi.begin(), static_cast<Eigen::Index>(hi.size()));
  return b;
}

bool InputSet::contains(const Eigen::VectorXd& z, double tol) const {
  if (!box.contains(z, tol)) return false;
  for (const auto& h : halfspaces)
    if (h.normal.dot(z) < h.offset - tol) return false;
  return true;
}

std::vector<NodeId> source_nodes(const InputSets& sets) {
  std::vector<NodeId> ids;
  ids.reserve(sets.size());
  for (const auto& [id, _] : sets) ids.push_back(id);
  return ids;
}

double box_min(const Box& box, const Eigen::VectorXd& a) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) v += a[i] * box.lo[i];
    else if (a[i] < 0.0) v += a[i] * box.hi[i];
  }
  return v;
}

double set_min(const InputSet& set, const Eigen::VectorXd& a) {
  const double box_value = box_min(set.box, a);
  if (set.halfspaces.empty()) return box_value;
  DenseLp lp = DenseLp::with_columns(set.dim());
  lp.col_lo = set.box.lo;
  lp.col_hi = set.box.hi;
  for (const auto& h : set.halfspaces) lp.add_row(h.normal, Sense::Ge, h.offset);
  const SimplexResult r = solve_dense_lp(lp, a);
  if (r.status != LpStatus::Optimal) return box_value;
  // The multiplier bound is valid for any multipliers; take it when it is
  // consistent with the primal value.
  double v = r.objective;
  if (std::isfinite(r.dual_bound) && r.dual_bound <= v && v - r.dual_bound <= 1e-7 * (1.0 + std::abs(v)))
    v = r.dual_bound;
  return std::max(v, box_value);
}

InputSets make_input_sets(const CompGraph& g, const InputSet& state, const Box* disturbance) {
  InputSets sets;
  const auto& inputs = g.input_nodes();
  if (state.dim() != g.dim(inputs.front()))
    throw Error(Errc::DimensionMismatch, "state set dim does not match the network");
  sets[inputs.front()] = state;
  const std::size_t nw = g.disturbance_dim();
  if (nw == 0) return sets;
  if (disturbance == nullptr || disturbance->dim() != nw)
    throw Error(Errc::DimensionMismatch, "disturbance box dim does not match the network");
  Eigen::Index off = 0;
  for (std::size_t k = 1; k < inputs.size(); ++k) {
    const auto d = static_cast<Eigen::Index>(g.dim(inputs[k]));
    InputSet s;
    s.box.lo = disturbance->lo.segment(off, d);
    s.box.hi = disturbance->hi.segment(off, d);
    sets[inputs[k]] = std::move(s);
    off += d;
  }
  return sets;
}

}  // namespace nnreach
