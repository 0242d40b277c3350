#include <algorithm>
#include <cmath>

#include "nnreach/error.hpp"
#include "nnreach/relax.hpp"

namespace nnreach {

namespace {

std::vector<Eigen::Index> slot_offsets(const Operator& op) {
  std::vector<Eigen::Index> off(op.arity() + 1, 0);
  for (std::size_t k = 0; k < op.arity(); ++k)
    off[k + 1] = off[k] + static_cast<Eigen::Index>(op.input_dims[k]);
  return off;
}

IntervalBound stack_bounds(const CompGraph& g, const BoundMap& b, NodeId id) {
  const auto args = g.pre(id);
  Eigen::Index total = 0;
  for (auto a : args) total += static_cast<Eigen::Index>(g.dim(a));
  IntervalBound s{Eigen::VectorXd(total), Eigen::VectorXd(total)};
  Eigen::Index off = 0;
  for (auto a : args) {
    const auto& ab = b.at(a);
    s.lo.segment(off, ab.lo.size()) = ab.lo;
    s.hi.segment(off, ab.hi.size()) = ab.hi;
    off += ab.lo.size();
  }
  return s;
}

std::vector<NodeId> reverse_topological(const CompGraph& g, std::vector<NodeId> nodes) {
  std::sort(nodes.begin(), nodes.end(),
            [&](NodeId a, NodeId b) { return g.topo_rank(a) > g.topo_rank(b); });
  return nodes;
}

}  // namespace

BoundMap interval_propagate(const CompGraph& g, const InputSets& sources) {
  BoundMap out(g.size());
  for (const auto& [id, set] : sources) out.set(id, set.box);
  for (NodeId id : g.topo_order()) {
    if (out.has(id) || g.is_input(id)) continue;
    const auto args = g.pre(id);
    if (!std::all_of(args.begin(), args.end(), [&](NodeId a) { return out.has(a); })) continue;
    const Operator& op = g.op(id);
    const IntervalBound x = stack_bounds(g, out, id);
    IntervalBound y;
    switch (op.kind) {
      case OpKind::Affine: {
        const Eigen::VectorXd mid = op.weight * x.center() + op.bias;
        const Eigen::VectorXd rad = op.weight.cwiseAbs() * x.radius();
        y = {mid - rad, mid + rad};
        break;
      }
      case OpKind::Relu:
        y = {x.lo.cwiseMax(0.0), x.hi.cwiseMax(0.0)};
        break;
      case OpKind::Tanh:
        y = {x.lo.array().tanh().matrix(), x.hi.array().tanh().matrix()};
        break;
      case OpKind::Add: {
        const auto d = static_cast<Eigen::Index>(g.dim(id));
        y = {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
        for (auto a : args) {
          y.lo += out.at(a).lo;
          y.hi += out.at(a).hi;
        }
        break;
      }
      case OpKind::Concat:
        y = x;
        break;
      case OpKind::Input:
        continue;
    }
    out.set(id, std::move(y));
  }
  return out;
}

Eigen::VectorXd backward_bounds(const CompGraph& g, const Eigen::MatrixXd& directions,
                                const InputSets& sources, const BoundMap& preact, NodeId output,
                                const AlphaRule& alpha) {
  const Eigen::Index k = directions.rows();
  if (directions.cols() != static_cast<Eigen::Index>(g.dim(output)))
    throw Error(Errc::DimensionMismatch, "direction size does not match the output node");
  const std::vector<NodeId> stops = source_nodes(sources);
  const SubgraphSpec sub = extract_subgraph(g, stops, output);

  std::vector<Eigen::MatrixXd> lam(g.size());
  auto acc = [&](NodeId n) -> Eigen::MatrixXd& {
    auto& m = lam[n.value];
    if (m.size() == 0) m = Eigen::MatrixXd::Zero(k, static_cast<Eigen::Index>(g.dim(n)));
    return m;
  };
  Eigen::VectorXd constant = Eigen::VectorXd::Zero(k);
  acc(output) = directions;

  for (NodeId n : reverse_topological(g, sub.member_nodes)) {
    if (lam[n.value].size() == 0) continue;
    const Eigen::MatrixXd ln = std::move(lam[n.value]);
    lam[n.value] = Eigen::MatrixXd();
    const Operator& op = g.op(n);
    const auto args = g.pre(n);
    switch (op.kind) {
      case OpKind::Input:
        throw Error(Errc::UnboundedInput, "input node " + std::to_string(n.value) + " has no domain");
      case OpKind::Affine: {
        const auto off = slot_offsets(op);
        constant.noalias() += ln * op.bias;
        for (std::size_t s = 0; s < args.size(); ++s)
          acc(args[s]).noalias() += ln * op.weight.middleCols(off[s], off[s + 1] - off[s]);
        break;
      }
      case OpKind::Relu: {
        const IntervalBound& pb = preact.at(args[0]);
        Eigen::MatrixXd& lp = acc(args[0]);
        for (Eigen::Index j = 0; j < ln.cols(); ++j) {
          const ReluRelaxation r = relu_relaxation(pb.lo[j], pb.hi[j], alpha);
          if (r.kind == ReluCase::Zero) continue;
          if (r.kind == ReluCase::Identity) {
            lp.col(j) += ln.col(j);
            continue;
          }
          for (Eigen::Index i = 0; i < k; ++i) {
            const double v = ln(i, j);
            if (v >= 0.0) {
              lp(i, j) += v * r.lower_slope;
            } else {
              lp(i, j) += v * r.upper_slope;
              constant[i] += v * r.upper_intercept;
            }
          }
        }
        break;
      }
      case OpKind::Tanh: {
        const IntervalBound& pb = preact.at(args[0]);
        Eigen::MatrixXd& lp = acc(args[0]);
        for (Eigen::Index j = 0; j < ln.cols(); ++j) {
          const TanhRelaxation r = tanh_relaxation(pb.lo[j], pb.hi[j]);
          for (Eigen::Index i = 0; i < k; ++i) {
            const double v = ln(i, j);
            if (v >= 0.0) {
              lp(i, j) += v * r.lower_slope;
              constant[i] += v * r.lower_intercept;
            } else {
              lp(i, j) += v * r.upper_slope;
              constant[i] += v * r.upper_intercept;
            }
          }
        }
        break;
      }
      case OpKind::Add:
        for (auto a : args) acc(a) += ln;
        break;
      case OpKind::Concat: {
        Eigen::Index off = 0;
        for (auto a : args) {
          const auto d = static_cast<Eigen::Index>(g.dim(a));
          acc(a) += ln.middleCols(off, d);
          off += d;
        }
        break;
      }
    }
  }

  Eigen::VectorXd out = constant;
  for (NodeId s : sub.input_nodes) {
    if (lam[s.value].size() == 0) continue;
    const InputSet& set = sources.at(s);
    for (Eigen::Index i = 0; i < k; ++i) out[i] += set_min(set, lam[s.value].row(i).transpose());
  }
  return out;
}

double backward_lin_prop(const CompGraph& g, const Eigen::VectorXd& c, const InputSets& sources,
                         const BoundMap& preact, NodeId output, const AlphaRule& alpha) {
  return backward_bounds(g, c.transpose(), sources, preact, output, alpha)[0];
}

BoundMap backward_preactivations(const CompGraph& g, const InputSets& sources, NodeId output,
                                 const AlphaRule& alpha, const BoundMap* seed) {
  BoundMap bounds = seed ? *seed : BoundMap(g.size());
  for (const auto& [id, set] : sources)
    if (!bounds.has(id)) bounds.set(id, set.box);
  const std::vector<NodeId> stops = source_nodes(sources);
  const SubgraphSpec sub = extract_subgraph(g, stops, output);
  std::vector<NodeId> order = reverse_topological(g, sub.member_nodes);
  std::reverse(order.begin(), order.end());
  for (NodeId n : order) {
    if (!g.op(n).is_activation()) continue;
    const NodeId p = g.pre(n)[0];
    if (bounds.has(p)) continue;
    const auto d = static_cast<Eigen::Index>(g.dim(p));
    Eigen::MatrixXd dirs(2 * d, d);
    dirs.topRows(d).setIdentity();
    dirs.bottomRows(d) = -Eigen::MatrixXd::Identity(d, d);
    const Eigen::VectorXd lb = backward_bounds(g, dirs, sources, bounds, p, alpha);
    IntervalBound b{lb.head(d), -lb.tail(d)};
    b.hi = b.hi.cwiseMax(b.lo);
    bounds.set(p, std::move(b));
  }
  return bounds;
}

double ForwardBounds::concretize(const InputSets& sets, const Eigen::VectorXd& a, double b) const {
  double v = b;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const InputSet& set = sets.at(sources[s]);
    const auto d = static_cast<Eigen::Index>(set.dim());
    const Eigen::VectorXd seg = a.segment(offsets[s], d);
    if (seg.isZero(0.0)) continue;
    v += set_min(set, seg);
  }
  return v;
}

double ForwardBounds::lower_bound(const InputSets& sets, NodeId node, const Eigen::VectorXd& c) const {
  const LinearBoundFn& f = functions.at(node);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(total_dim);
  double b = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c[i] > 0.0) {
      a += c[i] * f.lower_a.row(i).transpose();
      b += c[i] * f.lower_b[i];
    } else if (c[i] < 0.0) {
      a += c[i] * f.upper_a.row(i).transpose();
      b += c[i] * f.upper_b[i];
    }
  }
  return concretize(sets, a, b);
}

ForwardBounds forward_lin_prop(const CompGraph& g, const InputSets& sources, NodeId output) {
  ForwardBounds fb;
  fb.sources = source_nodes(sources);
  for (NodeId s : fb.sources) {
    fb.offsets.push_back(fb.total_dim);
    fb.total_dim += static_cast<Eigen::Index>(sources.at(s).dim());
  }
  fb.concrete = BoundMap(g.size());
  const Eigen::Index n = fb.total_dim;

  for (std::size_t s = 0; s < fb.sources.size(); ++s) {
    const auto d = static_cast<Eigen::Index>(sources.at(fb.sources[s]).dim());
    LinearBoundFn f;
    f.lower_a = Eigen::MatrixXd::Zero(d, n);
    f.lower_a.middleCols(fb.offsets[s], d).setIdentity();
    f.upper_a = f.lower_a;
    f.lower_b = f.upper_b = Eigen::VectorXd::Zero(d);
    fb.functions[fb.sources[s]] = std::move(f);
    fb.concrete.set(fb.sources[s], sources.at(fb.sources[s]).box);
  }

  auto stacked = [&](NodeId id) {
    const auto args = g.pre(id);
    Eigen::Index rows = 0;
    for (auto a : args) rows += static_cast<Eigen::Index>(g.dim(a));
    LinearBoundFn s{Eigen::MatrixXd(rows, n), Eigen::VectorXd(rows), Eigen::MatrixXd(rows, n),
                    Eigen::VectorXd(rows)};
    Eigen::Index off = 0;
    for (auto a : args) {
      const LinearBoundFn& f = fb.functions.at(a);
      const auto d = f.lower_a.rows();
      s.lower_a.middleRows(off, d) = f.lower_a;
      s.upper_a.middleRows(off, d) = f.upper_a;
      s.lower_b.segment(off, d) = f.lower_b;
      s.upper_b.segment(off, d) = f.upper_b;
      off += d;
    }
    return s;
  };

  const SubgraphSpec sub = extract_subgraph(g, fb.sources, output);
  std::vector<NodeId> order = reverse_topological(g, sub.member_nodes);
  std::reverse(order.begin(), order.end());
  for (NodeId id : order) {
    const Operator& op = g.op(id);
    if (op.kind == OpKind::Input)
      throw Error(Errc::UnboundedInput, "input node " + std::to_string(id.value) + " has no domain");
    const LinearBoundFn x = stacked(id);
    const auto d = static_cast<Eigen::Index>(g.dim(id));
    LinearBoundFn y{Eigen::MatrixXd::Zero(d, n), Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, n),
                    Eigen::VectorXd::Zero(d)};
    switch (op.kind) {
      case OpKind::Affine: {
        const Eigen::MatrixXd wp = op.weight.cwiseMax(0.0);
        const Eigen::MatrixXd wn = op.weight.cwiseMin(0.0);
        y.lower_a = wp * x.lower_a + wn * x.upper_a;
        y.upper_a = wp * x.upper_a + wn * x.lower_a;
        y.lower_b = wp * x.lower_b + wn * x.upper_b + op.bias;
        y.upper_b = wp * x.upper_b + wn * x.lower_b + op.bias;
        break;
      }
      case OpKind::Relu:
      case OpKind::Tanh: {
        const IntervalBound& pb = fb.concrete.at(g.pre(id)[0]);
        for (Eigen::Index j = 0; j < d; ++j) {
          double ls = 0.0, li = 0.0, us = 0.0, ui = 0.0;
          if (op.kind == OpKind::Relu) {
            const ReluRelaxation r = relu_relaxation(pb.lo[j], pb.hi[j]);
            if (r.kind == ReluCase::Identity) ls = us = 1.0;
            else if (r.kind == ReluCase::Unstable) {
              ls = r.lower_slope;
              us = r.upper_slope;
              ui = r.upper_intercept;
            }
          } else {
            const TanhRelaxation r = tanh_relaxation(pb.lo[j], pb.hi[j]);
            ls = r.lower_slope;
            li = r.lower_intercept;
            us = r.upper_slope;
            ui = r.upper_intercept;
          }
          auto pick = [&](double slope, bool lower) {
            const bool use_lower = (slope >= 0.0) == lower;
            return std::pair{use_lower ? x.lower_a.row(j) : x.upper_a.row(j),
                             use_lower ? x.lower_b[j] : x.upper_b[j]};
          };
          const auto [la, lb] = pick(ls, true);
          y.lower_a.row(j) = ls * la;
          y.lower_b[j] = ls * lb + li;
          const auto [ua, ub] = pick(us, false);
          y.upper_a.row(j) = us * ua;
          y.upper_b[j] = us * ub + ui;
        }
        break;
      }
      case OpKind::Add:
        for (auto a : g.pre(id)) {
          const LinearBoundFn& f = fb.functions.at(a);
          y.lower_a += f.lower_a;
          y.upper_a += f.upper_a;
          y.lower_b += f.lower_b;
          y.upper_b += f.upper_b;
        }
        break;
      case OpKind::Concat:
        y = x;
        break;
      case OpKind::Input:
        break;
    }
    IntervalBound c{Eigen::VectorXd(d), Eigen::VectorXd(d)};
    for (Eigen::Index j = 0; j < d; ++j) {
      c.lo[j] = fb.concretize(sources, y.lower_a.row(j).transpose(), y.lower_b[j]);
      c.hi[j] = -fb.concretize(sources, -y.upper_a.row(j).transpose(), -y.upper_b[j]);
    }
    c.hi = c.hi.cwiseMax(c.lo);
    fb.concrete.set(id, std::move(c));
    fb.functions[id] = std::move(y);
  }
  return fb;
}

}  // namespace nnreach
