#include "nnreach/lp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <ostream>
#include <queue>

#include <omp.h>

#include "nnreach/error.hpp"

namespace nnreach {

namespace {

std::vector<NodeId> topo_sorted(const CompGraph& g, std::vector<NodeId> nodes) {
  std::sort(nodes.begin(), nodes.end(),
            [&](NodeId a, NodeId b) { return g.topo_rank(a) < g.topo_rank(b); });
  return nodes;
}

std::vector<Eigen::Index> slot_offsets(const Operator& op) {
  std::vector<Eigen::Index> off(op.arity() + 1, 0);
  for (std::size_t k = 0; k < op.arity(); ++k)
    off[k + 1] = off[k] + static_cast<Eigen::Index>(op.input_dims[k]);
  return off;
}

const InputSet& bounded_source(const InputSets& sets, NodeId id) {
  auto it = sets.find(id);
  if (it == sets.end())
    throw Error(Errc::UnboundedInput, "input node " + std::to_string(id.value) + " has no domain");
  if (!it->second.box.finite())
    throw Error(Errc::UnboundedInput, "input node " + std::to_string(id.value) + " lacks a finite box");
  return it->second;
}

bool degenerate(double lo, double hi, const LpOptions& opts) { return hi - lo < opts.degenerate_width; }

using Neuron = ReducedLp::Neuron;

struct Cut {
  Eigen::VectorXd coef;
  Sense sense;
  double rhs;
};

// Hull lines of every Tanh neuron that the point z leaves by more than tol.
std::vector<Cut> hull_cuts(const std::vector<Neuron>& tanh, const Eigen::VectorXd& z, double tol) {
  std::vector<Cut> out;
  for (const auto& nr : tanh) {
    const double a = nr.arg.dot(z) + nr.arg_offset;
    const double y = z[nr.column];
    const TanhRelaxation h = tanh_hull_lines(nr.lo, nr.hi, a);
    // y - k (arg . z + offset) against the intercept
    if (y < h.lower(a) - tol) {
      Eigen::VectorXd coef = -h.lower_slope * nr.arg;
      coef[nr.column] += 1.0;
      out.push_back({std::move(coef), Sense::Ge, h.lower_intercept + h.lower_slope * nr.arg_offset});
    }
    if (y > h.upper(a) + tol) {
      Eigen::VectorXd coef = -h.upper_slope * nr.arg;
      coef[nr.column] += 1.0;
      out.push_back({std::move(coef), Sense::Le, h.upper_intercept + h.upper_slope * nr.arg_offset});
    }
  }
  return out;
}

// Minimizes, then adds hull cuts and re-solves from the current basis until
// the optimum lies in the hull of every Tanh neuron. Cuts are copied to
// `pool` when given.
SimplexResult minimize_in_hull(SimplexSolver& s, const Eigen::VectorXd& cost, const std::vector<Neuron>& tanh,
                               const LpOptions& opts, DenseLp* pool = nullptr) {
  SimplexResult r = s.minimize(cost);
  for (int round = 0; round < opts.max_cut_rounds && r.status == LpStatus::Optimal && !tanh.empty(); ++round) {
    const auto cuts = hull_cuts(tanh, r.x, opts.hull_tolerance);
    if (cuts.empty()) break;
    for (const auto& c : cuts) {
      s.add_row(c.coef, c.sense, c.rhs);
      if (pool) pool->add_row(c.coef, c.sense, c.rhs);
    }
    r = s.minimize(cost);
  }
  return r;
}

}  // namespace

// Node-block form ----------------------------------------------------------

const VariableBlock& VerificationLP::block(NodeId id) const {
  for (const auto& b : blocks)
    if (b.node == id) return b;
  throw Error(Errc::InvalidArgument, "node " + std::to_string(id.value) + " has no variables");
}

VerificationLP build_lp(const CompGraph& g, const SubgraphSpec& sub, const InputSets& sets,
                        const BoundMap& preact, const Eigen::VectorXd& c, const LpOptions& opts) {
  VerificationLP lp;
  lp.output = sub.output_node;
  std::vector<NodeId> nodes = sub.input_nodes;
  nodes.insert(nodes.end(), sub.member_nodes.begin(), sub.member_nodes.end());
  std::sort(nodes.begin(), nodes.end());
  Eigen::Index total = 0;
  for (NodeId n : nodes) {
    const auto d = static_cast<Eigen::Index>(g.dim(n));
    lp.blocks.push_back({n, total, d});
    total += d;
  }
  lp.col_lo = Eigen::VectorXd::Constant(total, -kInf);
  lp.col_hi = Eigen::VectorXd::Constant(total, kInf);
  auto var = [&](NodeId n, Eigen::Index j) { return lp.block(n).offset + j; };

  for (NodeId s : sub.input_nodes) {
    const InputSet& set = bounded_source(sets, s);
    const auto& b = lp.block(s);
    lp.col_lo.segment(b.offset, b.dim) = set.box.lo;
    lp.col_hi.segment(b.offset, b.dim) = set.box.hi;
    for (const auto& h : set.halfspaces) {
      LpRow row{s, {}, h.offset, kInf};
      for (Eigen::Index j = 0; j < b.dim; ++j)
        if (h.normal[j] != 0.0) row.coef.push_back({b.offset + j, h.normal[j]});
      lp.rows.push_back(std::move(row));
    }
  }

  for (NodeId n : sub.member_nodes) {
    const Operator& op = g.op(n);
    const auto args = g.pre(n);
    const auto d = static_cast<Eigen::Index>(g.dim(n));
    switch (op.kind) {
      case OpKind::Input:
        bounded_source(sets, n);
        break;
      case OpKind::Affine: {
        const auto off = slot_offsets(op);
        for (Eigen::Index i = 0; i < d; ++i) {
          LpRow row{n, {{var(n, i), 1.0}}, op.bias[i], op.bias[i]};
          for (std::size_t s = 0; s < args.size(); ++s)
            for (Eigen::Index j = 0; j < off[s + 1] - off[s]; ++j) {
              const double w = op.weight(i, off[s] + j);
              if (w != 0.0) row.coef.push_back({var(args[s], j), -w});
            }
          lp.rows.push_back(std::move(row));
        }
        break;
      }
      case OpKind::Add:
        for (Eigen::Index i = 0; i < d; ++i) {
          LpRow row{n, {{var(n, i), 1.0}}, 0.0, 0.0};
          for (auto a : args) row.coef.push_back({var(a, i), -1.0});
          lp.rows.push_back(std::move(row));
        }
        break;
      case OpKind::Concat: {
        Eigen::Index i = 0;
        for (auto a : args)
          for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(g.dim(a)); ++j, ++i)
            lp.rows.push_back(LpRow{n, {{var(n, i), 1.0}, {var(a, j), -1.0}}, 0.0, 0.0});
        break;
      }
      case OpKind::Relu:
      case OpKind::Tanh: {
        const NodeId p = args[0];
        const IntervalBound& pb = preact.at(p);
        for (Eigen::Index j = 0; j < d; ++j) {
          const Eigen::Index x = var(p, j);
          const Eigen::Index y = var(n, j);
          lp.col_lo[x] = std::max(lp.col_lo[x], pb.lo[j]);
          lp.col_hi[x] = std::min(lp.col_hi[x], pb.hi[j]);
          if (op.kind == OpKind::Tanh) {
            const TanhRelaxation r = tanh_relaxation(pb.lo[j], pb.hi[j]);
            lp.col_lo[y] = std::max(lp.col_lo[y], std::tanh(pb.lo[j]));
            lp.col_hi[y] = std::min(lp.col_hi[y], std::tanh(pb.hi[j]));
            lp.rows.push_back(LpRow{n, {{y, 1.0}, {x, -r.lower_slope}}, r.lower_intercept, kInf});
            lp.rows.push_back(LpRow{n, {{y, 1.0}, {x, -r.upper_slope}}, -kInf, r.upper_intercept});
            lp.tanh.push_back({x, y, pb.lo[j], pb.hi[j]});
            continue;
          }
          const ReluRelaxation r = relu_relaxation(pb.lo[j], pb.hi[j]);
          if (r.kind == ReluCase::Identity) {
            lp.rows.push_back(LpRow{n, {{y, 1.0}, {x, -1.0}}, 0.0, 0.0});
          } else if (r.kind == ReluCase::Zero) {
            lp.rows.push_back(LpRow{n, {{y, 1.0}}, 0.0, 0.0});
          } else if (degenerate(pb.lo[j], pb.hi[j], opts)) {
            lp.rows.push_back(LpRow{n, {{y, 1.0}}, 0.0, pb.hi[j]});
          } else {
            lp.rows.push_back(LpRow{n, {{y, 1.0}}, 0.0, kInf});
            lp.rows.push_back(LpRow{n, {{y, 1.0}, {x, -1.0}}, 0.0, kInf});
            lp.rows.push_back(LpRow{n, {{y, 1.0}, {x, -r.upper_slope}}, -kInf, r.upper_intercept});
          }
        }
        break;
      }
    }
  }

  lp.objective = Eigen::VectorXd::Zero(total);
  if (c.size() > 0) {
    const auto& ob = lp.block(sub.output_node);
    if (c.size() != ob.dim) throw Error(Errc::DimensionMismatch, "objective size does not match the output");
    lp.objective.segment(ob.offset, ob.dim) = c;
  }
  return lp;
}

bool separability_audit(const CompGraph& g, const VerificationLP& lp) {
  for (const auto& row : lp.rows) {
    std::vector<NodeId> allowed{row.owner};
    if (g.op(row.owner).kind != OpKind::Input)
      for (auto p : g.pre(row.owner)) allowed.push_back(p);
    for (const auto& [col, coef] : row.coef) {
      (void)coef;
      bool ok = false;
      for (NodeId a : allowed) {
        const auto& b = lp.block(a);
        if (col >= b.offset && col < b.offset + b.dim) ok = true;
      }
      if (!ok) return false;
    }
  }
  return true;
}

void write_lp_text(std::ostream& out, const VerificationLP& lp) {
  out.precision(17);
  out << "vars " << lp.num_vars() << "\n";
  for (const auto& b : lp.blocks)
    for (Eigen::Index j = 0; j < b.dim; ++j)
      out << "var " << b.offset + j << " node " << b.node.value << " " << j << " " << lp.col_lo[b.offset + j]
          << " " << lp.col_hi[b.offset + j] << "\n";
  for (const auto& r : lp.rows) {
    out << "row " << r.owner.value << " " << r.lo << " " << r.hi;
    for (const auto& [col, coef] : r.coef) out << " " << col << ":" << coef;
    out << "\n";
  }
  out << "min";
  for (Eigen::Index j = 0; j < lp.objective.size(); ++j)
    if (lp.objective[j] != 0.0) out << " " << j << ":" << lp.objective[j];
  out << "\n";
}

LPSolution solve_lp(const VerificationLP& lp, const LpOptions& opts) {
  DenseLp d;
  d.a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(lp.rows.size()), lp.num_vars());
  d.row_lo.resize(d.a.rows());
  d.row_hi.resize(d.a.rows());
  for (std::size_t i = 0; i < lp.rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (const auto& [col, coef] : lp.rows[i].coef) d.a(r, col) += coef;
    d.row_lo[r] = lp.rows[i].lo;
    d.row_hi[r] = lp.rows[i].hi;
  }
  d.col_lo = lp.col_lo;
  d.col_hi = lp.col_hi;
  std::vector<Neuron> tanh;
  for (const auto& t : lp.tanh) {
    Neuron nr{lp.output, 0, t.y, t.lo, t.hi, Eigen::VectorXd::Zero(lp.num_vars()), 0.0};
    nr.arg[t.x] = 1.0;
    tanh.push_back(std::move(nr));
  }
  SimplexSolver solver(std::move(d), opts.simplex);
  const SimplexResult r = minimize_in_hull(solver, lp.objective, tanh, opts);
  LPSolution s;
  s.status = r.status;
  s.primal = r.x;
  s.objective = r.status == LpStatus::Optimal ? lp.objective.dot(r.x) : r.objective;
  return s;
}

double certified_value(const SimplexResult& r) {
  if (r.status != LpStatus::Optimal) return r.objective;
  if (std::isfinite(r.dual_bound) && std::abs(r.objective - r.dual_bound) <= 1e-7 * (1.0 + std::abs(r.objective)))
    return r.dual_bound;
  return r.objective;
}

// Reduced form -------------------------------------------------------------

ReducedLp::ReducedLp(const CompGraph& g, const SubgraphSpec& sub, const InputSets& sets,
                     const BoundMap& preact, const LpOptions& opts)
    : g_(&g), sub_(sub), expr_(g.size()), offset_(g.size()) {
  const std::vector<NodeId> members = topo_sorted(g, sub.member_nodes);

  // Column layout: sources, then activation outputs that stay free.
  Eigen::Index n = 0;
  for (NodeId s : sub.input_nodes) {
    bounded_source(sets, s);
    source_cols_.push_back({s, n});
    n += static_cast<Eigen::Index>(g.dim(s));
  }
  for (NodeId m : members) {
    const Operator& op = g.op(m);
    if (op.kind == OpKind::Input) bounded_source(sets, m);
    if (!op.is_activation()) continue;
    const IntervalBound& pb = preact.at(g.pre(m)[0]);
    for (Eigen::Index j = 0; j < pb.lo.size(); ++j)
      if (op.kind == OpKind::Tanh || (pb.lo[j] < 0.0 && pb.hi[j] > 0.0)) ++n;
  }

  dense_ = DenseLp::with_columns(static_cast<std::size_t>(n));
  std::vector<Eigen::VectorXd> row_coefs;
  std::vector<double> row_lo, row_hi;
  auto add_row = [&](Eigen::VectorXd coef, double lo, double hi) {
    row_coefs.push_back(std::move(coef));
    row_lo.push_back(lo);
    row_hi.push_back(hi);
  };

  for (const auto& [s, col] : source_cols_) {
    const InputSet& set = sets.at(s);
    const auto d = static_cast<Eigen::Index>(set.dim());
    expr_[s.value] = Eigen::MatrixXd::Zero(d, n);
    expr_[s.value].middleCols(col, d).setIdentity();
    offset_[s.value] = Eigen::VectorXd::Zero(d);
    dense_.col_lo.segment(col, d) = set.box.lo;
    dense_.col_hi.segment(col, d) = set.box.hi;
    for (const auto& h : set.halfspaces) {
      Eigen::VectorXd coef = Eigen::VectorXd::Zero(n);
      coef.segment(col, d) = h.normal;
      add_row(std::move(coef), h.offset, kInf);
    }
  }

  Eigen::Index next = 0;
  for (const auto& sc : source_cols_) next = std::max(next, sc.second + static_cast<Eigen::Index>(g.dim(sc.first)));

  for (NodeId m : members) {
    const Operator& op = g.op(m);
    const auto args = g.pre(m);
    const auto d = static_cast<Eigen::Index>(g.dim(m));
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(d, n);
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(d);
    switch (op.kind) {
      case OpKind::Input:
        break;
      case OpKind::Affine: {
        const auto off = slot_offsets(op);
        e0 = op.bias;
        for (std::size_t s = 0; s < args.size(); ++s) {
          const auto w = op.weight.middleCols(off[s], off[s + 1] - off[s]);
          e.noalias() += w * expr_[args[s].value];
          e0.noalias() += w * offset_[args[s].value];
        }
        break;
      }
      case OpKind::Add:
        for (auto a : args) {
          e += expr_[a.value];
          e0 += offset_[a.value];
        }
        break;
      case OpKind::Concat: {
        Eigen::Index r = 0;
        for (auto a : args) {
          const auto da = expr_[a.value].rows();
          e.middleRows(r, da) = expr_[a.value];
          e0.segment(r, da) = offset_[a.value];
          r += da;
        }
        break;
      }
      case OpKind::Relu:
      case OpKind::Tanh: {
        const NodeId p = args[0];
        const IntervalBound& pb = preact.at(p);
        const Eigen::MatrixXd& xe = expr_[p.value];
        const Eigen::VectorXd& x0 = offset_[p.value];
        for (Eigen::Index j = 0; j < d; ++j) {
          const double lo = pb.lo[j];
          const double hi = pb.hi[j];
          if (op.kind == OpKind::Relu && lo >= 0.0) {
            e.row(j) = xe.row(j);
            e0[j] = x0[j];
            continue;
          }
          if (op.kind == OpKind::Relu && hi <= 0.0) continue;
          const Eigen::Index col = next++;
          e(j, col) = 1.0;
          Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
          unit[col] = 1.0;
          if (op.kind == OpKind::Tanh) {
            const TanhRelaxation r = tanh_relaxation(lo, hi);
            dense_.col_lo[col] = std::tanh(lo);
            dense_.col_hi[col] = std::tanh(hi);
            // y - ls x >= ls x0 + li ;  y - us x <= us x0 + ui
            add_row(unit - r.lower_slope * xe.row(j).transpose(), r.lower_slope * x0[j] + r.lower_intercept, kInf);
            add_row(unit - r.upper_slope * xe.row(j).transpose(), -kInf, r.upper_slope * x0[j] + r.upper_intercept);
            tanh_.push_back({m, j, col, lo, hi, xe.row(j).transpose(), x0[j]});
            continue;
          }
          const ReluRelaxation r = relu_relaxation(lo, hi);
          dense_.col_lo[col] = 0.0;
          dense_.col_hi[col] = hi;
          Neuron nr{m, j, col, lo, hi, xe.row(j).transpose(), x0[j]};
          if (!degenerate(lo, hi, opts)) {
            add_row(unit - xe.row(j).transpose(), x0[j], kInf);
            add_row(unit - r.upper_slope * xe.row(j).transpose(), -kInf, r.upper_slope * x0[j] + r.upper_intercept);
          }
          relus_.push_back(std::move(nr));
        }
        break;
      }
    }
    expr_[m.value] = std::move(e);
    offset_[m.value] = std::move(e0);
  }

  dense_.a.resize(static_cast<Eigen::Index>(row_coefs.size()), n);
  dense_.row_lo.resize(dense_.a.rows());
  dense_.row_hi.resize(dense_.a.rows());
  for (std::size_t i = 0; i < row_coefs.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    dense_.a.row(r) = row_coefs[i].transpose();
    dense_.row_lo[r] = row_lo[i];
    dense_.row_hi[r] = row_hi[i];
  }
}

const Eigen::MatrixXd& ReducedLp::expression(NodeId id) const {
  if (id.value >= expr_.size() || expr_[id.value].size() == 0)
    throw Error(Errc::InvalidArgument, "node " + std::to_string(id.value) + " is outside the subgraph");
  return expr_[id.value];
}

const Eigen::VectorXd& ReducedLp::expression_offset(NodeId id) const {
  expression(id);
  return offset_[id.value];
}

std::pair<Eigen::VectorXd, double> ReducedLp::objective(NodeId node, const Eigen::VectorXd& c) const {
  const Eigen::MatrixXd& e = expression(node);
  if (c.size() != e.rows()) throw Error(Errc::DimensionMismatch, "objective size does not match the node");
  return {e.transpose() * c, c.dot(offset_[node.value])};
}

std::vector<std::pair<NodeId, Eigen::VectorXd>> ReducedLp::source_values(const Eigen::VectorXd& x) const {
  std::vector<std::pair<NodeId, Eigen::VectorXd>> out;
  for (const auto& [s, col] : source_cols_)
    out.push_back({s, x.segment(col, static_cast<Eigen::Index>(g_->dim(s)))});
  return out;
}

Eigen::VectorXd lp_bounds(const ReducedLp& lp, NodeId node, const Eigen::MatrixXd& directions,
                          const LpOptions& opts) {
  const Eigen::Index k = directions.rows();
  Eigen::VectorXd out(k);
  const SimplexSolver base(lp.dense(), opts.simplex);
  if (!base.feasible()) {
    out.setConstant(kInf);
    return out;
  }
  std::exception_ptr failure;
  const int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (Eigen::Index r = 0; r < k; ++r) {
    try {
      const auto [cost, constant] = lp.objective(node, directions.row(r).transpose());
      SimplexSolver s = base;
      const SimplexResult res = minimize_in_hull(s, cost, lp.tanh_neurons(), opts);
      out[r] = res.status == LpStatus::Optimal ? certified_value(res) + constant : -kInf;
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

BoundMap lp_preactivations(const CompGraph& g, const InputSets& sources, NodeId output,
                           const LpOptions& opts, const BoundMap* seed) {
  BoundMap bounds = seed ? *seed : BoundMap(g.size());
  for (const auto& [id, set] : sources)
    if (!bounds.has(id)) bounds.set(id, set.box);
  const std::vector<NodeId> stops = source_nodes(sources);
  const SubgraphSpec sub = extract_subgraph(g, stops, output);
  for (NodeId n : topo_sorted(g, sub.member_nodes)) {
    if (!g.op(n).is_activation()) continue;
    const NodeId p = g.pre(n)[0];
    if (bounds.has(p)) continue;
    const auto d = static_cast<Eigen::Index>(g.dim(p));
    Eigen::MatrixXd dirs(2 * d, d);
    dirs.topRows(d).setIdentity();
    dirs.bottomRows(d) = -Eigen::MatrixXd::Identity(d, d);
    const Eigen::VectorXd back = backward_bounds(g, dirs, sources, bounds, p);
    IntervalBound b{back.head(d), -back.tail(d)};

    std::vector<Eigen::Index> open;
    for (Eigen::Index j = 0; j < d; ++j)
      if (g.op(n).kind == OpKind::Tanh || (b.lo[j] < 0.0 && b.hi[j] > 0.0)) open.push_back(j);
    if (!open.empty()) {
      Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(open.size()), d);
      for (std::size_t i = 0; i < open.size(); ++i) {
        sel(static_cast<Eigen::Index>(2 * i), open[i]) = 1.0;
        sel(static_cast<Eigen::Index>(2 * i + 1), open[i]) = -1.0;
      }
      try {
        const ReducedLp lp(g, extract_subgraph(g, stops, p), sources, bounds, opts);
        const Eigen::VectorXd v = lp_bounds(lp, p, sel, opts);
        for (std::size_t i = 0; i < open.size(); ++i) {
          const Eigen::Index j = open[i];
          b.lo[j] = std::max(b.lo[j], v[static_cast<Eigen::Index>(2 * i)]);
          b.hi[j] = std::min(b.hi[j], -v[static_cast<Eigen::Index>(2 * i + 1)]);
        }
      } catch (const Error& e) {
        if (e.code() != Errc::IterationLimit) throw;
      }
    }
    b.hi = b.hi.cwiseMax(b.lo);
    bounds.set(p, std::move(b));
  }
  return bounds;
}

// Branch and bound ---------------------------------------------------------

namespace {

DenseLp apply_phases(DenseLp d, const std::vector<Neuron>& relus, const std::vector<Phase>& phases) {
  for (std::size_t k = 0; k < relus.size() && k < phases.size(); ++k) {
    const auto& nr = relus[k];
    if (phases[k] == Phase::Active) {
      Eigen::VectorXd coef = -nr.arg;
      coef[nr.column] += 1.0;
      d.add_row(coef, Sense::Eq, nr.arg_offset);
      d.add_row(nr.arg, Sense::Ge, -nr.arg_offset);
    } else if (phases[k] == Phase::Inactive) {
      d.col_lo[nr.column] = 0.0;
      d.col_hi[nr.column] = 0.0;
      d.add_row(nr.arg, Sense::Le, -nr.arg_offset);
    }
  }
  return d;
}

struct BnbNode {
  std::vector<Phase> phases;
  double bound = -kInf;
  Eigen::VectorXd x;
};

struct ByBound {
  bool operator()(const BnbNode& a, const BnbNode& b) const { return a.bound > b.bound; }
};

// Value of c^T z_node for the true network at the sources of x.
double true_value(const ReducedLp& lp, NodeId node, const Eigen::VectorXd& c, const Eigen::VectorXd& x) {
  const CompGraph& g = lp.graph();
  std::vector<Eigen::VectorXd> val(g.size());
  for (auto& [s, v] : lp.source_values(x)) val[s.value] = std::move(v);
  for (NodeId m : topo_sorted(g, lp.subgraph().member_nodes)) {
    std::vector<Eigen::VectorXd> args;
    for (auto a : g.pre(m)) args.push_back(val[a.value]);
    val[m.value] = apply_operator(g.op(m), args, g.dim(m));
  }
  return c.dot(val[node.value]);
}

}  // namespace

DenseLp with_phases(const ReducedLp& lp, const std::vector<Phase>& phases) {
  return apply_phases(lp.dense(), lp.unstable_relus(), phases);
}

BnbResult branch_and_bound(const ReducedLp& lp, NodeId node, const Eigen::VectorXd& c, const BnbOptions& opts) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto [cost, constant] = lp.objective(node, c);
  const auto& relus = lp.unstable_relus();
  BnbResult res;
  // Hull cuts are valid in every branch, so they accumulate here.
  DenseLp pool = lp.dense();

  auto solve = [&](const std::vector<Phase>& phases, BnbNode& out) {
    SimplexSolver s(apply_phases(pool, relus, phases), opts.lp.simplex);
    const SimplexResult r = minimize_in_hull(s, cost, lp.tanh_neurons(), opts.lp, &pool);
    ++res.nodes;
    if (r.status != LpStatus::Optimal) return false;
    out.phases = phases;
    out.bound = certified_value(r) + constant;
    out.x = r.x;
    return true;
  };

  std::priority_queue<BnbNode, std::vector<BnbNode>, ByBound> open;
  BnbNode root;
  if (!solve(std::vector<Phase>(relus.size(), Phase::Free), root)) {
    res.bound = kInf;
    res.complete = true;
    return res;
  }
  open.push(std::move(root));

  while (!open.empty()) {
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (elapsed > opts.time_limit_s) {
      res.bound = std::min(res.incumbent, open.top().bound);
      res.complete = false;
      return res;
    }
    BnbNode cur = open.top();
    open.pop();
    const double slack = opts.tolerance * (1.0 + std::abs(res.incumbent));
    if (cur.bound >= res.incumbent - slack) {
      res.bound = std::min(res.incumbent, cur.bound);
      res.complete = true;
      return res;
    }
    res.incumbent = std::min(res.incumbent, true_value(lp, node, c, cur.x));

    std::ptrdiff_t pick = -1;
    double widest = -1.0;
    for (std::size_t k = 0; k < relus.size(); ++k) {
      if (cur.phases[k] != Phase::Free) continue;
      const auto& nr = relus[k];
      const double xv = nr.arg.dot(cur.x) + nr.arg_offset;
      const double yv = cur.x[nr.column];
      if (std::abs(yv - std::max(xv, 0.0)) <= opts.tolerance * (1.0 + std::abs(xv))) continue;
      if (nr.hi - nr.lo > widest) {
        widest = nr.hi - nr.lo;
        pick = static_cast<std::ptrdiff_t>(k);
      }
    }
    if (pick < 0) {
      // The relaxed optimum already satisfies every ReLU.
      res.incumbent = std::min(res.incumbent, cur.bound);
      continue;
    }
    for (Phase ph : {Phase::Active, Phase::Inactive}) {
      std::vector<Phase> phases = cur.phases;
      phases[static_cast<std::size_t>(pick)] = ph;
      BnbNode child;
      if (!solve(phases, child)) continue;
      child.bound = std::max(child.bound, cur.bound);
      open.push(std::move(child));
    }
  }
  res.bound = res.incumbent;
  res.complete = true;
  return res;
}

}  // namespace nnreach
