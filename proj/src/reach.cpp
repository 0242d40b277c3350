#include "nnreach/reach.hpp"

#include <chrono>
#include <cmath>

#include "nnreach/error.hpp"

namespace nnreach {

// Templates -----------------------------------------------------------------

Eigen::MatrixXd Template::matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < size(); ++i) m.row(static_cast<Eigen::Index>(i)) = directions[i].transpose();
  return m;
}

Template Template::box(std::size_t n) {
  Template t;
  const auto nn = static_cast<Eigen::Index>(n);
  for (Eigen::Index i = 0; i < nn; ++i) {
    t.directions.push_back(Eigen::VectorXd::Unit(nn, i));
    t.directions.push_back(-Eigen::VectorXd::Unit(nn, i));
  }
  return t;
}

Template Template::octagon(std::size_t n) {
  Template t = box(n);
  const auto nn = static_cast<Eigen::Index>(n);
  const double s = 1.0 / std::sqrt(2.0);
  for (Eigen::Index i = 0; i < nn; ++i)
    for (Eigen::Index j = i + 1; j < nn; ++j)
      for (double a : {1.0, -1.0})
        for (double b : {1.0, -1.0}) {
          Eigen::VectorXd d = Eigen::VectorXd::Zero(nn);
          d[i] = a * s;
          d[j] = b * s;
          t.directions.push_back(std::move(d));
        }
  return t;
}

Template Template::from_directions(std::vector<Eigen::VectorXd> dirs) {
  if (dirs.empty()) throw Error(Errc::InvalidArgument, "template needs at least one direction");
  for (auto& d : dirs) {
    if (d.size() != dirs.front().size()) throw Error(Errc::DimensionMismatch, "template directions differ in size");
    const double norm = d.norm();
    if (!(norm > 0.0)) throw Error(Errc::InvalidArgument, "zero template direction");
    d /= norm;
  }
  return Template{std::move(dirs)};
}

Template Template::preset(const std::string& name, std::size_t n) {
  if (name == "box") return box(n);
  if (name == "octagon") return octagon(n);
  throw Error(Errc::InvalidArgument, "unknown template preset '" + name + "'");
}

// Polytopes -----------------------------------------------------------------

double PolytopeApprox::violation(const Eigen::VectorXd& z) const {
  double worst = -kInf;
  for (std::size_t i = 0; i < tmpl.size(); ++i)
    worst = std::max(worst, support[static_cast<Eigen::Index>(i)] - tmpl.directions[i].dot(z));
  return worst;
}

InputSet PolytopeApprox::as_input_set() const {
  InputSet s;
  s.box = box;
  for (std::size_t i = 0; i < tmpl.size(); ++i)
    s.halfspaces.push_back(Halfspace{tmpl.directions[i], support[static_cast<Eigen::Index>(i)]});
  return s;
}

PolytopeApprox PolytopeApprox::from_box(const Template& t, const Box& b) {
  PolytopeApprox p;
  p.tmpl = t;
  p.support.resize(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) p.support[static_cast<Eigen::Index>(i)] = box_min(b, t.directions[i]);
  p.box = b;
  return p;
}

PolytopeApprox PolytopeApprox::from_support(const Template& t, Eigen::VectorXd support) {
  PolytopeApprox p;
  p.tmpl = t;
  p.support = std::move(support);
  const auto n = static_cast<Eigen::Index>(t.dim());
  DenseLp lp = DenseLp::with_columns(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < t.size(); ++i)
    lp.add_row(t.directions[i], Sense::Ge, p.support[static_cast<Eigen::Index>(i)]);
  p.box.lo = Eigen::VectorXd::Constant(n, -kInf);
  p.box.hi = Eigen::VectorXd::Constant(n, kInf);
  const SimplexSolver base(lp);
  if (!base.feasible()) return p;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (double sign : {1.0, -1.0}) {
      SimplexSolver s = base;
      const SimplexResult r = s.minimize(sign * Eigen::VectorXd::Unit(n, j));
      if (r.status != LpStatus::Optimal) continue;
      const double v = certified_value(r);
      if (sign > 0) p.box.lo[j] = v;
      else p.box.hi[j] = -v;
    }
  }
  return p;
}

// Propagators ---------------------------------------------------------------

const char* to_string(Method m) {
  switch (m) {
    case Method::Interval: return "interval";
    case Method::ForwardLin: return "forward";
    case Method::BackwardLin: return "backward";
    case Method::LP: return "lp";
    case Method::BnB: return "bnb";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "interval") return Method::Interval;
  if (s == "forward" || s == "forward-lin") return Method::ForwardLin;
  if (s == "backward" || s == "backward-lin") return Method::BackwardLin;
  if (s == "lp") return Method::LP;
  if (s == "bnb") return Method::BnB;
  throw Error(Errc::InvalidArgument, "unknown propagator '" + s + "'");
}

const char* to_string(StepStatus s) { return s == StepStatus::Ok ? "ok" : "solver-incomplete"; }

const char* to_string(Framework f) { return f == Framework::Recursive ? "recursive" : "one-shot"; }

const char* to_string(Verdict v) { return v == Verdict::Safe ? "safe" : "unknown"; }

namespace {

PreactMode resolve(const Propagator& p) {
  if (p.config.preact != PreactMode::Auto) return p.config.preact;
  switch (p.method) {
    case Method::BackwardLin: return PreactMode::Backward;
    case Method::LP:
    case Method::BnB: return PreactMode::LP;
    default: return PreactMode::Interval;
  }
}

BoundMap preactivations(const Propagator& p, const CompGraph& g, const InputSets& sources, NodeId output,
                        BoundMap* cache) {
  BoundMap b;
  switch (resolve(p)) {
    case PreactMode::Interval: b = interval_propagate(g, sources); break;
    case PreactMode::Backward: b = backward_preactivations(g, sources, output, p.config.alpha, cache); break;
    default: b = lp_preactivations(g, sources, output, p.config.lp, cache); break;
  }
  if (cache) *cache = b;
  return b;
}

}  // namespace

PropagateOutcome propagate(const Propagator& p, const CompGraph& g, const InputSets& sources, NodeId output,
                           const Template& tmpl, BoundMap* preact) {
  if (tmpl.dim() != g.dim(output)) throw Error(Errc::TemplateMismatch, "template dimension does not match the node");
  const Eigen::MatrixXd dirs = tmpl.matrix();
  const Eigen::Index k = dirs.rows();
  Eigen::VectorXd support = Eigen::VectorXd::Constant(k, -kInf);
  std::vector<bool> failed(static_cast<std::size_t>(k), false);
  PropagateOutcome out;

  auto run_lp_directions = [&](const ReducedLp& lp) {
    try {
      support = lp_bounds(lp, output, dirs, p.config.lp);
    } catch (const Error& e) {
      if (e.code() != Errc::IterationLimit) throw;
      for (Eigen::Index i = 0; i < k; ++i) {
        try {
          support[i] = lp_bounds(lp, output, dirs.row(i), p.config.lp)[0];
        } catch (const Error& e2) {
          if (e2.code() != Errc::IterationLimit) throw;
          failed[static_cast<std::size_t>(i)] = true;
        }
      }
    }
  };

  switch (p.method) {
    case Method::Interval: {
      const IntervalBound ib = interval_propagate(g, sources).at(output);
      for (Eigen::Index i = 0; i < k; ++i) support[i] = box_min(ib, dirs.row(i).transpose());
      break;
    }
    case Method::ForwardLin: {
      const ForwardBounds fb = forward_lin_prop(g, sources, output);
      for (Eigen::Index i = 0; i < k; ++i) support[i] = fb.lower_bound(sources, output, dirs.row(i).transpose());
      break;
    }
    case Method::BackwardLin: {
      const BoundMap pre = preactivations(p, g, sources, output, preact);
      support = backward_bounds(g, dirs, sources, pre, output, p.config.alpha);
      break;
    }
    case Method::LP: {
      const BoundMap pre = preactivations(p, g, sources, output, preact);
      const ReducedLp lp(g, extract_subgraph(g, source_nodes(sources), output), sources, pre, p.config.lp);
      run_lp_directions(lp);
      break;
    }
    case Method::BnB: {
      const BoundMap pre = preactivations(p, g, sources, output, preact);
      const ReducedLp lp(g, extract_subgraph(g, source_nodes(sources), output), sources, pre, p.config.lp);
      for (Eigen::Index i = 0; i < k; ++i) {
        try {
          const BnbResult r = branch_and_bound(lp, output, dirs.row(i).transpose(), p.config.bnb);
          support[i] = r.bound;
          if (!r.complete) out.status = StepStatus::SolverIncomplete;
        } catch (const Error& e) {
          if (e.code() != Errc::IterationLimit) throw;
          failed[static_cast<std::size_t>(i)] = true;
        }
      }
      break;
    }
  }

  bool need_fallback = false;
  for (Eigen::Index i = 0; i < k; ++i)
    if (failed[static_cast<std::size_t>(i)] || !std::isfinite(support[i]) || std::isnan(support[i])) need_fallback = true;
  if (need_fallback) {
    const IntervalBound ib = interval_propagate(g, sources).at(output);
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!failed[static_cast<std::size_t>(i)] && std::isfinite(support[i])) continue;
      if (support[i] == kInf) continue;  // empty input set
      support[i] = box_min(ib, dirs.row(i).transpose());
      out.status = StepStatus::SolverIncomplete;
    }
  }
  out.set = PolytopeApprox::from_support(tmpl, std::move(support));
  return out;
}

// Frameworks ----------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void check_sets(const CompGraph& f, const Box& x0, const Box* w, std::size_t steps, const Template& tmpl) {
  if (steps < 1) throw Error(Errc::InvalidArgument, "horizon must be at least 1");
  x0.validate();
  if (x0.dim() != f.state_dim()) throw Error(Errc::DimensionMismatch, "initial set does not match the state");
  if (tmpl.dim() != f.state_dim()) throw Error(Errc::TemplateMismatch, "template does not match the state");
  if (f.disturbance_dim() > 0) {
    if (!w) throw Error(Errc::DimensionMismatch, "network expects a disturbance set");
    w->validate();
  }
}

}  // namespace

ReachResult recursive_reach(const Propagator& p, const CompGraph& f, const Box& x0, const Box* w, std::size_t steps,
                            const Template& tmpl) {
  check_sets(f, x0, w, steps, tmpl);
  ReachResult res;
  res.framework = Framework::Recursive;
  res.method = p.method;
  res.steps.push_back(ReachStep{0, PolytopeApprox::from_box(tmpl, x0), 0.0, StepStatus::Ok});
  for (std::size_t t = 1; t <= steps; ++t) {
    const auto start = Clock::now();
    InputSet xs;
    if (t == 1) xs.box = x0;
    else xs = res.steps.back().set.as_input_set();
    const InputSets sources = make_input_sets(f, xs, f.disturbance_dim() > 0 ? w : nullptr);
    PropagateOutcome o = propagate(p, f, sources, f.output_node(), tmpl);
    res.steps.push_back(ReachStep{t, std::move(o.set), ms_since(start), o.status});
  }
  return res;
}

ReachResult one_shot_reach(const Propagator& p, const CompGraph& f, const Box& x0, const Box* w, std::size_t steps,
                           const Template& tmpl) {
  check_sets(f, x0, w, steps, tmpl);
  ReachResult res;
  res.framework = Framework::OneShot;
  res.method = p.method;
  res.steps.push_back(ReachStep{0, PolytopeApprox::from_box(tmpl, x0), 0.0, StepStatus::Ok});
  const UnrolledGraph u = unroll(f, steps);
  Box all_w;
  const std::size_t nw = f.disturbance_dim();
  if (nw > 0) {
    const auto block = static_cast<Eigen::Index>(nw);
    all_w.lo.resize(block * static_cast<Eigen::Index>(steps));
    all_w.hi.resize(block * static_cast<Eigen::Index>(steps));
    for (std::size_t t = 0; t < steps; ++t) {
      all_w.lo.segment(block * static_cast<Eigen::Index>(t), block) = w->lo;
      all_w.hi.segment(block * static_cast<Eigen::Index>(t), block) = w->hi;
    }
  }
  InputSet xs;
  xs.box = x0;
  const InputSets sources = make_input_sets(u.graph, xs, nw > 0 ? &all_w : nullptr);
  BoundMap cache(u.graph.size());
  for (std::size_t t = 1; t <= steps; ++t) {
    const auto start = Clock::now();
    PropagateOutcome o = propagate(p, u.graph, sources, u.states[t], tmpl, &cache);
    res.steps.push_back(ReachStep{t, std::move(o.set), ms_since(start), o.status});
  }
  return res;
}

std::vector<StepComparison> compare_tightness(const ReachResult& a, const ReachResult& b, double tol) {
  if (a.steps.size() != b.steps.size()) throw Error(Errc::TemplateMismatch, "horizons differ");
  std::vector<StepComparison> out;
  for (std::size_t t = 0; t < a.steps.size(); ++t) {
    const auto& sa = a.steps[t].set;
    const auto& sb = b.steps[t].set;
    if (sa.tmpl.size() != sb.tmpl.size()) throw Error(Errc::TemplateMismatch, "template sizes differ");
    for (std::size_t i = 0; i < sa.tmpl.size(); ++i)
      if (!sa.tmpl.directions[i].isApprox(sb.tmpl.directions[i], 1e-12))
        throw Error(Errc::TemplateMismatch, "template directions differ");
    StepComparison c;
    c.t = t;
    c.gaps = sa.support - sb.support;
    c.a_in_b = c.gaps.minCoeff() >= -tol;
    c.b_in_a = c.gaps.maxCoeff() <= tol;
    c.width_a = sa.box.width();
    c.width_b = sb.box.width();
    out.push_back(std::move(c));
  }
  return out;
}

bool intersects(const PolytopeApprox& p, const Box& b) {
  const auto n = static_cast<Eigen::Index>(b.dim());
  DenseLp lp = DenseLp::with_columns(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    lp.col_lo[j] = std::max(b.lo[j], p.box.lo[j]);
    lp.col_hi[j] = std::min(b.hi[j], p.box.hi[j]);
    if (lp.col_lo[j] > lp.col_hi[j]) return false;
  }
  for (std::size_t i = 0; i < p.tmpl.size(); ++i)
    lp.add_row(p.tmpl.directions[i], Sense::Ge, p.support[static_cast<Eigen::Index>(i)]);
  return SimplexSolver(lp).feasible();
}

std::vector<Verdict> check_avoid(const ReachResult& r, const std::vector<Box>& avoid) {
  std::vector<Verdict> out;
  for (const auto& step : r.steps) {
    Verdict v = Verdict::Safe;
    for (const auto& b : avoid)
      if (intersects(step.set, b)) v = Verdict::Unknown;
    out.push_back(v);
  }
  return out;
}

nlohmann::json to_json(const ReachResult& r) {
  auto vec = [](const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  };
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.steps) {
    nlohmann::json dirs = nlohmann::json::array();
    for (const auto& d : s.set.tmpl.directions) dirs.push_back(vec(d));
    steps.push_back({{"t", s.t},
                     {"directions", std::move(dirs)},
                     {"support", vec(s.set.support)},
                     {"box_lo", vec(s.set.box.lo)},
                     {"box_hi", vec(s.set.box.hi)},
                     {"wall_ms", s.wall_ms},
                     {"status", to_string(s.status)}});
  }
  return {{"framework", to_string(r.framework)}, {"method", to_string(r.method)}, {"steps", std::move(steps)}};
}

}  // namespace nnreach
