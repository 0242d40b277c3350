// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <chrono>
#include <cstdio>
#include <map>
#include <random>
#include <string>

#include "nnreach/error.hpp"
#include "nnreach/lp.hpp"
#include "nnreach/reach.hpp"
#include "nnreach/systems.hpp"
#include "oracles.hpp"

using namespace nnreach;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;
std::map<int, std::string> lines;

void report(int id, bool ok, const std::string& detail) {
  lines[id] = std::string("criterion ") + std::to_string(id) + ": " + (ok ? "PASS" : "FAIL") + "  " + detail;
  std::fprintf(stderr, "%s\n", lines[id].c_str());
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Every reach result produced here is audited against 1000 trajectories.
struct SoundnessLedger {
  std::size_t results = 0;
  std::size_t bad = 0;
  double worst = -kInf;

  void audit(const ReachResult& r, const TrajectoryBatch& batch) {
    ++results;
    for (double v : soundness_audit(r, batch)) {
      worst = std::max(worst, v);
      if (v > 1e-9) ++bad;
    }
  }
} ledger;

TrajectoryBatch thousand(const CompGraph& f, const Box& x0, const Box* w, std::size_t steps, std::uint64_t seed) {
  return sample_trajectories(f, x0, w, steps, 1000, seed);
}

double min_gap(const std::vector<StepComparison>& cmp) {
  double m = kInf;
  for (const auto& c : cmp) m = std::min(m, c.gaps.minCoeff());
  return m;
}

std::size_t incomplete_steps(const ReachResult& r) {
  std::size_t n = 0;
  for (const auto& s : r.steps) n += s.status != StepStatus::Ok;
  return n;
}

InputSets box_sets(const CompGraph& g, const Box& x) {
  InputSet s;
  s.box = x;
  return make_input_sets(g, s, nullptr);
}

Box random_box(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd lo(static_cast<Eigen::Index>(n)), hi(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    const double c = u(rng), r = 0.05 + 0.2 * (u(rng) + 1.0);
    lo[i] = c - r;
    hi[i] = c + r;
  }
  return Box{lo, hi};
}

void ordering_property_suite() {
  const auto t0 = Clock::now();
  std::size_t instances = 0, violations = 0, incomplete = 0;
  double worst = kInf;
  for (int s = 0; s < 100; ++s) {
    std::mt19937_64 rng(1000 + s);
    const Activation act = s % 2 ? Activation::Tanh : Activation::Relu;
    const std::size_t nx = 1 + s % 4, nw = (s / 2) % 2, depth = 1 + (s / 4) % 2;
    const std::size_t steps = 4;
    std::vector<std::size_t> widths;
    for (std::size_t d = 0; d < depth; ++d) widths.push_back(4 + rng() % 13);
    widths.push_back(nx);
    const CompGraph f = random_nnds(1000 + s, nx, nw, widths, act);
    const Box x0 = random_box(rng, nx);
    const Eigen::VectorXd wl = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(nw), -0.05);
    const Box wbox{wl, -wl};
    const Box* w = nw ? &wbox : nullptr;
    const auto batch = thousand(f, x0, w, steps, 77 + s);
    for (Method m : {Method::LP, Method::BackwardLin, Method::BnB}) {
      for (const char* tn : {"box", "octagon"}) {
        Propagator p;
        p.method = m;
        p.config.bnb.time_limit_s = 20.0;
        const Template tmpl = Template::preset(tn, nx);
        const ReachResult one = one_shot_reach(p, f, x0, w, steps, tmpl);
        const ReachResult rec = recursive_reach(p, f, x0, w, steps, tmpl);
        ledger.audit(one, batch);
        ledger.audit(rec, batch);
        incomplete += incomplete_steps(one) + incomplete_steps(rec);
        const double g = min_gap(compare_tightness(one, rec, 1e-7));
        worst = std::min(worst, g);
        if (g < -1e-7) {
          ++violations;
          std::printf("  seed %d %s %s gap %.3g\n", s, to_string(m), tn, g);
        }
        ++instances;
      }
    }
  }
  report(1, violations == 0,
         fmt("%zu runs, %zu ordering violations, worst gap %.3g, %zu incomplete steps, %.1f s", instances, violations,
             worst, incomplete, seconds_since(t0)));
}

void ordering_suite() {
  std::mt19937_64 rng(5);
  std::size_t checks = 0, bad = 0;
  double worst = kInf;
  for (int s = 0; s < 50; ++s) {
    const std::size_t nx = 2 + s % 3;
    const CompGraph g = random_nnds(3000 + s, nx, 0, {6 + rng() % 7, 6 + rng() % 7, nx}, Activation::Relu);
    const Box x = random_box(rng, nx);
    const InputSets sets = box_sets(g, x);
    const Template tmpl = Template::octagon(nx);
    Eigen::VectorXd vals[3];
    int k = 0;
    for (Method m : {Method::BackwardLin, Method::LP, Method::BnB}) {
      Propagator p;
      p.method = m;
      vals[k++] = propagate(p, g, sets, g.output_node(), tmpl).set.support;
    }
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double sampled = oracle::sampled_min(g, sets, g.output_node(), tmpl.directions[i], 10000, rng());
      const double steps[] = {vals[1][ii] - vals[0][ii], vals[2][ii] - vals[1][ii], sampled - vals[2][ii]};
      for (double d : steps) {
        worst = std::min(worst, d);
        bad += d < -1e-7;
        ++checks;
      }
    }
  }
  report(3, bad == 0, fmt("%zu inequalities on 50 nets, %zu violated, smallest slack %.3g", checks, bad, worst));
}

void bnb_exactness() {
  std::mt19937_64 rng(21);
  int nets = 0, bad = 0, incomplete = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; nets < 25 && seed < 1000; ++seed) {
    const CompGraph g = random_nnds(5000 + seed, 2, 0, {6, 6, 2}, Activation::Relu);
    const InputSets sets = box_sets(g, Box::of({-1, -1}, {1, 1}));
    const BoundMap ib = interval_propagate(g, sets);
    std::vector<std::pair<NodeId, Eigen::Index>> free;
    for (auto id : g.topo_order()) {
      if (g.op(id).kind != OpKind::Relu) continue;
      const auto& b = ib.at(g.pre(id)[0]);
      for (Eigen::Index j = 0; j < b.lo.size(); ++j)
        if (b.lo[j] < 0.0 && b.hi[j] > 0.0) free.emplace_back(id, j);
    }
    if (free.size() > 12 || free.size() < 4) continue;
    const auto ref = evaluate_all(g, oracle::sample_inputs(g, sets, rng));
    const BoundMap pre = lp_preactivations(g, sets, g.output_node());
    const auto stops = source_nodes(sets);
    const ReducedLp red(g, extract_subgraph(g, stops, g.output_node()), sets, pre);
    std::normal_distribution<double> gauss;
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd c = Eigen::Vector2d(gauss(rng), gauss(rng));
      const double exact = oracle::pattern_enumeration_min(g, sets, c, free, ref);
      const BnbResult r = branch_and_bound(red, g.output_node(), c);
      incomplete += !r.complete;
      const double err = std::abs(r.bound - exact) / (1.0 + std::abs(exact));
      worst = std::max(worst, err);
      bad += !r.complete || err > 1e-6;
    }
    ++nets;
  }
  report(4, nets == 25 && bad == 0,
         fmt("%d nets, 75 objectives, %d mismatches, %d incomplete, worst relative error %.3g", nets, bad, incomplete,
             worst));
}

// Largest m <= 16 keeping the vertex enumeration below ~3e5 subsets.
int rows_for(int n) {
  auto choose = [](int a, int b) {
    double r = 1.0;
    for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
    return r;
  };
  int m = 16;
  while (m > 1 && choose(m + 2 * n, n) > 3e5) --m;
  return m;
}

void simplex_oracle() {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> off(-0.8, 0.3);
  int bad = 0, failures_thrown = 0, infeasible = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 8;
    const int m = 1 + static_cast<int>(rng() % static_cast<unsigned>(rows_for(n)));
    const bool degenerate = trial % 4 == 3;
    const double r = 1.0 + 2.0 * (trial % 3);
    oracle::Polyhedron poly;
    poly.g.setZero(2 * n + m, n);
    poly.h.resize(2 * n + m);
    DenseLp lp = DenseLp::with_columns(static_cast<std::size_t>(n), -r, r);
    for (int i = 0; i < n; ++i) {
      poly.g(2 * i, i) = 1.0;
      poly.h[2 * i] = -r;
      poly.g(2 * i + 1, i) = -1.0;
      poly.h[2 * i + 1] = -r;
    }
    for (int k = 0; k < m; ++k) {
      Eigen::VectorXd a(n);
      for (int i = 0; i < n; ++i) a[i] = gauss(rng);
      // Degenerate instances: every row passes through the origin.
      const double h = degenerate ? 0.0 : off(rng) * r;
      poly.g.row(2 * n + k) = a.transpose();
      poly.h[2 * n + k] = h;
      if (k % 2) lp.add_row(-a, Sense::Le, -h);
      else lp.add_row(a, Sense::Ge, h);
    }
    Eigen::VectorXd c(n);
    for (int i = 0; i < n; ++i) c[i] = gauss(rng);
    const auto exact = oracle::vertex_min(poly, c);
    try {
      const SimplexResult s = solve_dense_lp(lp, c);
      if (!exact) {
        ++infeasible;
        bad += s.status != LpStatus::Infeasible;
        continue;
      }
      const double err = s.status == LpStatus::Optimal ? std::abs(s.objective - *exact) : kInf;
      worst = std::max(worst, err);
      bad += err > 1e-7;
    } catch (const Error&) {
      ++failures_thrown;
      ++bad;
    }
  }
  report(5, bad == 0,
         fmt("200 LPs (%d infeasible), %d mismatches, %d pivot-limit failures, worst error %.3g", infeasible, bad,
             failures_thrown, worst));
}

void template_richness() {
  const FixtureScenario fx = find_fixture("rayleigh-duffing");
  const CompGraph f = fx.load_network();
  const std::size_t n = f.state_dim(), steps = fx.horizon;
  const auto batch = thousand(f, fx.x0, nullptr, steps, 6);
  Propagator p;
  p.method = Method::LP;
  double max_gap[2] = {0.0, 0.0};
  ReachResult rec[2];
  int k = 0;
  for (const char* tn : {"box", "octagon"}) {
    const Template tmpl = Template::preset(tn, n);
    rec[k] = recursive_reach(p, f, fx.x0, nullptr, steps, tmpl);
    const ReachResult one = one_shot_reach(p, f, fx.x0, nullptr, steps, tmpl);
    ledger.audit(rec[k], batch);
    ledger.audit(one, batch);
    for (const auto& c : compare_tightness(one, rec[k])) max_gap[k] = std::max(max_gap[k], c.gaps.maxCoeff());
    ++k;
  }
  // The first 2n octagon directions are the box directions.
  double worst = kInf;
  for (std::size_t t = 0; t <= steps; ++t)
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(2 * n); ++i)
      worst = std::min(worst, rec[1].steps[t].set.support[i] - rec[0].steps[t].set.support[i]);
  report(6, worst >= -1e-7 && max_gap[1] <= max_gap[0],
         fmt("T=%zu, octagon-minus-box support min %.3g, max gap box %.4g octagon %.4g", steps, worst, max_gap[0],
             max_gap[1]));
}

void cartpole() {
  const auto t0 = Clock::now();
  const FixtureScenario fx = find_fixture("cartpole-feedforward");
  const CompGraph f = fx.load_network();
  const std::size_t steps = 8;
  Propagator p;
  p.method = Method::LP;
  const Template tmpl = Template::box(f.state_dim());
  const ReachResult rec = recursive_reach(p, f, fx.x0, nullptr, steps, tmpl);
  const ReachResult one = one_shot_reach(p, f, fx.x0, nullptr, steps, tmpl);
  const double secs = seconds_since(t0);
  const auto batch = thousand(f, fx.x0, nullptr, steps, 8);
  ledger.audit(rec, batch);
  ledger.audit(one, batch);
  const bool ran = rec.steps.size() == steps + 1 && one.steps.size() == steps + 1 && incomplete_steps(rec) == 0 &&
                   incomplete_steps(one) == 0;
  const auto cmp = compare_tightness(one, rec);
  const bool narrower = (cmp.back().width_a.array() <= cmp.back().width_b.array() + 1e-7).all();
  const double w1 = rec.steps[1].set.box.width().maxCoeff(), w8 = rec.steps[steps].set.box.width().maxCoeff();
  report(7, ran && narrower && w8 >= 5.0 * w1 && secs <= 1800.0,
         fmt("T=8 max width one-shot %.4g recursive %.4g, recursive T=1 %.4g (x%.0f), %.1f s",
             one.steps[steps].set.box.width().maxCoeff(), w8, w1, w8 / w1, secs));
}

void residual() {
  const FixtureScenario fx = find_fixture("cartpole-residual");
  const CompGraph f = fx.load_network();
  const std::size_t steps = 3;
  const Box* w = &*fx.w;
  Propagator p;
  p.method = Method::BackwardLin;
  const Template tmpl = Template::box(f.state_dim());
  const ReachResult rec = recursive_reach(p, f, fx.x0, w, steps, tmpl);
  const ReachResult one = one_shot_reach(p, f, fx.x0, w, steps, tmpl);
  const auto batch = thousand(f, fx.x0, w, steps, 9);
  ledger.audit(rec, batch);
  ledger.audit(one, batch);
  double slack = kInf;
  for (std::size_t t = 0; t <= steps; ++t) {
    const Box& a = one.steps[t].set.box;
    const Box& b = rec.steps[t].set.box;
    slack = std::min({slack, (a.lo - b.lo).minCoeff(), (b.hi - a.hi).minCoeff()});
  }
  report(8, slack >= -1e-7 && w->hi.maxCoeff() <= 0.05,
         fmt("T=3, containment slack %.3g, widths at T=3 one-shot %.4g recursive %.4g", slack,
             one.steps[steps].set.box.width().maxCoeff(), rec.steps[steps].set.box.width().maxCoeff()));
}

void counterexample() {
  try {
    const Counterexample c = counterexample_search();
    Propagator p;
    p.method = Method::LP;
    const Template tmpl = Template::box(c.n_x);
    const ReachResult rec = recursive_reach(p, c.network, c.x0, nullptr, 2, tmpl);
    const ReachResult one = one_shot_reach(p, c.network, c.x0, nullptr, 2, tmpl);
    const auto batch = thousand(c.network, c.x0, nullptr, 2, 10);
    ledger.audit(c.recursive, batch);
    ledger.audit(c.one_shot, batch);
    ledger.audit(rec, batch);
    ledger.audit(one, batch);
    const double g = min_gap(compare_tightness(one, rec));
    report(9, c.gap > 0.01 && g >= -1e-7,
           fmt("seed %llu, forward width excess %.2f%% on x%zu, LP ordering min gap %.3g",
               static_cast<unsigned long long>(c.seed), 100.0 * c.gap, c.coordinate + 1, g));
  } catch (const Error& e) {
    report(9, false, fmt("search exhausted: %s", e.what()));
  }
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  ordering_property_suite();
  ordering_suite();
  bnb_exactness();
  simplex_oracle();
  template_richness();
  cartpole();
  residual();
  counterexample();
  report(2, ledger.bad == 0 && ledger.results > 0,
         fmt("%zu results audited with 1000 trajectories each, %zu steps above 1e-9, worst %.3g", ledger.results,
             ledger.bad, ledger.worst));
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("total %.1f s\n", seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
