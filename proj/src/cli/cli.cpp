#include "nnreach/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <omp.h>
#include <spdlog/spdlog.h>

#include "nnreach/error.hpp"
#include "nnreach/network_io.hpp"
#include "nnreach/scenario.hpp"

namespace nnreach::cli {

namespace fs = std::filesystem;

void configure_logging() {
  const char* env = std::getenv("NNREACH_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");
}

namespace {

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void apply_threads(Propagator& p, int threads) {
  if (threads <= 0) return;
  omp_set_num_threads(threads);
  p.config.lp.threads = threads;
  p.config.bnb.lp.threads = threads;
}

struct Run {
  std::optional<ReachResult> recursive;
  std::optional<ReachResult> one_shot;
};

Run execute(const Propagator& p, const CompGraph& f, const Box& x0, const Box* w, std::size_t horizon,
            const Template& tmpl, FrameworkChoice which) {
  Run r;
  if (which != FrameworkChoice::OneShot) {
    spdlog::info("recursive {} over {} steps", to_string(p.method), horizon);
    r.recursive = recursive_reach(p, f, x0, w, horizon, tmpl);
  }
  if (which != FrameworkChoice::Recursive) {
    spdlog::info("one-shot {} over {} steps", to_string(p.method), horizon);
    r.one_shot = one_shot_reach(p, f, x0, w, horizon, tmpl);
  }
  return r;
}

double total_ms(const ReachResult& r) {
  double s = 0.0;
  for (const auto& st : r.steps) s += st.wall_ms;
  return s;
}

nlohmann::json result_json(const ReachResult& r, const TrajectoryBatch& batch) {
  nlohmann::json doc = to_json(r);
  const auto audit = soundness_audit(r, batch);
  doc["soundness_violation"] = audit;
  for (std::size_t t = 0; t < audit.size(); ++t)
    if (audit[t] > 1e-9) spdlog::error("{} step {} misses a sampled state by {}", to_string(r.framework), t, audit[t]);
  return doc;
}

// Writes the artifacts of one scenario run under `dir` with file prefix
// `label` and returns the worst verdict.
int emit(const Run& run, const TrajectoryBatch& batch, const std::vector<Box>& avoid, const fs::path& dir,
         const std::string& label) {
  fs::create_directories(dir);
  const std::string pre = label.empty() ? "" : label + "_";
  for (const auto* r : {run.recursive ? &*run.recursive : nullptr, run.one_shot ? &*run.one_shot : nullptr}) {
    if (!r) continue;
    const std::string name = to_string(r->framework);
    write_json_file(result_json(*r, batch), dir / (pre + name + ".json"));
    write_boxes_csv(*r, dir / (pre + name + "_boxes.csv"));
    spdlog::info("{} finished in {:.1f} ms", name, total_ms(*r));
  }
  write_trajectories_csv(batch, dir / (pre + "trajectories.csv"));
  if (run.recursive && run.one_shot) {
    write_comparison_csv(*run.one_shot, *run.recursive, dir / (pre + "comparison.csv"));
    bool contained = true;
    for (const auto& c : compare_tightness(*run.one_shot, *run.recursive)) contained = contained && c.a_in_b;
    spdlog::info("one-shot {} recursive at every step", contained ? "inside" : "not inside");
  }
  if (avoid.empty()) return kExitOk;

  // A step is safe when either framework proves it; both are sound.
  std::vector<Verdict> verdicts;
  for (const auto* r : {run.recursive ? &*run.recursive : nullptr, run.one_shot ? &*run.one_shot : nullptr}) {
    if (!r) continue;
    const auto v = check_avoid(*r, avoid);
    if (verdicts.empty()) verdicts = v;
    else
      for (std::size_t t = 0; t < v.size(); ++t)
        if (v[t] == Verdict::Safe) verdicts[t] = Verdict::Safe;
  }
  nlohmann::json doc = nlohmann::json::array();
  bool all_safe = true;
  for (std::size_t t = 0; t < verdicts.size(); ++t) {
    doc.push_back({{"t", t}, {"verdict", to_string(verdicts[t])}});
    all_safe = all_safe && verdicts[t] == Verdict::Safe;
    if (verdicts[t] != Verdict::Safe) spdlog::info("step {}: unknown", t);
  }
  write_json_file(doc, dir / (pre + "verdicts.json"));
  return all_safe ? kExitOk : kExitUnknown;
}

Run scenario_matrix(const FixtureScenario& fx, Method m, const std::string& tmpl_name, FrameworkChoice which,
                    int threads, std::size_t horizon) {
  Propagator p;
  p.method = m;
  apply_threads(p, threads);
  const CompGraph f = fx.load_network();
  return execute(p, f, fx.x0, fx.w ? &*fx.w : nullptr, horizon, Template::preset(tmpl_name, f.state_dim()), which);
}

TrajectoryBatch fixture_batch(const FixtureScenario& fx, std::size_t horizon, std::uint64_t seed) {
  return sample_trajectories(fx.load_network(), fx.x0, fx.w ? &*fx.w : nullptr, horizon, 1000, seed);
}

double max_gap(const ReachResult& os, const ReachResult& re) {
  double g = 0.0;
  for (const auto& c : compare_tightness(os, re)) g = std::max(g, c.gaps.maxCoeff());
  return g;
}

int demo_counterexample(const fs::path& dir) {
  SearchOptions opts;
  Counterexample c;
  try {
    c = counterexample_search(opts);
  } catch (const Error& e) {
    if (e.code() != Errc::SearchExhausted) throw;
    fs::create_directories(dir);
    write_json_file({{"status", "exhausted"}, {"seeds", opts.max_seeds}, {"message", e.what()}}, dir / "report.json");
    spdlog::error("{}", e.what());
    return kExitError;
  }
  Propagator lp;
  lp.method = Method::LP;
  const Template box = Template::box(c.n_x);
  const auto lre = recursive_reach(lp, c.network, c.x0, nullptr, opts.steps, box);
  const auto los = one_shot_reach(lp, c.network, c.x0, nullptr, opts.steps, box);
  bool ordered = true;
  for (const auto& s : compare_tightness(los, lre)) ordered = ordered && s.a_in_b;

  const auto batch = sample_trajectories(c.network, c.x0, nullptr, opts.steps, 1000, c.seed);
  emit(Run{c.recursive, c.one_shot}, batch, {}, dir, "forward");
  emit(Run{lre, los}, batch, {}, dir, "lp");
  save_network(c.network, dir / "network.json");
  nlohmann::json widths = nlohmann::json::array();
  for (std::size_t i = 0; i < c.widths.size(); ++i) widths.push_back(c.widths[i]);
  write_json_file({{"status", "found"},
                   {"seed", c.seed},
                   {"n_x", c.n_x},
                   {"widths", widths},
                   {"x0", {{"lo", std::vector<double>(c.x0.lo.data(), c.x0.lo.data() + c.x0.lo.size())},
                           {"hi", std::vector<double>(c.x0.hi.data(), c.x0.hi.data() + c.x0.hi.size())}}},
                   {"relative_width_gap", c.gap},
                   {"coordinate", c.coordinate},
                   {"lp_one_shot_inside_recursive", ordered}},
                  dir / "report.json");
  spdlog::info("seed {}: forward one-shot wider by {:.2f}% in x{}; LP ordering {}", c.seed, 100.0 * c.gap,
               c.coordinate + 1, ordered ? "holds" : "fails");
  return kExitOk;
}

int demo_duffing(const fs::path& dir, int threads) {
  const FixtureScenario fx = find_fixture("rayleigh-duffing");
  const auto batch = fixture_batch(fx, fx.horizon, 0);
  nlohmann::json summary;
  for (const std::string t : {"box", "octagon"}) {
    const Run run = scenario_matrix(fx, Method::LP, t, FrameworkChoice::Both, threads, fx.horizon);
    emit(run, batch, {}, dir, t);
    summary[t] = {{"max_support_gap", max_gap(*run.one_shot, *run.recursive)}};
  }
  write_json_file(summary, dir / "summary.json");
  return kExitOk;
}

int demo_fixture(const std::string& name, Method m, const fs::path& dir, int threads) {
  const FixtureScenario fx = find_fixture(name);
  const Run run = scenario_matrix(fx, m, fx.template_name, FrameworkChoice::Both, threads, fx.horizon);
  return emit(run, fixture_batch(fx, fx.horizon, 0), {}, dir, "");
}

}  // namespace

void write_boxes_csv(const ReachResult& r, const fs::path& path) {
  std::ofstream out = open_out(path);
  const auto n = r.steps.front().set.box.lo.size();
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",lo" << i + 1;
  for (Eigen::Index i = 0; i < n; ++i) out << ",hi" << i + 1;
  out << ",status\n";
  for (const auto& s : r.steps) {
    out << s.t;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << s.set.box.lo[i];
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << s.set.box.hi[i];
    out << ',' << to_string(s.status) << '\n';
  }
}

void write_trajectories_csv(const TrajectoryBatch& b, const fs::path& path) {
  std::ofstream out = open_out(path);
  const auto n = b.states.empty() ? 0 : b.states.front().front().size();
  out << "trajectory,t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i + 1;
  out << '\n';
  for (std::size_t k = 0; k < b.states.size(); ++k)
    for (std::size_t t = 0; t < b.states[k].size(); ++t) {
      out << k << ',' << t;
      for (Eigen::Index i = 0; i < n; ++i) out << ',' << b.states[k][t][i];
      out << '\n';
    }
}

void write_comparison_csv(const ReachResult& one_shot, const ReachResult& recursive, const fs::path& path) {
  const auto cmp = compare_tightness(one_shot, recursive);
  std::ofstream out = open_out(path);
  out << "t,kind,index,one_shot,recursive,gap\n";
  for (const auto& c : cmp) {
    const auto& a = one_shot.steps[c.t].set.support;
    const auto& b = recursive.steps[c.t].set.support;
    for (Eigen::Index i = 0; i < c.gaps.size(); ++i)
      out << c.t << ",support," << i << ',' << a[i] << ',' << b[i] << ',' << c.gaps[i] << '\n';
    for (Eigen::Index i = 0; i < c.width_a.size(); ++i)
      out << c.t << ",width," << i << ',' << c.width_a[i] << ',' << c.width_b[i] << ','
          << c.width_b[i] - c.width_a[i] << '\n';
    const double ta = one_shot.steps[c.t].wall_ms, tb = recursive.steps[c.t].wall_ms;
    out << c.t << ",wall_ms,0," << ta << ',' << tb << ',' << tb - ta << '\n';
  }
}

int run(const fs::path& scenario_path, const RunOptions& opts) {
  Scenario s = load_scenario(scenario_path);
  apply_threads(s.propagator, opts.threads);
  const CompGraph f = s.load_network();
  validate_scenario(s, f);
  const Box* w = f.disturbance_dim() > 0 ? &*s.w : nullptr;
  const Run r = execute(s.propagator, f, s.x0, w, s.horizon, s.make_template(f.state_dim()), s.framework);
  const auto batch = sample_trajectories(f, s.x0, w, s.horizon, s.samples, s.seed);
  return emit(r, batch, s.avoid, opts.out ? *opts.out : s.output_dir(), "");
}

int demo(const std::string& name, const RunOptions& opts) {
  const fs::path dir = opts.out ? *opts.out : fs::path("demo-out") / name;
  if (name == "counterexample-forward") return demo_counterexample(dir);
  if (name == "duffing-lp-templates") return demo_duffing(dir, opts.threads);
  if (name == "cartpole-feedforward") return demo_fixture(name, Method::LP, dir, opts.threads);
  if (name == "cartpole-residual") return demo_fixture(name, Method::BackwardLin, dir, opts.threads);
  throw Error(Errc::UnknownDemo, "no demo named '" + name + "'");
}

int validate(const fs::path& path) {
  const CompGraph g = load_network(path);
  std::size_t act = 0;
  for (std::size_t i = 0; i < g.size(); ++i) act += g.op(NodeId{i}).is_activation() ? g.dim(NodeId{i}) : 0;
  std::cout << path.string() << ": " << g.size() << " nodes, state " << g.state_dim() << ", disturbance "
            << g.disturbance_dim() << ", " << act << " activations\n";
  return kExitOk;
}

}  // namespace nnreach::cli
