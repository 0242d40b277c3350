// Serial vs OpenMP paths of the parallel kernels. Arg 0 is serial, 1 parallel.

#include <random>

#include <benchmark/benchmark.h>

#include "nnreach/lp.hpp"
#include "nnreach/systems.hpp"

using namespace nnreach;

namespace {

struct LpCase {
  CompGraph g;
  InputSets sets;
  BoundMap pre;
  Eigen::MatrixXd dirs;

  LpCase() {
    const CompGraph f = random_nnds(7, 4, 0, {32, 32, 4}, Activation::Relu);
    g = unroll(f, 2).graph;
    InputSet s;
    s.box = Box::of({-0.3, -0.3, -0.3, -0.3}, {0.3, 0.3, 0.3, 0.3});
    sets = make_input_sets(g, s, nullptr);
    pre = lp_preactivations(g, sets, g.output_node());
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d;
    dirs.resize(32, 4);
    for (Eigen::Index i = 0; i < dirs.size(); ++i) dirs.data()[i] = d(rng);
  }
};

const LpCase& lp_case() {
  static const LpCase c;
  return c;
}

void BM_LpBounds(benchmark::State& state) {
  const LpCase& c = lp_case();
  const auto stops = source_nodes(c.sets);
  const ReducedLp red(c.g, extract_subgraph(c.g, stops, c.g.output_node()), c.sets, c.pre);
  LpOptions opts;
  opts.threads = state.range(0) ? 0 : 1;
  for (auto _ : state) benchmark::DoNotOptimize(lp_bounds(red, c.g.output_node(), c.dirs, opts));
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}

void BM_SampleTrajectories(benchmark::State& state) {
  const CompGraph f = random_nnds(11, 4, 2, {64, 64, 4}, Activation::Tanh);
  const Box x0 = Box::of({-1, -1, -1, -1}, {1, 1, 1, 1});
  const Box w = Box::of({-0.05, -0.05}, {0.05, 0.05});
  for (auto _ : state) benchmark::DoNotOptimize(sample_trajectories(f, x0, &w, 8, 2000, 5, state.range(0) != 0));
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}

}  // namespace

BENCHMARK(BM_LpBounds)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleTrajectories)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
