#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nnreach/graph.hpp"
#include "nnreach/reach.hpp"
#include "nnreach/sets.hpp"

namespace nnreach {

enum class Activation { Relu, Tanh };

/// Feedforward one-step net x_{t+1} = f(x_t, w_t). `widths` lists the layer
/// sizes after the input; the last entry must equal n_x and has no
/// activation. Weights and biases are i.i.d. uniform in +-1/sqrt(fan_in).
CompGraph random_nnds(std::uint64_t seed, std::size_t n_x, std::size_t n_w, const std::vector<std::size_t>& widths,
                      Activation act);

struct TrajectoryBatch {
  /// states[i][t], t = 0..T
  std::vector<std::vector<Eigen::VectorXd>> states;
  /// disturbances[i][t], t = 0..T-1 (empty vectors when n_w = 0)
  std::vector<std::vector<Eigen::VectorXd>> disturbances;
  std::size_t steps = 0;
};

/// x_0 uniform in x0, w_t uniform in w. Trajectory i draws from its own
/// generator seeded by (seed, i), so the serial and parallel paths agree.
TrajectoryBatch sample_trajectories(const CompGraph& f, const Box& x0, const Box* w, std::size_t steps,
                                    std::size_t n, std::uint64_t seed, bool parallel = true);

/// Per step, the largest max_i (J_i - c_i^T x_t) over the batch.
std::vector<double> soundness_audit(const ReachResult& r, const TrajectoryBatch& batch);

struct Counterexample {
  std::uint64_t seed = 0;
  std::size_t n_x = 0;
  std::vector<std::size_t> widths;
  CompGraph network;
  Box x0;
  /// Largest relative excess of a one-shot box width over the recursive one.
  double gap = 0.0;
  std::size_t coordinate = 0;
  ReachResult recursive;
  ReachResult one_shot;
};

struct SearchOptions {
  std::uint64_t first_seed = 0;
  std::size_t max_seeds = 10000;
  std::size_t steps = 2;
  double threshold = 0.01;
};

/// Random ReLU instances under the forward propagator until the one-shot box
/// is wider than the recursive one by more than the threshold in some
/// coordinate. Throws SearchExhausted when the budget runs out.
Counterexample counterexample_search(const SearchOptions& opts = {});

/// Entries of fixtures/manifest.json.
struct FixtureScenario {
  std::string name;
  std::filesystem::path network;
  Box x0;
  std::optional<Box> w;
  std::size_t horizon = 1;
  std::string template_name = "box";
  std::string note;
  /// "network" for a plain graph file, "residual" for a residual fixture.
  std::string kind = "network";

  CompGraph load_network() const;
};

std::filesystem::path fixture_dir();
std::vector<FixtureScenario> load_manifest(const std::filesystem::path& path);
FixtureScenario find_fixture(const std::string& name);

/// Residual closed loop x+ = A x + B pi(x) + f(x, pi(x)) + w, assembled from
/// a policy net (x -> u), a residual net ((x, u) -> dx) and the matrices.
CompGraph assemble_residual_loop(const CompGraph& policy, const CompGraph& residual, const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& b);

/// Loads a residual fixture document {"policy", "residual", "A", "B"}.
CompGraph load_residual_loop(const std::filesystem::path& path);

Box box_from_json(const nlohmann::json& lo, const nlohmann::json& hi);

}  // namespace nnreach
