#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "nnreach/reach.hpp"
#include "nnreach/systems.hpp"

namespace nnreach::cli {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUnknown = 2;

/// Reads NNREACH_LOG (error, info, debug); info when unset.
void configure_logging();

struct RunOptions {
  int threads = 0;
  std::optional<std::filesystem::path> out;
};

/// Runs a scenario file and writes its artifacts. Returns kExitOk when every
/// step is safe or there are no avoid sets, kExitUnknown otherwise. Errors
/// propagate as exceptions.
int run(const std::filesystem::path& scenario, const RunOptions& opts = {});

/// One of counterexample-forward, duffing-lp-templates, cartpole-feedforward,
/// cartpole-residual. Throws UnknownDemo for other names.
int demo(const std::string& name, const RunOptions& opts = {});

/// Loads and validates a network file, printing a summary.
int validate(const std::filesystem::path& network);

// Artifact writers, shared by run and demo.
void write_boxes_csv(const ReachResult& r, const std::filesystem::path& path);
void write_trajectories_csv(const TrajectoryBatch& b, const std::filesystem::path& path);
/// Rows t,kind,index,one_shot,recursive,gap for kind in {support, width, wall_ms}.
void write_comparison_csv(const ReachResult& one_shot, const ReachResult& recursive, const std::filesystem::path& path);

}  // namespace nnreach::cli
