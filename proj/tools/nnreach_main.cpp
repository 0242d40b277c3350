#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "nnreach/cli.hpp"
#include "nnreach/error.hpp"

int main(int argc, char** argv) {
  namespace cli = nnreach::cli;
  cli::configure_logging();
  CLI::App app{"Reachability analysis of neural network dynamical systems"};
  app.require_subcommand(1);

  std::string scenario, demo_name, network;
  int threads = 0;
  std::string out;

  auto* run = app.add_subcommand("run", "run a scenario file");
  run->add_option("scenario", scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--threads", threads, "worker threads");
  run->add_option("--out", out, "output directory");

  auto* demo = app.add_subcommand("demo", "run a built-in demo");
  demo->add_option("name", demo_name, "counterexample-forward, duffing-lp-templates, cartpole-feedforward, cartpole-residual")
      ->required();
  demo->add_option("--threads", threads, "worker threads");
  demo->add_option("--out", out, "output directory");

  auto* validate = app.add_subcommand("validate", "check a network file");
  validate->add_option("network", network, "network JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitError;
  }

  cli::RunOptions opts;
  opts.threads = threads;
  if (!out.empty()) opts.out = out;
  try {
    if (*run) return cli::run(scenario, opts);
    if (*demo) return cli::demo(demo_name, opts);
    return cli::validate(network);
  } catch (const nnreach::Error& e) {
    spdlog::error("{}", e.what());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
  }
  return cli::kExitError;
}
