#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nnreach/graph.hpp"
#include "nnreach/reach.hpp"
#include "nnreach/sets.hpp"

namespace nnreach {

enum class FrameworkChoice { Recursive, OneShot, Both };

/// One run of the command-line tool. Relative network and output paths are
/// resolved against `base_dir`, the directory of the scenario file.
struct Scenario {
  std::string network;
  /// "network" or "residual"
  std::string kind = "network";
  Box x0;
  std::optional<Box> w;
  std::size_t horizon = 1;
  FrameworkChoice framework = FrameworkChoice::Both;
  Propagator propagator;
  /// Preset name, or empty when `directions` holds an explicit template.
  std::string template_name = "box";
  std::vector<Eigen::VectorXd> directions;
  std::vector<Box> avoid;
  std::uint64_t seed = 0;
  std::size_t samples = 1000;
  std::string output = "out";
  std::filesystem::path base_dir;

  Template make_template(std::size_t n) const;
  std::filesystem::path network_path() const;
  std::filesystem::path output_dir() const;
  CompGraph load_network() const;
};

/// Throws ParseError naming the offending field.
Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const Scenario& s);

/// Checks the scenario against the network dimensions; throws DimensionMismatch.
void validate_scenario(const Scenario& s, const CompGraph& f);

}  // namespace nnreach
