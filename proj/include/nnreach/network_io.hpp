#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "nnreach/graph.hpp"

namespace nnreach {

/// Network JSON document: inputs, output, state/disturbance dims and nodes.
/// The first listed input is the state; the rest form the disturbance.
CompGraph network_from_json(const nlohmann::json& doc);
nlohmann::json network_to_json(const CompGraph& g);

CompGraph load_network(const std::filesystem::path& path);
void save_network(const CompGraph& g, const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

}  // namespace nnreach
