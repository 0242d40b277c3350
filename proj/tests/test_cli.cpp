#include <doctest.h>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nnreach/cli.hpp"
#include "nnreach/error.hpp"
#include "nnreach/network_io.hpp"
#include "nnreach/scenario.hpp"

using namespace nnreach;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "nnreach_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// x+ = x, or x+ = 2x when `gain` is 2.
void write_gain_network(const fs::path& path, double gain) {
  std::vector<NodeDecl> nodes{{NodeId{0}, Operator::input(), 2},
                              {NodeId{1}, Operator::affine(gain * Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)), 2}};
  save_network(build_graph(std::move(nodes), {{NodeId{0}, NodeId{1}, 0}}, {NodeId{0}}, NodeId{1}), path);
}

nlohmann::json base_scenario() {
  return {{"network", "net.json"},
          {"x0", {{"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}}},
          {"horizon", 3},
          {"framework", "both"},
          {"propagator", {{"method", "lp"}}},
          {"template", "box"},
          {"output", "out"}};
}

fs::path write_scenario(const fs::path& dir, const nlohmann::json& doc) {
  const fs::path p = dir / "scenario.json";
  std::ofstream(p) << doc.dump(2);
  return p;
}

int tool(const std::string& args) {
  const std::string cmd = std::string("NNREACH_LOG=error ") + NNREACH_TOOL + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ','))
      if (!cell.empty() && (std::isdigit(static_cast<unsigned char>(cell[0])) || cell[0] == '-')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("scenario round trip is idempotent") {
  nlohmann::json doc = base_scenario();
  doc["w"] = {{"lo", {-0.1}}, {"hi", {0.1}}};
  doc["propagator"] = {{"method", "backward"}, {"alpha", 0.25}, {"preact", "interval"}};
  doc["template"] = {{1.0, 0.0}, {0.5, -0.5}};
  doc["avoid"] = {{{"lo", {3.0, 3.0}}, {"hi", {4.0, 4.0}}}};
  doc["seed"] = 5;

  const auto once = scenario_to_json(parse_scenario(doc));
  const auto twice = scenario_to_json(parse_scenario(once));
  CHECK(once == twice);
  CHECK(once.at("propagator").at("alpha") == 0.25);
  CHECK(once.at("template").size() == 2);

  const auto plain = scenario_to_json(parse_scenario(base_scenario()));
  CHECK(plain == scenario_to_json(parse_scenario(plain)));
  CHECK(plain.at("propagator").at("alpha") == "adaptive");
  CHECK(!plain.contains("w"));
}

TEST_CASE("malformed scenario fields are named") {
  auto expect_field = [](nlohmann::json doc, const std::string& name) {
    try {
      parse_scenario(doc);
      FAIL("accepted malformed " << name);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ParseError);
      CHECK(std::string(e.what()).find(name) != std::string::npos);
    }
  };
  auto doc = base_scenario();
  doc["horizon"] = "three";
  expect_field(doc, "horizon");
  doc = base_scenario();
  doc.erase("x0");
  expect_field(doc, "x0");
  doc = base_scenario();
  doc["x0"]["hi"] = {1.0};
  expect_field(doc, "x0");
  doc = base_scenario();
  doc["propagator"]["method"] = "magic";
  expect_field(doc, "propagator.method");
  doc = base_scenario();
  doc["framework"] = "sideways";
  expect_field(doc, "framework");
  doc = base_scenario();
  doc["template"] = "hexagon";
  expect_field(doc, "template");
  CHECK_THROWS_AS(parse_scenario(nlohmann::json::array()), Error);
}

TEST_CASE("identity scenario keeps X0 and exits 0") {
  const fs::path dir = scratch("identity");
  write_gain_network(dir / "net.json", 1.0);
  const auto sc = write_scenario(dir, base_scenario());
  CHECK(tool("run " + sc.string()) == cli::kExitOk);

  for (const std::string fw : {"recursive", "one-shot"}) {
    const auto rows = read_csv(dir / "out" / (fw + "_boxes.csv"));
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
      CHECK(r[1] == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(r[2] == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(r[3] == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(r[4] == doctest::Approx(1.0).epsilon(1e-9));
    }
    const auto doc = read_json_file(dir / "out" / (fw + ".json"));
    for (const auto& v : doc.at("soundness_violation")) CHECK(v.get<double>() <= 1e-9);
  }
  CHECK(fs::exists(dir / "out" / "comparison.csv"));
  CHECK(fs::exists(dir / "out" / "trajectories.csv"));
  CHECK(read_csv(dir / "out" / "trajectories.csv").size() == 1000 * 4);
}

TEST_CASE("avoid set hit exits 2, missed exits 0") {
  const fs::path dir = scratch("avoid");
  write_gain_network(dir / "net.json", 2.0);
  auto doc = base_scenario();
  // 2^t [0,1]^2 reaches [4,8]^2 at t = 3.
  doc["avoid"] = {{{"lo", {5.0, 5.0}}, {"hi", {6.0, 6.0}}}};
  const auto sc = write_scenario(dir, doc);
  CHECK(tool("run " + sc.string()) == cli::kExitUnknown);
  const auto verdicts = read_json_file(dir / "out" / "verdicts.json");
  REQUIRE(verdicts.size() == 4);
  CHECK(verdicts[0].at("verdict") == "safe");
  CHECK(verdicts[3].at("verdict") == "unknown");

  doc["avoid"] = {{{"lo", {20.0, 20.0}}, {"hi", {30.0, 30.0}}}};
  write_scenario(dir, doc);
  CHECK(tool("run " + sc.string() + " --threads 1 --out " + (dir / "alt").string()) == cli::kExitOk);
  CHECK(fs::exists(dir / "alt" / "verdicts.json"));
}

TEST_CASE("errors exit 1") {
  const fs::path dir = scratch("errors");
  write_gain_network(dir / "net.json", 1.0);
  auto doc = base_scenario();
  doc["horizon"] = -2;
  CHECK(tool("run " + write_scenario(dir, doc).string()) == cli::kExitError);
  doc = base_scenario();
  doc["x0"] = {{"lo", {0.0, 0.0, 0.0}}, {"hi", {1.0, 1.0, 1.0}}};
  CHECK(tool("run " + write_scenario(dir, doc).string()) == cli::kExitError);
  doc = base_scenario();
  doc["network"] = "missing.json";
  CHECK(tool("run " + write_scenario(dir, doc).string()) == cli::kExitError);
  CHECK(tool("demo no-such-demo") == cli::kExitError);
  CHECK(tool("") == cli::kExitError);
  CHECK(tool("validate " + (dir / "net.json").string()) == cli::kExitOk);
}

TEST_CASE("unknown demo throws UnknownDemo") {
  try {
    cli::demo("no-such-demo");
    FAIL("accepted unknown demo");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownDemo);
  }
}

TEST_CASE("comparison csv gaps match the results") {
  const fs::path dir = scratch("comparison");
  write_gain_network(dir / "net.json", 2.0);
  const auto sc = write_scenario(dir, base_scenario());
  REQUIRE(cli::run(sc) == cli::kExitOk);
  std::ifstream in(dir / "out" / "comparison.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,kind,index,one_shot,recursive,gap");
  std::string line;
  int support_rows = 0;
  while (std::getline(in, line)) {
    if (line.find(",support,") == std::string::npos) continue;
    ++support_rows;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    CHECK(std::stod(cells[5]) == doctest::Approx(std::stod(cells[3]) - std::stod(cells[4])).epsilon(1e-12));
  }
  CHECK(support_rows == 4 * 4);
}
