#include "nnreach/scenario.hpp"

#include "nnreach/error.hpp"
#include "nnreach/network_io.hpp"
#include "nnreach/systems.hpp"

namespace nnreach {

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

nlohmann::json box_json(const Box& b) { return {{"lo", vec_json(b.lo)}, {"hi", vec_json(b.hi)}}; }

Box parse_box(const nlohmann::json& doc, const std::string& field) {
  try {
    return box_from_json(doc.at("lo"), doc.at("hi"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, "field '" + field + "': " + e.what());
  } catch (const Error& e) {
    throw Error(Errc::ParseError, "field '" + field + "': " + e.what());
  }
}

const char* framework_name(FrameworkChoice f) {
  switch (f) {
    case FrameworkChoice::Recursive: return "recursive";
    case FrameworkChoice::OneShot: return "one-shot";
    case FrameworkChoice::Both: return "both";
  }
  return "both";
}

nlohmann::json alpha_json(const AlphaRule& a) {
  switch (a.mode) {
    case AlphaRule::Mode::Adaptive: return "adaptive";
    case AlphaRule::Mode::Zero: return "zero";
    case AlphaRule::Mode::One: return "one";
    case AlphaRule::Mode::Constant: return a.value;
  }
  return "adaptive";
}

const char* preact_name(PreactMode m) {
  switch (m) {
    case PreactMode::Auto: return "auto";
    case PreactMode::Interval: return "interval";
    case PreactMode::Backward: return "backward";
    case PreactMode::LP: return "lp";
  }
  return "auto";
}

template <class F>
auto field(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, "field '" + name + "': " + e.what());
  }
}

}  // namespace

Template Scenario::make_template(std::size_t n) const {
  if (!directions.empty()) return Template::from_directions(directions);
  return Template::preset(template_name, n);
}

std::filesystem::path Scenario::network_path() const {
  const std::filesystem::path p(network);
  return p.is_absolute() ? p : base_dir / p;
}

std::filesystem::path Scenario::output_dir() const {
  const std::filesystem::path p(output);
  return p.is_absolute() ? p : base_dir / p;
}

CompGraph Scenario::load_network() const {
  if (kind == "residual") return load_residual_loop(network_path());
  return nnreach::load_network(network_path());
}

Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw Error(Errc::ParseError, "scenario must be a JSON object");
  Scenario s;
  s.base_dir = base_dir;
  s.network = field("network", [&] { return doc.at("network").get<std::string>(); });
  s.kind = field("kind", [&] { return doc.value("kind", std::string("network")); });
  if (s.kind != "network" && s.kind != "residual") throw Error(Errc::ParseError, "field 'kind': unknown kind " + s.kind);
  if (!doc.contains("x0")) throw Error(Errc::ParseError, "field 'x0': missing");
  s.x0 = parse_box(doc.at("x0"), "x0");
  if (doc.contains("w") && !doc.at("w").is_null()) s.w = parse_box(doc.at("w"), "w");
  const auto horizon = field("horizon", [&] { return doc.at("horizon").get<std::int64_t>(); });
  if (horizon < 1) throw Error(Errc::ParseError, "field 'horizon': must be at least 1");
  s.horizon = static_cast<std::size_t>(horizon);

  const std::string fw = field("framework", [&] { return doc.value("framework", std::string("both")); });
  if (fw == "recursive") s.framework = FrameworkChoice::Recursive;
  else if (fw == "one-shot") s.framework = FrameworkChoice::OneShot;
  else if (fw == "both") s.framework = FrameworkChoice::Both;
  else throw Error(Errc::ParseError, "field 'framework': unknown framework " + fw);

  if (doc.contains("propagator")) {
    const auto& p = doc.at("propagator");
    try {
      s.propagator.method = parse_method(field("propagator.method", [&] { return p.at("method").get<std::string>(); }));
    } catch (const Error& e) {
      throw Error(Errc::ParseError, std::string("field 'propagator.method': ") + e.what());
    }
    if (p.contains("alpha")) {
      const auto& a = p.at("alpha");
      auto& rule = s.propagator.config.alpha;
      if (a.is_number()) {
        rule.mode = AlphaRule::Mode::Constant;
        rule.value = a.get<double>();
      } else if (a == "adaptive") rule.mode = AlphaRule::Mode::Adaptive;
      else if (a == "zero") rule.mode = AlphaRule::Mode::Zero;
      else if (a == "one") rule.mode = AlphaRule::Mode::One;
      else throw Error(Errc::ParseError, "field 'propagator.alpha': expected adaptive, zero, one or a number");
    }
    if (p.contains("preact")) {
      const std::string m = field("propagator.preact", [&] { return p.at("preact").get<std::string>(); });
      auto& mode = s.propagator.config.preact;
      if (m == "auto") mode = PreactMode::Auto;
      else if (m == "interval") mode = PreactMode::Interval;
      else if (m == "backward") mode = PreactMode::Backward;
      else if (m == "lp") mode = PreactMode::LP;
      else throw Error(Errc::ParseError, "field 'propagator.preact': unknown mode " + m);
    }
    if (p.contains("time_limit_s"))
      s.propagator.config.bnb.time_limit_s = field("propagator.time_limit_s", [&] { return p.at("time_limit_s").get<double>(); });
  }

  if (doc.contains("template")) {
    const auto& t = doc.at("template");
    if (t.is_string()) {
      s.template_name = t.get<std::string>();
      if (s.template_name != "box" && s.template_name != "octagon")
        throw Error(Errc::ParseError, "field 'template': unknown preset " + s.template_name);
    } else {
      s.template_name.clear();
      field("template", [&] {
        for (const auto& row : t) {
          Eigen::VectorXd d(static_cast<Eigen::Index>(row.size()));
          for (std::size_t i = 0; i < row.size(); ++i) d[static_cast<Eigen::Index>(i)] = row[i].get<double>();
          s.directions.push_back(d);
        }
        return 0;
      });
      if (s.directions.empty()) throw Error(Errc::ParseError, "field 'template': empty direction list");
    }
  }
  if (doc.contains("avoid"))
    for (const auto& b : doc.at("avoid")) s.avoid.push_back(parse_box(b, "avoid"));
  s.seed = field("seed", [&] { return doc.value("seed", std::uint64_t{0}); });
  s.samples = field("samples", [&] { return doc.value("samples", std::size_t{1000}); });
  s.output = field("output", [&] { return doc.value("output", std::string("out")); });
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_json_file(path), path.parent_path());
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json doc;
  doc["network"] = s.network;
  doc["kind"] = s.kind;
  doc["x0"] = box_json(s.x0);
  if (s.w) doc["w"] = box_json(*s.w);
  doc["horizon"] = s.horizon;
  doc["framework"] = framework_name(s.framework);
  doc["propagator"] = {{"method", to_string(s.propagator.method)},
                       {"alpha", alpha_json(s.propagator.config.alpha)},
                       {"preact", preact_name(s.propagator.config.preact)},
                       {"time_limit_s", s.propagator.config.bnb.time_limit_s}};
  if (s.directions.empty()) {
    doc["template"] = s.template_name;
  } else {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& d : s.directions) rows.push_back(vec_json(d));
    doc["template"] = rows;
  }
  nlohmann::json avoid = nlohmann::json::array();
  for (const auto& b : s.avoid) avoid.push_back(box_json(b));
  doc["avoid"] = avoid;
  doc["seed"] = s.seed;
  doc["samples"] = s.samples;
  doc["output"] = s.output;
  return doc;
}

void validate_scenario(const Scenario& s, const CompGraph& f) {
  if (s.x0.dim() != f.state_dim()) throw Error(Errc::DimensionMismatch, "x0 does not match the network state");
  if (f.disturbance_dim() > 0 && (!s.w || s.w->dim() != f.disturbance_dim()))
    throw Error(Errc::DimensionMismatch, "w does not match the network disturbance input");
  if (f.disturbance_dim() == 0 && s.w && s.w->dim() > 0)
    throw Error(Errc::DimensionMismatch, "network takes no disturbance");
  for (const auto& d : s.directions)
    if (static_cast<std::size_t>(d.size()) != f.state_dim())
      throw Error(Errc::DimensionMismatch, "template direction does not match the network state");
  for (const auto& b : s.avoid)
    if (b.dim() != f.state_dim()) throw Error(Errc::DimensionMismatch, "avoid box does not match the network state");
}

}  // namespace nnreach
