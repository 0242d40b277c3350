#include "nnreach/systems.hpp"

#include <cmath>
#include <cstdlib>
#include <random>

#include "nnreach/error.hpp"
#include "nnreach/network_io.hpp"

namespace nnreach {

CompGraph random_nnds(std::uint64_t seed, std::size_t n_x, std::size_t n_w, const std::vector<std::size_t>& widths,
                      Activation act) {
  if (widths.empty() || widths.back() != n_x)
    throw Error(Errc::InvalidArgument, "last layer width must equal the state dimension");
  std::mt19937_64 rng(seed);
  std::vector<NodeDecl> nodes;
  std::vector<Edge> edges;
  std::vector<NodeId> inputs;
  std::size_t next = 0;
  auto add = [&](Operator op, std::size_t dim) {
    const NodeId id{next++};
    nodes.push_back(NodeDecl{id, std::move(op), dim});
    return id;
  };
  inputs.push_back(add(Operator::input(), n_x));
  if (n_w > 0) inputs.push_back(add(Operator::input(), n_w));

  std::vector<NodeId> prev = inputs;
  std::vector<std::size_t> prev_dims{n_x};
  if (n_w > 0) prev_dims.push_back(n_w);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    std::size_t fan_in = 0;
    for (auto d : prev_dims) fan_in += d;
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-scale, scale);
    const auto rows = static_cast<Eigen::Index>(widths[l]);
    Eigen::MatrixXd w(rows, static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
    Eigen::VectorXd b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) b[i] = u(rng);
    const NodeId aff = add(Operator::affine(std::move(w), std::move(b), prev_dims), widths[l]);
    for (std::size_t s = 0; s < prev.size(); ++s) edges.push_back(Edge{prev[s], aff, s});
    prev = {aff};
    prev_dims = {widths[l]};
    if (l + 1 == widths.size()) break;
    const NodeId a = add(act == Activation::Relu ? Operator::relu(widths[l]) : Operator::tanh(widths[l]), widths[l]);
    edges.push_back(Edge{aff, a, 0});
    prev = {a};
  }
  return build_graph(std::move(nodes), std::move(edges), std::move(inputs), prev.front());
}

namespace {

Eigen::VectorXd uniform_in(const Box& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd z(b.lo.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * u(rng);
  return z;
}

void sample_one(const CompGraph& f, const Box& x0, const Box* w, std::size_t steps, std::uint64_t seed,
                std::size_t i, std::vector<Eigen::VectorXd>& xs, std::vector<Eigen::VectorXd>& ws) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(static_cast<std::uint64_t>(i) >> 32)};
  std::mt19937_64 rng(seq);
  const std::size_t nw = f.disturbance_dim();
  xs.assign(1, uniform_in(x0, rng));
  ws.clear();
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<Eigen::VectorXd> in{xs.back()};
    Eigen::VectorXd wt = nw > 0 ? uniform_in(*w, rng) : Eigen::VectorXd();
    Eigen::Index off = 0;
    for (std::size_t k = 1; k < f.input_nodes().size(); ++k) {
      const auto d = static_cast<Eigen::Index>(f.dim(f.input_nodes()[k]));
      in.push_back(wt.segment(off, d));
      off += d;
    }
    xs.push_back(evaluate(f, in));
    ws.push_back(std::move(wt));
  }
}

}  // namespace

TrajectoryBatch sample_trajectories(const CompGraph& f, const Box& x0, const Box* w, std::size_t steps,
                                    std::size_t n, std::uint64_t seed, bool parallel) {
  if (x0.dim() != f.state_dim()) throw Error(Errc::DimensionMismatch, "initial set does not match the state");
  if (f.disturbance_dim() > 0 && (!w || w->dim() != f.disturbance_dim()))
    throw Error(Errc::DimensionMismatch, "disturbance set does not match the network");
  TrajectoryBatch b;
  b.steps = steps;
  b.states.resize(n);
  b.disturbances.resize(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i)
      sample_one(f, x0, w, steps, seed, static_cast<std::size_t>(i), b.states[static_cast<std::size_t>(i)],
                 b.disturbances[static_cast<std::size_t>(i)]);
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i)
      sample_one(f, x0, w, steps, seed, static_cast<std::size_t>(i), b.states[static_cast<std::size_t>(i)],
                 b.disturbances[static_cast<std::size_t>(i)]);
  }
  return b;
}

std::vector<double> soundness_audit(const ReachResult& r, const TrajectoryBatch& batch) {
  std::vector<double> worst(r.steps.size(), -kInf);
  for (const auto& traj : batch.states)
    for (std::size_t t = 0; t < r.steps.size() && t < traj.size(); ++t)
      worst[t] = std::max(worst[t], r.steps[t].set.violation(traj[t]));
  return worst;
}

Counterexample counterexample_search(const SearchOptions& opts) {
  Propagator fwd;
  fwd.method = Method::ForwardLin;
  for (std::size_t k = 0; k < opts.max_seeds; ++k) {
    const std::uint64_t seed = opts.first_seed + k;
    std::mt19937_64 shape_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<std::size_t> layers(1, 2), width(4, 16);
    std::uniform_real_distribution<double> center(-1.0, 1.0), radius(0.1, 1.0);
    const std::size_t n_x = 2;
    std::vector<std::size_t> widths;
    const std::size_t depth = layers(shape_rng);
    for (std::size_t l = 0; l < depth; ++l) widths.push_back(width(shape_rng));
    widths.push_back(n_x);
    Box x0{Eigen::VectorXd(2), Eigen::VectorXd(2)};
    for (Eigen::Index i = 0; i < 2; ++i) {
      const double c = center(shape_rng);
      const double r = radius(shape_rng);
      x0.lo[i] = c - r;
      x0.hi[i] = c + r;
    }
    CompGraph f = random_nnds(seed, n_x, 0, widths, Activation::Relu);
    const Template tmpl = Template::box(n_x);
    ReachResult re = recursive_reach(fwd, f, x0, nullptr, opts.steps, tmpl);
    ReachResult os = one_shot_reach(fwd, f, x0, nullptr, opts.steps, tmpl);
    double gap = 0.0;
    std::size_t coord = 0;
    for (std::size_t t = 1; t <= opts.steps; ++t) {
      const Eigen::VectorXd wr = re.steps[t].set.box.width();
      const Eigen::VectorXd wo = os.steps[t].set.box.width();
      for (Eigen::Index i = 0; i < wr.size(); ++i) {
        if (!(wr[i] > 0.0)) continue;
        const double g = wo[i] / wr[i] - 1.0;
        if (g > gap) {
          gap = g;
          coord = static_cast<std::size_t>(i);
        }
      }
    }
    if (gap > opts.threshold)
      return Counterexample{seed, n_x, widths, std::move(f), x0, gap, coord, std::move(re), std::move(os)};
  }
  throw Error(Errc::SearchExhausted, "no forward-propagation counterexample in " + std::to_string(opts.max_seeds) +
                                         " seeds");
}

// Fixtures ------------------------------------------------------------------

std::filesystem::path fixture_dir() {
  if (const char* env = std::getenv("NNREACH_FIXTURES")) return env;
  return NNREACH_FIXTURE_DIR;
}

Box box_from_json(const nlohmann::json& lo, const nlohmann::json& hi) {
  if (!lo.is_array() || !hi.is_array() || lo.size() != hi.size())
    throw Error(Errc::ParseError, "box needs lo and hi arrays of equal length");
  Box b{Eigen::VectorXd(static_cast<Eigen::Index>(lo.size())), Eigen::VectorXd(static_cast<Eigen::Index>(hi.size()))};
  for (std::size_t i = 0; i < lo.size(); ++i) {
    b.lo[static_cast<Eigen::Index>(i)] = lo[i].get<double>();
    b.hi[static_cast<Eigen::Index>(i)] = hi[i].get<double>();
  }
  b.validate();
  return b;
}

std::vector<FixtureScenario> load_manifest(const std::filesystem::path& path) {
  const nlohmann::json doc = read_json_file(path);
  std::vector<FixtureScenario> out;
  try {
    for (const auto& s : doc.at("scenarios")) {
      FixtureScenario f;
      f.name = s.at("name").get<std::string>();
      f.network = path.parent_path() / s.at("network").get<std::string>();
      f.x0 = box_from_json(s.at("x0").at("lo"), s.at("x0").at("hi"));
      if (s.contains("w")) f.w = box_from_json(s.at("w").at("lo"), s.at("w").at("hi"));
      f.horizon = s.at("horizon").get<std::size_t>();
      f.template_name = s.value("template", "box");
      f.note = s.value("note", "");
      f.kind = s.value("kind", "network");
      out.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  return out;
}

FixtureScenario find_fixture(const std::string& name) {
  for (auto& f : load_manifest(fixture_dir() / "manifest.json"))
    if (f.name == name) return f;
  throw Error(Errc::InvalidArgument, "no fixture named '" + name + "'");
}

CompGraph FixtureScenario::load_network() const {
  if (kind == "residual") return load_residual_loop(network);
  return nnreach::load_network(network);
}

namespace {

// Appends the non-input nodes of `src` to a node list, mapping src's inputs
// to the given ids. Returns the id of src's output.
NodeId splice(const CompGraph& src, const std::vector<NodeId>& bind, std::vector<NodeDecl>& nodes,
              std::vector<Edge>& edges) {
  std::vector<NodeId> map(src.size());
  const auto& ins = src.input_nodes();
  if (bind.size() != ins.size()) throw Error(Errc::ArityMismatch, "input binding size mismatch");
  for (std::size_t k = 0; k < ins.size(); ++k) map[ins[k].value] = bind[k];
  for (NodeId id : src.topo_order()) {
    if (src.is_input(id)) continue;
    const NodeId nid{nodes.size()};
    map[id.value] = nid;
    nodes.push_back(NodeDecl{nid, src.op(id), src.dim(id)});
    const auto args = src.pre(id);
    for (std::size_t s = 0; s < args.size(); ++s) edges.push_back(Edge{map[args[s].value], nid, s});
  }
  return map[src.output_node().value];
}

}  // namespace

CompGraph assemble_residual_loop(const CompGraph& policy, const CompGraph& residual, const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& b) {
  const std::size_t n = policy.state_dim();
  const std::size_t m = policy.dim(policy.output_node());
  if (static_cast<std::size_t>(a.rows()) != n || static_cast<std::size_t>(a.cols()) != n ||
      static_cast<std::size_t>(b.rows()) != n || static_cast<std::size_t>(b.cols()) != m)
    throw Error(Errc::DimensionMismatch, "A or B does not match the policy dimensions");
  if (residual.dim(residual.output_node()) != n) throw Error(Errc::DimensionMismatch, "residual output dim");

  std::vector<NodeDecl> nodes;
  std::vector<Edge> edges;
  const NodeId x{0}, w{1};
  nodes.push_back(NodeDecl{x, Operator::input(), n});
  nodes.push_back(NodeDecl{w, Operator::input(), n});
  const NodeId u = splice(policy, {x}, nodes, edges);

  std::vector<NodeId> res_bind;
  if (residual.input_nodes().size() == 2) {
    res_bind = {x, u};
  } else if (residual.input_nodes().size() == 1 && residual.state_dim() == n + m) {
    const NodeId xu{nodes.size()};
    nodes.push_back(NodeDecl{xu, Operator::concat({n, m}), n + m});
    edges.push_back(Edge{x, xu, 0});
    edges.push_back(Edge{u, xu, 1});
    res_bind = {xu};
  } else {
    throw Error(Errc::DimensionMismatch, "residual net must take (x, u)");
  }
  const NodeId dx = splice(residual, res_bind, nodes, edges);

  Eigen::MatrixXd ab(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n + m));
  ab << a, b;
  const NodeId lin{nodes.size()};
  nodes.push_back(NodeDecl{lin, Operator::affine(ab, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), {n, m}), n});
  edges.push_back(Edge{x, lin, 0});
  edges.push_back(Edge{u, lin, 1});
  const NodeId sum{nodes.size()};
  nodes.push_back(NodeDecl{sum, Operator::add(n, 3), n});
  edges.push_back(Edge{lin, sum, 0});
  edges.push_back(Edge{dx, sum, 1});
  edges.push_back(Edge{w, sum, 2});
  return build_graph(std::move(nodes), std::move(edges), {x, w}, sum);
}

CompGraph load_residual_loop(const std::filesystem::path& path) {
  const nlohmann::json doc = read_json_file(path);
  auto matrix = [](const nlohmann::json& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.at(0).size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
    return m;
  };
  try {
    return assemble_residual_loop(network_from_json(doc.at("policy")), network_from_json(doc.at("residual")),
                                  matrix(doc.at("A")), matrix(doc.at("B")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace nnreach
