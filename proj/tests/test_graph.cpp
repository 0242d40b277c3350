#include <doctest.h>

#include <random>

#include "nnreach/error.hpp"
#include "nnreach/graph.hpp"
#include "nnreach/network_io.hpp"
#include "nnreach/systems.hpp"

using namespace nnreach;

namespace {

NodeId id(std::size_t v) { return NodeId{v}; }

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::InvalidGraph;
}

CompGraph chain() {
  std::vector<NodeDecl> nodes{{id(0), Operator::input(), 1},
                              {id(1), Operator::affine(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)), 1},
                              {id(2), Operator::relu(1), 1},
                              {id(3), Operator::affine(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(1)), 1}};
  return build_graph(std::move(nodes), {{id(0), id(1), 0}, {id(1), id(2), 0}, {id(2), id(3), 0}}, {id(0)}, id(3));
}

CompGraph diamond() {
  std::vector<NodeDecl> nodes{{id(0), Operator::input(), 1},
                              {id(1), Operator::relu(1), 1},
                              {id(2), Operator::tanh(1), 1},
                              {id(3), Operator::add(1, 2), 1}};
  return build_graph(std::move(nodes), {{id(0), id(1), 0}, {id(0), id(2), 0}, {id(1), id(3), 0}, {id(2), id(3), 1}},
                     {id(0)}, id(3));
}

struct Dense {
  Eigen::MatrixXd w1, w2;
  Eigen::VectorXd b1, b2;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return w2 * (w1 * x + b1).cwiseMax(0.0) + b2;
  }
};

Dense random_dense(std::mt19937_64& rng, int in, int hidden, int out) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  auto fill = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = d(rng);
    return m;
  };
  return {fill(hidden, in), fill(out, hidden), fill(hidden, 1).col(0), fill(out, 1).col(0)};
}

}  // namespace

TEST_CASE("build_graph validation") {
  std::vector<NodeDecl> ok{{id(0), Operator::input(), 2},
                           {id(1), Operator::affine(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)), 2}};
  const CompGraph g = build_graph(ok, {{id(0), id(1), 0}}, {id(0)}, id(1));
  CHECK(g.dim(g.output_node()) == 2);

  std::vector<NodeDecl> cyc{{id(0), Operator::input(), 1}, {id(1), Operator::add(1, 2), 1}, {id(2), Operator::relu(1), 1}};
  CHECK(code_of([&] {
          build_graph(cyc, {{id(0), id(1), 0}, {id(2), id(1), 1}, {id(1), id(2), 0}}, {id(0)}, id(2));
        }) == Errc::CycleDetected);
  CHECK(code_of([&] { build_graph(ok, {}, {id(0)}, id(1)); }) == Errc::ArityMismatch);
  CHECK(code_of([&] { build_graph(ok, {{id(0), id(7), 0}}, {id(0)}, id(1)); }) == Errc::DanglingEdge);
  std::vector<NodeDecl> bad_dim{{id(0), Operator::input(), 3},
                                {id(1), Operator::affine(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)), 2}};
  CHECK(code_of([&] { build_graph(bad_dim, {{id(0), id(1), 0}}, {id(0)}, id(1)); }) == Errc::DimensionMismatch);
}

TEST_CASE("topological order") {
  const auto c = chain().topo_order();
  CHECK(c == std::vector<NodeId>{id(0), id(1), id(2), id(3)});
  const auto d = topological_order(diamond());
  CHECK(d == std::vector<NodeId>{id(0), id(1), id(2), id(3)});

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CompGraph g = random_nnds(seed, 3, seed % 2, {5, 4, 3}, Activation::Relu);
    const auto order = topological_order(g);
    REQUIRE(order.size() == g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      for (auto p : g.pre(id(i))) CHECK(g.topo_rank(p) < g.topo_rank(id(i)));
  }
}

TEST_CASE("unroll") {
  std::vector<NodeDecl> nodes{{id(0), Operator::input(), 1},
                              {id(1), Operator::affine(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Zero(1)), 1}};
  const CompGraph twice = build_graph(std::move(nodes), {{id(0), id(1), 0}}, {id(0)}, id(1));
  const UnrolledGraph u = unroll(twice, 3);
  const std::vector<Eigen::VectorXd> one{Eigen::VectorXd::Ones(1)};
  CHECK(evaluate(u.graph, one)[0] == 8.0);
  CHECK(u.states.size() == 4);
  CHECK(evaluate_all(u.graph, one)[u.states[2].value][0] == 4.0);

  const CompGraph f = random_nnds(9, 3, 2, {16, 16, 3}, Activation::Relu);
  const UnrolledGraph one_step = unroll(f, 1);
  CHECK(one_step.graph.size() == f.size());

  const UnrolledGraph u2 = unroll(f, 2);
  CHECK(u2.graph.input_nodes().size() == 3);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  auto draw = [&](int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = d(rng);
    return v;
  };
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd x0 = draw(3), w0 = draw(2), w1 = draw(2);
    const std::vector<Eigen::VectorXd> a{x0, w0};
    const Eigen::VectorXd x1 = evaluate(f, a);
    const std::vector<Eigen::VectorXd> b{x1, w1};
    const Eigen::VectorXd x2 = evaluate(f, b);
    const std::vector<Eigen::VectorXd> all{x0, w0, w1};
    CHECK(evaluate(u2.graph, all) == x2);
  }

  std::vector<NodeDecl> bad{{id(0), Operator::input(), 2},
                            {id(1), Operator::affine(Eigen::MatrixXd::Ones(1, 2), Eigen::VectorXd::Zero(1)), 1}};
  const CompGraph shrink = build_graph(std::move(bad), {{id(0), id(1), 0}}, {id(0)}, id(1));
  CHECK(code_of([&] { unroll(shrink, 2); }) == Errc::StateDimMismatch);
}

TEST_CASE("constraint extraction") {
  const CompGraph c = chain();
  const std::vector<NodeId> x{id(0)};
  CHECK(extract_subgraph(c, x, id(3)).member_nodes == std::vector<NodeId>{id(1), id(2), id(3)});
  const std::vector<NodeId> b{id(2)};
  const auto s = extract_subgraph(c, b, id(3));
  CHECK(s.member_nodes == std::vector<NodeId>{id(3)});
  CHECK(s.input_nodes == b);

  const CompGraph d = diamond();
  const std::vector<NodeId> cut{id(0), id(1)};
  CHECK(extract_subgraph(d, cut, id(3)).member_nodes == std::vector<NodeId>{id(2), id(3)});

  // Two disconnected chains: the output of one cannot reach the other's input.
  std::vector<NodeDecl> nodes{{id(0), Operator::input(), 1}, {id(1), Operator::input(), 1},
                              {id(2), Operator::relu(1), 1}, {id(3), Operator::relu(1), 1},
                              {id(4), Operator::add(1, 2), 1}};
  const CompGraph two = build_graph(std::move(nodes), {{id(0), id(2), 0}, {id(1), id(3), 0}, {id(2), id(4), 0},
                                                       {id(3), id(4), 1}},
                                    {id(0), id(1)}, id(4));
  const std::vector<NodeId> only0{id(0)};
  CHECK(code_of([&] { extract_subgraph(two, only0, id(3)); }) == Errc::UnreachableOutput);

  // With every input as a stop node the members are the dependent ancestors.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CompGraph g = random_nnds(seed, 2, 1, {6, 2}, Activation::Tanh);
    const auto sub = extract_subgraph(g, g.input_nodes(), g.output_node());
    std::vector<NodeId> expected;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!g.is_input(id(i))) expected.push_back(id(i));
    CHECK(sub.member_nodes == expected);
  }
}

TEST_CASE("evaluation") {
  std::vector<NodeDecl> r{{id(0), Operator::input(), 2}, {id(1), Operator::relu(2), 2}};
  const CompGraph relu = build_graph(std::move(r), {{id(0), id(1), 0}}, {id(0)}, id(1));
  const std::vector<Eigen::VectorXd> in{Eigen::Vector2d(-1, 2)};
  CHECK(evaluate(relu, in) == Eigen::Vector2d(0, 2));
  std::vector<NodeDecl> t{{id(0), Operator::input(), 1}, {id(1), Operator::tanh(1), 1}};
  const CompGraph th = build_graph(std::move(t), {{id(0), id(1), 0}}, {id(0)}, id(1));
  const std::vector<Eigen::VectorXd> zero{Eigen::VectorXd::Zero(1)};
  CHECK(evaluate(th, zero)[0] == 0.0);
  const std::vector<Eigen::VectorXd> wrong{Eigen::VectorXd::Zero(3)};
  CHECK(code_of([&] { evaluate(relu, wrong); }) == Errc::DimensionMismatch);
}

TEST_CASE("interconnected perception, policy and dynamics") {
  // x+ = dyn(x, pi(per(x) + w_y)) + w_x
  std::mt19937_64 rng(3);
  const Dense per = random_dense(rng, 2, 6, 2), pol = random_dense(rng, 2, 5, 1), dyn = random_dense(rng, 3, 8, 2);
  std::vector<NodeDecl> n;
  std::vector<Edge> e;
  std::size_t next = 0;
  auto add = [&](Operator op, std::size_t dim, std::vector<NodeId> args) {
    const NodeId v = id(next++);
    for (std::size_t s = 0; s < args.size(); ++s) e.push_back({args[s], v, s});
    n.push_back({v, std::move(op), dim});
    return v;
  };
  auto dense = [&](const Dense& m, std::vector<NodeId> args, std::vector<std::size_t> dims) {
    const NodeId h = add(Operator::affine(m.w1, m.b1, dims), m.w1.rows(), args);
    const NodeId r = add(Operator::relu(m.w1.rows()), m.w1.rows(), {h});
    return add(Operator::affine(m.w2, m.b2), m.w2.rows(), {r});
  };
  const NodeId x = add(Operator::input(), 2, {});
  const NodeId wx = add(Operator::input(), 2, {});
  const NodeId wy = add(Operator::input(), 2, {});
  const NodeId y = add(Operator::add(2, 2), 2, {dense(per, {x}, {}), wy});
  const NodeId u = dense(pol, {y}, {});
  const NodeId out = add(Operator::add(2, 2), 2, {dense(dyn, {x, u}, {2, 1}), wx});
  const CompGraph g = build_graph(n, e, {x, wx, wy}, out);
  CHECK(g.input_nodes().size() == 3);

  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Vector2d xv(d(rng), d(rng)), wxv(d(rng), d(rng)), wyv(d(rng), d(rng));
    const Eigen::VectorXd uv = pol.apply(per.apply(xv) + wyv);
    Eigen::VectorXd xu(3);
    xu << xv, uv;
    const Eigen::VectorXd manual = dyn.apply(xu) + wxv;
    const std::vector<Eigen::VectorXd> in{xv, wxv, wyv};
    CHECK((evaluate(g, in) - manual).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("network json round trip") {
  const CompGraph g = random_nnds(4, 2, 1, {7, 2}, Activation::Tanh);
  const auto doc = network_to_json(g);
  const CompGraph h = network_from_json(doc);
  CHECK(network_to_json(h) == doc);
  const std::vector<Eigen::VectorXd> in{Eigen::Vector2d(0.3, -0.7), Eigen::VectorXd::Constant(1, 0.1)};
  CHECK(evaluate(g, in) == evaluate(h, in));
  CHECK(code_of([] { network_from_json(nlohmann::json::parse(R"({"inputs": [0]})")); }) == Errc::ParseError);
}
