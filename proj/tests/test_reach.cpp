#include <doctest.h>

#include <random>

#include "nnreach/error.hpp"
#include "nnreach/reach.hpp"
#include "nnreach/systems.hpp"
#include "oracles.hpp"

using namespace nnreach;

namespace {

const Method kAll[] = {Method::Interval, Method::ForwardLin, Method::BackwardLin, Method::LP, Method::BnB};
const Method kSeparable[] = {Method::BackwardLin, Method::LP, Method::BnB};

CompGraph linear(const Eigen::MatrixXd& w) {
  std::vector<NodeDecl> nodes{{NodeId{0}, Operator::input(), static_cast<std::size_t>(w.cols())},
                              {NodeId{1}, Operator::affine(w, Eigen::VectorXd::Zero(w.rows())),
                               static_cast<std::size_t>(w.rows())}};
  return build_graph(std::move(nodes), {{NodeId{0}, NodeId{1}, 0}}, {NodeId{0}}, NodeId{1});
}

Propagator with(Method m) {
  Propagator p;
  p.method = m;
  return p;
}

InputSets box_sets(const CompGraph& g, const Box& x) {
  InputSet s;
  s.box = x;
  return make_input_sets(g, s, nullptr);
}

Box random_box(std::mt19937_64& rng, std::size_t n, double r) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::VectorXd lo(static_cast<Eigen::Index>(n)), hi(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    const double c = d(rng), h = r * (0.25 + 0.75 * (d(rng) + 1.0) / 2.0);
    lo[i] = c - h;
    hi[i] = c + h;
  }
  return Box{lo, hi};
}

}  // namespace

TEST_CASE("templates") {
  const Template b = Template::box(3);
  CHECK(b.size() == 6);
  const Template o = Template::octagon(2);
  CHECK(o.size() == 8);
  for (const auto& d : o.directions) CHECK(d.norm() == doctest::Approx(1.0));
  CHECK(Template::preset("octagon", 3).size() == 18);
  CHECK_THROWS_AS(Template::preset("hexagon", 2), Error);

  const Box x = Box::of({-1, 2}, {1, 3});
  const PolytopeApprox p = PolytopeApprox::from_box(o, x);
  CHECK(p.violation(Eigen::Vector2d(0, 2.5)) <= 0.0);
  CHECK(p.violation(Eigen::Vector2d(1.5, 2.5)) > 0.0);
  const PolytopeApprox q = PolytopeApprox::from_support(o, p.support);
  CHECK((q.box.lo - x.lo).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((q.box.hi - x.hi).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(q.as_input_set().halfspaces.size() == 8);
}

TEST_CASE("linear graphs propagate exactly") {
  const Box x = Box::of({-0.5, 0.25}, {1.0, 0.75});
  const CompGraph id = linear(Eigen::MatrixXd::Identity(2, 2));
  for (Method m : kAll) {
    for (const Template& t : {Template::box(2), Template::octagon(2)}) {
      const auto out = propagate(with(m), id, box_sets(id, x), id.output_node(), t).set;
      CHECK((out.support - PolytopeApprox::from_box(t, x).support).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
  const CompGraph neg = linear(-Eigen::MatrixXd::Identity(1, 1));
  for (Method m : kAll) {
    const auto out = propagate(with(m), neg, box_sets(neg, Box::of({0}, {1})), neg.output_node(), Template::box(1)).set;
    CHECK(out.box.lo[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(out.box.hi[0] == doctest::Approx(0.0));
  }
}

TEST_CASE("linear systems over several steps") {
  const Box x0 = Box::of({-1}, {1});
  const CompGraph id = linear(Eigen::MatrixXd::Identity(1, 1));
  const CompGraph twice = linear(Eigen::MatrixXd::Constant(1, 1, 2.0));
  for (Method m : {Method::LP, Method::BnB}) {
    const auto r = recursive_reach(with(m), id, x0, nullptr, 4, Template::box(1));
    for (const auto& s : r.steps) {
      CHECK(s.set.box.lo[0] == doctest::Approx(-1.0));
      CHECK(s.set.box.hi[0] == doctest::Approx(1.0));
    }
  }
  for (Method m : kAll) {
    for (const auto& r : {recursive_reach(with(m), twice, x0, nullptr, 3, Template::box(1)),
                          one_shot_reach(with(m), twice, x0, nullptr, 3, Template::box(1))}) {
      REQUIRE(r.steps.size() == 4);
      for (std::size_t t = 1; t <= 3; ++t) {
        const double e = std::pow(2.0, static_cast<double>(t));
        CHECK(r.steps[t].set.box.lo[0] == doctest::Approx(-e));
        CHECK(r.steps[t].set.box.hi[0] == doctest::Approx(e));
      }
    }
  }
}

TEST_CASE("first step agrees across frameworks") {
  const Box w = Box::of({-0.05}, {0.05});
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const CompGraph f = random_nnds(seed, 2, seed % 2, {8, 2}, seed % 3 ? Activation::Relu : Activation::Tanh);
    const Box x0 = Box::of({-0.5, -0.5}, {0.5, 0.5});
    for (Method m : kAll) {
      const auto a = recursive_reach(with(m), f, x0, f.disturbance_dim() ? &w : nullptr, 1, Template::octagon(2));
      const auto b = one_shot_reach(with(m), f, x0, f.disturbance_dim() ? &w : nullptr, 1, Template::octagon(2));
      CHECK(a.steps[1].set.support == b.steps[1].set.support);
    }
  }
}

TEST_CASE("lp support values dominate backward ones") {
  std::mt19937_64 rng(8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CompGraph g = random_nnds(40 + seed, 2, 0, {6, 2}, Activation::Relu);
    const InputSets sets = box_sets(g, random_box(rng, 2, 0.8));
    const auto lp = propagate(with(Method::LP), g, sets, g.output_node(), Template::octagon(2)).set;
    const auto back = propagate(with(Method::BackwardLin), g, sets, g.output_node(), Template::octagon(2)).set;
    const auto bnb = propagate(with(Method::BnB), g, sets, g.output_node(), Template::octagon(2)).set;
    CHECK((lp.support - back.support).minCoeff() >= -1e-7);
    CHECK((bnb.support - lp.support).minCoeff() >= -1e-7);
  }
}

TEST_CASE("one-shot is at least as tight for separable propagators") {
  const Box w = Box::of({-0.05}, {0.05});
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t nx = 1 + seed % 3;
    const CompGraph f = random_nnds(300 + seed, nx, seed % 2, {10, nx}, seed % 4 == 3 ? Activation::Tanh : Activation::Relu);
    const Box x0 = random_box(rng, nx, 0.3);
    for (Method m : kSeparable) {
      const auto os = one_shot_reach(with(m), f, x0, f.disturbance_dim() ? &w : nullptr, 3, Template::octagon(nx));
      const auto re = recursive_reach(with(m), f, x0, f.disturbance_dim() ? &w : nullptr, 3, Template::octagon(nx));
      for (const auto& c : compare_tightness(os, re)) CHECK(c.a_in_b);
    }
  }
}

TEST_CASE("reach sets contain sampled trajectories") {
  const Box w = Box::of({-0.05, -0.05}, {0.05, 0.05});
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const CompGraph f = random_nnds(500 + seed, 2, seed % 2 ? 2 : 0, {12, 12, 2}, seed < 2 ? Activation::Relu : Activation::Tanh);
    const Box x0 = Box::of({-0.3, 0.1}, {0.1, 0.4});
    const Box* wp = f.disturbance_dim() ? &w : nullptr;
    const TrajectoryBatch batch = sample_trajectories(f, x0, wp, 3, 1000, seed);
    for (Method m : kAll) {
      for (const auto& r : {recursive_reach(with(m), f, x0, wp, 3, Template::octagon(2)),
                            one_shot_reach(with(m), f, x0, wp, 3, Template::octagon(2))}) {
        for (double v : soundness_audit(r, batch)) CHECK(v <= 1e-9);
      }
    }
  }
}

TEST_CASE("richer templates tighten recursive sets") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const CompGraph f = random_nnds(700 + seed, 2, 0, {10, 2}, Activation::Relu);
    const Box x0 = Box::of({-0.4, -0.2}, {0.2, 0.3});
    const auto box = recursive_reach(with(Method::LP), f, x0, nullptr, 4, Template::box(2));
    const auto oct = recursive_reach(with(Method::LP), f, x0, nullptr, 4, Template::octagon(2));
    for (std::size_t t = 0; t < box.steps.size(); ++t)
      CHECK((oct.steps[t].set.support.head(4) - box.steps[t].set.support).minCoeff() >= -1e-7);
  }
}

TEST_CASE("comparison and avoid checks") {
  const CompGraph f = random_nnds(2, 2, 0, {8, 2}, Activation::Relu);
  const Box x0 = Box::of({-0.2, -0.2}, {0.2, 0.2});
  const auto r = recursive_reach(with(Method::LP), f, x0, nullptr, 2, Template::box(2));
  for (const auto& c : compare_tightness(r, r)) {
    CHECK(c.gaps.cwiseAbs().maxCoeff() == 0.0);
    CHECK(c.a_in_b);
    CHECK(c.b_in_a);
  }
  const auto oct = recursive_reach(with(Method::LP), f, x0, nullptr, 2, Template::octagon(2));
  CHECK_THROWS_AS(compare_tightness(r, oct), Error);
  const auto short_run = recursive_reach(with(Method::LP), f, x0, nullptr, 1, Template::box(2));
  CHECK_THROWS_AS(compare_tightness(r, short_run), Error);

  const Box& last = r.steps.back().set.box;
  Box far = last;
  far.lo.array() += 10.0;
  far.hi.array() += 10.0;
  Box around = last;
  around.lo.array() -= 1.0;
  around.hi.array() += 1.0;
  for (Verdict v : check_avoid(r, {far})) CHECK(v == Verdict::Safe);
  CHECK(check_avoid(r, {around}).back() == Verdict::Unknown);

  const auto doc = to_json(r);
  CHECK(doc["steps"].size() == 3);
  CHECK(doc["framework"] == "recursive");
}

TEST_CASE("polytope and box intersection matches vertex enumeration") {
  std::mt19937_64 rng(13);
  const Template t = Template::octagon(2);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < 300; ++k) {
    Eigen::VectorXd support(8);
    const Eigen::Vector2d center(gauss(rng), gauss(rng));
    for (int i = 0; i < 8; ++i) support[i] = t.directions[static_cast<std::size_t>(i)].dot(center) - (0.2 + std::abs(gauss(rng)));
    const PolytopeApprox p = PolytopeApprox::from_support(t, support);
    const Box b = random_box(rng, 2, 0.6);
    oracle::Polyhedron h{Eigen::MatrixXd(12, 2), Eigen::VectorXd(12)};
    h.g.topRows(8) = t.matrix();
    h.h.head(8) = support;
    h.g.bottomRows(4) << 1, 0, -1, 0, 0, 1, 0, -1;
    h.h.tail(4) << b.lo[0], -b.hi[0], b.lo[1], -b.hi[1];
    const bool expected = oracle::vertex_min(h, Eigen::Vector2d::Zero()).has_value();
    CHECK(intersects(p, b) == expected);
  }
}
