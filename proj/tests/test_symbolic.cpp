#include "doctest.h"

#include <cmath>

#include "mdimlab/rng.hpp"
#include "mdimlab/symbolic.hpp"

using namespace mdimlab;

namespace {

Point random_point(CounterRng& rng, std::uint64_t& ctr, int k) {
  Word prefix;
  std::uint64_t plen = rng.below(ctr++, 5);
  for (std::uint64_t i = 0; i < plen; ++i)
    prefix.push_back(static_cast<Sym>(rng.below(ctr++, static_cast<std::uint64_t>(k))));
  Word block;
  std::uint64_t blen = 1 + rng.below(ctr++, 3);
  for (std::uint64_t i = 0; i < blen; ++i)
    block.push_back(static_cast<Sym>(rng.below(ctr++, static_cast<std::uint64_t>(k))));
  return Point::word_then_periodic(std::move(prefix), std::move(block));
}

}  // namespace

TEST_CASE("word helpers round trip") {
  Word w = word_from_str("0213", 4);
  CHECK(w == Word{0, 2, 1, 3});
  CHECK(word_str(w) == "0213");
  CHECK_THROWS(word_from_str("05", 4));
}

TEST_CASE("agreement lengths for the 2-adic ultrametric") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  // at eps = 2^-m the weight 2^-m still counts, so m+1 coordinates
  CHECK(sys.forced_agreement_len(0.25) == 3);
  CHECK(sys.ball_agreement_len(0.25) == 3);
  CHECK(sys.forced_agreement_len(0.5) == 2);
  CHECK(sys.forced_agreement_len(0.3) == 2);
  CHECK(sys.forced_agreement_len(1.0) == 1);
  CHECK(sys.separation_offset(0.25) == 2);
  CHECK(sys.covering_offset(0.25) == 2);
  CHECK(sys.partition_depth(0.125) == 4);
  CHECK_THROWS(sys.forced_agreement_len(0.0));
}

TEST_CASE("agreement lengths on the embedded grid split into a bracket") {
  for (int m = 2; m <= 5; ++m) {
    double eps = std::ldexp(1.0, -m);
    auto sys = SystemFamily::refined_grid().at(eps);
    CHECK(sys.alphabet_size == (1 << m));
    // one symbol of disagreement can already exceed eps only at j = 0
    CHECK(sys.forced_agreement_len(eps) == 1);
    // beyond m+1 coordinates nothing can reach eps
    CHECK(sys.ball_agreement_len(eps) == m + 1);
    CHECK(sys.separation_offset(eps) == 0);
    CHECK(sys.covering_offset(eps) == m);
  }
  // k = 2 embeds as {0,1}; the grid metric then equals the ultrametric
  auto sys2 = SystemFamily::refined_grid().at(0.5);
  CHECK(sys2.alphabet_size == 2);
  CHECK(sys2.forced_agreement_len(0.5) == 2);
  CHECK(sys2.ball_agreement_len(0.5) == 2);
}

TEST_CASE("point coordinates, shifts and periods") {
  Point p = Point::word_then_periodic({0, 1, 2}, {3, 4});
  CHECK(p.at(0) == 0);
  CHECK(p.at(2) == 2);
  CHECK(p.at(3) == 3);
  CHECK(p.at(4) == 4);
  CHECK(p.at(5) == 3);
  CHECK(p.eventual_period() == 2);
  for (std::size_t j : {std::size_t{1}, std::size_t{4}, std::size_t{7}}) {
    Point q = p.shifted(j);
    for (std::size_t i = 0; i < 12; ++i) CHECK(q.at(i) == p.at(i + j));
  }
  CHECK(p.first(6) == Word{0, 1, 2, 3, 4, 3});
}

TEST_CASE("ultrametric distances on eventually periodic points") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  Point x = Point::constant(0);
  Point y = Point::word_then_constant({0, 0, 1}, 0);
  CHECK(point_distance(sys, x, y) == 0.25);
  CHECK(bowen_distance(sys, x, y, 1) == 0.25);
  CHECK(bowen_distance(sys, x, y, 2) == 0.5);
  CHECK(bowen_distance(sys, x, y, 3) == 1.0);
  CHECK(bowen_distance(sys, x, y, 7) == 1.0);
  CHECK(point_distance(sys, x, x) == 0.0);
  // equal points that are written differently
  Point z = Point::word_then_periodic({0, 0}, {0});
  CHECK(point_distance(sys, x, z) == 0.0);
  CHECK(bowen_distance(sys, x, z, 5) == 0.0);
}

TEST_CASE("grid metric weighs embedded symbol gaps by coordinate") {
  auto sys = SymbolicSystem::full_shift(4, MetricKind::SupWeightedGrid);
  Point x = Point::word_then_constant({0, 3}, 0);
  Point y = Point::constant(0);
  CHECK(point_distance(sys, x, y) == 0.5);       // gap 1 at coordinate 1
  CHECK(bowen_distance(sys, x, y, 2) == 1.0);    // shift brings it to coordinate 0
  Point u = Point::word_then_constant({0, 1}, 0);
  CHECK(point_distance(sys, u, y) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("bowen distance is monotone in n and symmetric") {
  CounterRng rng(2026, 1);
  std::uint64_t ctr = 0;
  for (MetricKind m : {MetricKind::Ultrametric2adic, MetricKind::SupWeightedGrid}) {
    auto sys = SymbolicSystem::full_shift(3, m);
    for (int trial = 0; trial < 40; ++trial) {
      Point x = random_point(rng, ctr, 3);
      Point y = random_point(rng, ctr, 3);
      double prev = 0.0;
      for (int n = 1; n <= 9; ++n) {
        double d = bowen_distance(sys, x, y, n);
        CHECK(d >= prev);
        CHECK(d == bowen_distance(sys, y, x, n));
        prev = d;
      }
    }
  }
}

TEST_CASE("triangle inequality, strong form for the ultrametric") {
  CounterRng rng(7, 2);
  std::uint64_t ctr = 0;
  auto ultra = SymbolicSystem::full_shift(4, MetricKind::Ultrametric2adic);
  auto grid = SymbolicSystem::full_shift(4, MetricKind::SupWeightedGrid);
  for (int trial = 0; trial < 60; ++trial) {
    Point x = random_point(rng, ctr, 4);
    Point y = random_point(rng, ctr, 4);
    Point z = random_point(rng, ctr, 4);
    double uxy = point_distance(ultra, x, y);
    double uyz = point_distance(ultra, y, z);
    double uxz = point_distance(ultra, x, z);
    CHECK(uxz <= std::max(uxy, uyz) + 1e-15);
    double gxy = point_distance(grid, x, y);
    double gyz = point_distance(grid, y, z);
    double gxz = point_distance(grid, x, z);
    CHECK(gxz <= gxy + gyz + 1e-12);
  }
}

TEST_CASE("potential resolution builds an exact integer lattice") {
  auto sys = SymbolicSystem::full_shift(4, MetricKind::SupWeightedGrid);
  auto pot = resolve(Potential::coordinate_affine(1.0, 0.0), sys);
  REQUIRE(pot.has_lattice);
  CHECK(pot.lattice_den == 3);
  CHECK(pot.lattice_num == std::vector<std::int64_t>{0, 1, 2, 3});
  auto c = resolve(Potential::constant(0.7), SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic));
  REQUIRE(c.has_lattice);
  CHECK(c.lattice_num == std::vector<std::int64_t>{7, 7});
  CHECK(c.lattice_den == 10);
  CHECK_THROWS(resolve(Potential::cylinder(2, {1.0, 2.0, 3.0}),
                       SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic)));
}

TEST_CASE("birkhoff sums are exact on the lattice") {
  auto sys = SymbolicSystem::full_shift(4, MetricKind::SupWeightedGrid);
  auto pot = resolve(Potential::coordinate_affine(1.0, 0.0), sys);
  Point x = Point::word_then_constant({0, 3, 3, 0}, 0);
  CHECK(birkhoff_sum(sys, pot, x, 4) == 2.0);
  CHECK(birkhoff_sum(sys, pot, x, 0) == 0.0);
  // cocycle identity holds with no tolerance at the lattice level
  CounterRng rng(11, 3);
  std::uint64_t ctr = 0;
  for (int trial = 0; trial < 30; ++trial) {
    Point p = random_point(rng, ctr, 4);
    int n = 1 + static_cast<int>(rng.below(ctr++, 8));
    int m = 1 + static_cast<int>(rng.below(ctr++, 8));
    CHECK(birkhoff_sum_num(sys, pot, p, n + m) ==
          birkhoff_sum_num(sys, pot, p, n) +
              birkhoff_sum_num(sys, pot, p.shifted(static_cast<std::size_t>(n)), m));
  }
}

TEST_CASE("birkhoff sums see cylinder depth past the horizon") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  auto pot = resolve(Potential::cylinder(2, {0.0, 1.0, 2.0, 3.0}), sys);
  Point a = Point::word_then_constant({0}, 1);  // 0111...
  Point b = Point::word_then_constant({0}, 0);  // 0000...
  // same first coordinate, different sums because depth 2 reads ahead
  CHECK(birkhoff_sum(sys, pot, a, 1) == 1.0);
  CHECK(birkhoff_sum(sys, pot, b, 1) == 0.0);
}

TEST_CASE("variation bound shrinks to zero once balls force the read window") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  auto pot = resolve(Potential::coordinate_affine(1.0, 0.0), sys);
  CHECK(variation_bound(sys, pot, 0.25) == 0.0);
  CHECK(variation_bound(sys, pot, 1.0) == 0.0);
  CHECK(variation_bound(sys, pot, 2.0) == 1.0);
  auto deep = resolve(Potential::cylinder(2, {0.0, 1.0, 2.0, 3.0}), sys);
  // d < 1 pins the first coordinate, the second is free
  CHECK(variation_bound(sys, deep, 1.0) == 1.0);
  CHECK(variation_bound(sys, deep, 0.5) == 0.0);   // both coordinates forced
  CHECK(variation_bound(sys, deep, 2.0) == 3.0);   // nothing forced
  auto grid = SymbolicSystem::full_shift(4, MetricKind::SupWeightedGrid);
  auto gp = resolve(Potential::coordinate_affine(1.0, 0.0), grid);
  CHECK(variation_bound(grid, gp, 0.2) == 0.0);    // below the embedding gap
  CHECK(variation_bound(grid, gp, 0.4) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("dynamical balls are cylinders for the ultrametric") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  BowenBallSpec spec;
  spec.center = Point::word_then_constant({0, 1, 0, 1, 1}, 0);
  spec.n = 3;
  spec.eps = 0.25;
  auto ball = dynamical_ball_cylinder(sys, spec);
  CHECK_FALSE(ball.whole_space);
  CHECK(ball.depth_inner == 5);
  CHECK(ball.depth_forced == 5);
  CHECK(ball.exact);
  CHECK(ball.word == Word{0, 1, 0, 1, 1});
}

TEST_CASE("dynamical balls degenerate to the whole space at large scales") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  BowenBallSpec spec;
  spec.center = Point::constant(0);
  spec.n = 4;
  spec.eps = 1.0;
  auto ball = dynamical_ball_cylinder(sys, spec);
  CHECK(ball.whole_space);
  spec.eps = 0.0;
  CHECK_THROWS(dynamical_ball_cylinder(sys, spec));
}

TEST_CASE("dynamical balls on the grid carry an inner and a forced depth") {
  auto sys = SystemFamily::refined_grid().at(0.125);  // k = 8
  BowenBallSpec spec;
  spec.center = Point::constant(0);
  spec.n = 2;
  spec.eps = 0.125;
  auto ball = dynamical_ball_cylinder(sys, spec);
  CHECK_FALSE(ball.whole_space);
  CHECK(ball.depth_inner == 5);   // n-1 + (m+1), m = 3
  CHECK(ball.depth_forced == 2);  // n-1 + 1
  CHECK_FALSE(ball.exact);
  CHECK(static_cast<int>(ball.word.size()) == ball.depth_inner);
}

TEST_CASE("subshift membership rejects forbidden factors") {
  auto golden = SymbolicSystem::sft(2, MetricKind::Ultrametric2adic, {{1, 1}});
  CHECK(Point::periodic({0, 1}).valid_for(golden));
  CHECK(Point::constant(0).valid_for(golden));
  CHECK_FALSE(Point::word_then_constant({0, 1, 1}, 0).valid_for(golden));
  CHECK_FALSE(Point::constant(1).valid_for(golden));  // tail 111... hits 11
  BowenBallSpec spec;
  spec.center = Point::constant(1);
  spec.n = 2;
  spec.eps = 0.25;
  CHECK_THROWS(dynamical_ball_cylinder(golden, spec));
}

TEST_CASE("factor scanning and forbidden-word budgets") {
  auto sys = SymbolicSystem::sft(3, MetricKind::Ultrametric2adic, {{0, 0, 0}, {2, 1}});
  CHECK(sys.max_forbidden_len() == 3);
  Word ok = {0, 0, 1, 2, 2, 0};
  Word bad1 = {1, 0, 0, 0, 2};
  Word bad2 = {0, 2, 1, 0};
  CHECK(sys.factor_allowed(ok));
  CHECK_FALSE(sys.factor_allowed(bad1));
  CHECK_FALSE(sys.factor_allowed(bad2));
  CHECK_THROWS(SymbolicSystem::sft(2, MetricKind::Ultrametric2adic, {{2}}));
  CHECK_THROWS(SymbolicSystem::full_shift(1, MetricKind::Ultrametric2adic));
}

TEST_CASE("gluing gap reflects the transition structure") {
  auto full = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  CHECK(full.has_specification());
  CHECK(full.specification_gap() == 0);

  auto golden = SymbolicSystem::sft(2, MetricKind::Ultrametric2adic, {{1, 1}});
  CHECK(golden.has_specification());
  CHECK(golden.specification_gap() == 1);

  // only alternating sequences survive; period 2 blocks uniform gluing
  auto alt = SymbolicSystem::sft(2, MetricKind::Ultrametric2adic, {{0, 0}, {1, 1}});
  CHECK_FALSE(alt.has_specification());
  CHECK_THROWS(alt.specification_gap());
}

TEST_CASE("refined grid family scales its alphabet with the rung") {
  auto fam = SystemFamily::refined_grid();
  CHECK(fam.at(0.25).alphabet_size == 4);
  CHECK(fam.at(1.0 / 32.0).alphabet_size == 32);
  CHECK(fam.at(0.3).alphabet_size == 4);  // ceil(10/3)
  CHECK_THROWS(fam.at(0.0));
  CHECK_THROWS(fam.at(1.5));
  auto fixed = SystemFamily::fixed(SymbolicSystem::full_shift(3, MetricKind::Ultrametric2adic));
  CHECK(fixed.at(0.1).alphabet_size == 3);
  CHECK(fixed.at(0.01).alphabet_size == 3);
}
