#include "doctest.h"

#include <cmath>
#include <vector>

#include "mdimlab/caratheodory.hpp"

using namespace mdimlab;

namespace {

const double kLog2 = std::log(2.0);

// every depth-L word of a full shift, in index order
std::vector<Word> all_words(int k, int L) {
  std::vector<Word> out;
  std::size_t total = 1;
  for (int i = 0; i < L; ++i) total *= static_cast<std::size_t>(k);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Word w(static_cast<std::size_t>(L));
    std::size_t rem = idx;
    for (int i = L - 1; i >= 0; --i) {
      w[static_cast<std::size_t>(i)] = static_cast<Sym>(rem % static_cast<std::size_t>(k));
      rem /= static_cast<std::size_t>(k);
    }
    out.push_back(std::move(w));
  }
  return out;
}

CoverCandidate uniform_cover(const SymbolicSystem& sys, int n, double eps, const SubsetSpec& Z) {
  int L = n - 1 + sys.ball_agreement_len(eps);
  CoverCandidate cover;
  cover.covered = Z;
  for (const Word& w : all_words(sys.alphabet_size, L))
    cover.balls.push_back({sys.extend_word_to_point(w), n, eps});
  return cover;
}

}  // namespace

TEST_CASE("cover sum closed form on the full shift") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  auto zero = resolve(Potential::zero(), sys);
  double eps = 0.25;  // five symbols pinned per ball of length 3
  CoverCandidate cover = uniform_cover(sys, 3, eps, SubsetSpec::whole());
  CHECK(cover.balls.size() == 32);

  CHECK(cover_sum(sys, zero, cover, 0.0, eps) == doctest::Approx(std::log(32.0)).epsilon(1e-14));
  for (double s : {0.3, 1.0, 2.5})
    CHECK(cover_sum(sys, zero, cover, s, eps) ==
          doctest::Approx(5 * kLog2 - 3 * s).epsilon(1e-13));
}

TEST_CASE("cover sum weights a constant potential by scale and length") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  auto c = resolve(Potential::constant(0.4), sys);
  double eps = 0.25;
  double lambda = std::abs(std::log(eps));

  // one ball whose realized cylinder is exactly the covered cylinder
  Word u = {0, 1, 0, 1, 1};
  CoverCandidate cover;
  cover.covered = SubsetSpec::in_cylinder(u);
  cover.balls.push_back({sys.extend_word_to_point(u), 3, eps});
  for (double s : {0.0, 0.7})
    CHECK(cover_sum(sys, c, cover, s, eps) ==
          doctest::Approx(-s * 3 + lambda * 3 * 0.4).epsilon(1e-13));
}

TEST_CASE("non-covering candidates are rejected with a witness") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  auto zero = resolve(Potential::zero(), sys);
  double eps = 0.25;
  CoverCandidate cover = uniform_cover(sys, 3, eps, SubsetSpec::whole());
  cover.balls.pop_back();  // drop the ball realizing 11111
  CHECK_THROWS_WITH_AS(cover_sum(sys, zero, cover, 0.5, eps),
                       "cover rejected: uncovered cylinder 11111", std::invalid_argument);

  CoverCandidate empty;
  CHECK_THROWS_AS(cover_sum(sys, zero, empty, 0.5, eps), std::invalid_argument);

  CoverCandidate mixed = uniform_cover(sys, 3, eps, SubsetSpec::whole());
  mixed.balls[0].eps = 0.5;
  CHECK_THROWS_AS(cover_sum(sys, zero, mixed, 0.5, eps), std::invalid_argument);
}

TEST_CASE("a deep cylinder cover suffices for a shallow cylinder target") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  auto zero = resolve(Potential::zero(), sys);
  double eps = 0.25;
  // covering [0] needs every depth-5 extension of 0; omitting one fails
  CoverCandidate cover;
  cover.covered = SubsetSpec::in_cylinder({0});
  for (const Word& w : all_words(2, 5))
    if (w[0] == 0) cover.balls.push_back({sys.extend_word_to_point(w), 3, eps});
  CHECK(cover_sum(sys, zero, cover, 0.0, eps) == doctest::Approx(std::log(16.0)).epsilon(1e-14));
  cover.balls.erase(cover.balls.begin());
  CHECK_THROWS_WITH_AS(cover_sum(sys, zero, cover, 0.0, eps),
                       "cover rejected: uncovered cylinder 00000", std::invalid_argument);
}

TEST_CASE("outer measure bracket is tight below the drop on full shifts") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  auto zero = resolve(Potential::zero(), sys);
  double eps = 0.25;

  // below the drop the best uniform cover sits at the minimum length
  // and the tilt certificate meets it exactly
  auto b = outer_measure_m(sys, zero, SubsetSpec::whole(), 0.5, 10, eps);
  CHECK(b.hi == doctest::Approx(12 * kLog2 - 5.0).epsilon(1e-13));
  CHECK(b.lo == doctest::Approx(b.hi).epsilon(1e-13));
  CHECK(b.n_at_hi == 10);
  CHECK(b.lower_certified);
  CHECK(b.provenance == CountProvenance::Exact);

  // above the drop the sums decay toward the window's far edge
  auto z = outer_measure_m(sys, zero, SubsetSpec::whole(), 1.0, 10, eps);
  CHECK(z.n_at_hi == 18);
  CHECK(z.hi == doctest::Approx(20 * kLog2 - 18.0).epsilon(1e-13));
  CHECK_FALSE(z.lower_certified);

  // restricting to a cylinder halves the count and the measure alike
  auto h = outer_measure_m(sys, zero, SubsetSpec::in_cylinder({0}), 0.5, 10, eps);
  CHECK(h.hi == doctest::Approx(11 * kLog2 - 5.0).epsilon(1e-13));
  CHECK(h.lo == doctest::Approx(h.hi).epsilon(1e-13));
}

TEST_CASE("outer measure is monotone in the exponent and the length floor") {
  auto sys = SymbolicSystem::full_shift(3, MetricKind::Ultrametric2adic);
  auto aff = resolve(Potential::coordinate_affine(1.0, 0.0), sys);
  double eps = 0.25;
  double prev_hi = kPosInf, prev_lo = kPosInf;
  for (double s : {0.2, 0.6, 1.0, 1.4, 1.8}) {
    auto b = outer_measure_m(sys, aff, SubsetSpec::whole(), s, 8, eps);
    CHECK(b.hi <= prev_hi + 1e-12);
    CHECK(b.lo <= prev_lo + 1e-12);
    CHECK(b.lo <= b.hi + 1e-12);
    prev_hi = b.hi;
    prev_lo = b.lo;
  }
  // below the drop, raising the floor only raises the certified mass
  auto zero = resolve(Potential::zero(), sys);
  double lo_prev = kNegInf;
  for (int N : {5, 10, 20}) {
    auto b = outer_measure_m(sys, zero, SubsetSpec::whole(), 0.9, N, eps);
    CHECK(b.lo >= lo_prev - 1e-12);
    lo_prev = b.lo;
  }
}

TEST_CASE("single points carry exact outer measure") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  auto zero = resolve(Potential::zero(), sys);
  double eps = 0.25;
  auto Z = SubsetSpec::single_point(Point::constant(0));

  // any positive exponent kills a single point: one ball does it
  auto dead = outer_measure_m(sys, zero, Z, 0.5, 6, eps);
  CHECK(dead.hi == kNegInf);
  CHECK(dead.lo == kNegInf);
  CHECK(dead.provenance == CountProvenance::Exact);

  auto flat = outer_measure_m(sys, zero, Z, 0.0, 6, eps);
  CHECK(flat.hi == 0.0);
  CHECK(flat.lo == 0.0);
  CHECK(flat.provenance == CountProvenance::Exact);

  auto bad = Point::constant(2);
  CHECK_THROWS_AS(outer_measure_m(sys, zero, SubsetSpec::single_point(bad), 0.5, 6, eps),
                  std::invalid_argument);
}

TEST_CASE("critical exponent recovers the growth rate of full shifts") {
  double eps = 0.25;
  double lambda = std::abs(std::log(eps));
  std::vector<int> schedule = {10, 20, 30, 40};

  auto sys2 = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  auto zero2 = resolve(Potential::zero(), sys2);
  auto c2 = critical_exponent(sys2, zero2, SubsetSpec::whole(), eps, schedule);
  CHECK_FALSE(c2.flagged);
  CHECK(c2.s_high - c2.s_low <= 1e-3 * lambda + 1e-12);
  CHECK(std::abs(c2.s_star - kLog2) <= 1e-3);
  CHECK(c2.eps == eps);
  CHECK(c2.n_used == 40);

  auto sys5 = SymbolicSystem::full_shift(5, MetricKind::Ultrametric2adic);
  auto zero5 = resolve(Potential::zero(), sys5);
  auto c5 = critical_exponent(sys5, zero5, SubsetSpec::whole(), eps, schedule);
  CHECK(std::abs(c5.s_star - std::log(5.0)) <= 1e-3);

  // a constant potential shifts the drop by |log eps| times the constant
  auto con = resolve(Potential::constant(0.3), sys2);
  auto cc = critical_exponent(sys2, con, SubsetSpec::whole(), eps, schedule);
  CHECK(std::abs(cc.s_star - (kLog2 + lambda * 0.3)) <= 1.5e-3);
}

TEST_CASE("critical exponent sees subshift growth and subset monotonicity") {
  auto golden = SymbolicSystem::sft(2, MetricKind::Ultrametric2adic, {{1, 1}});
  auto zero = resolve(Potential::zero(), golden);
  double eps = 0.125;
  std::vector<int> schedule = {10, 15, 20, 25};
  double ratio = std::log(0.5 * (1.0 + std::sqrt(5.0)));

  auto whole = critical_exponent(golden, zero, SubsetSpec::whole(), eps, schedule);
  CHECK_FALSE(whole.flagged);
  CHECK(std::abs(whole.s_star - ratio) <= 1e-3 * std::abs(std::log(eps)) + 1e-6);

  auto part = critical_exponent(golden, zero, SubsetSpec::in_cylinder({0}), eps, schedule);
  CHECK(part.s_star <= whole.s_star + (whole.s_high - whole.s_low) + 1e-9);
}

TEST_CASE("critical exponent of a single orbit point follows its average") {
  auto sys = SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic);
  auto zero = resolve(Potential::zero(), sys);
  auto aff = resolve(Potential::coordinate_affine(1.0, 0.0), sys);
  double eps = 0.25;
  double lambda = std::abs(std::log(eps));
  std::vector<int> schedule = {5, 10, 15};

  auto fixed = critical_exponent(sys, zero, SubsetSpec::single_point(Point::constant(0)), eps,
                                 schedule);
  CHECK(std::abs(fixed.s_star) <= 1e-3 * lambda + 1e-12);

  auto alt = critical_exponent(sys, aff, SubsetSpec::single_point(Point::periodic({0, 1})), eps,
                               schedule);
  CHECK(std::abs(alt.s_star - lambda * 0.5) <= 1e-3 * lambda + 1e-12);
}

TEST_CASE("zero-entropy subshifts drop at the potential floor") {
  // two frozen points only: cover counts never grow, so the drop sits
  // exactly where the weights stop paying for themselves
  auto rigid = SymbolicSystem::sft(2, MetricKind::Ultrametric2adic, {{0, 1}, {1, 0}});
  auto zero = resolve(Potential::zero(), rigid);
  double eps = 0.25;
  double lambda = std::abs(std::log(eps));
  std::vector<int> schedule = {5, 10, 15, 20};
  auto c = critical_exponent(rigid, zero, SubsetSpec::whole(), eps, schedule);
  CHECK_FALSE(c.flagged);
  CHECK(std::abs(c.s_star) <= 1e-3 * lambda + 1e-12);

  auto lifted = resolve(Potential::constant(0.4), rigid);
  auto cl = critical_exponent(rigid, lifted, SubsetSpec::whole(), eps, schedule);
  CHECK(std::abs(cl.s_star - lambda * 0.4) <= 1e-3 * lambda + 1e-12);
}

TEST_CASE("dimension ladder from critical exponents matches capacity") {
  // fixed alphabet: dimension zero, rungs pinned near log2 / |log eps|
  std::vector<MdimRungSpec> fixed_ladder;
  for (int m = 2; m <= 5; ++m)
    fixed_ladder.push_back({std::ldexp(1.0, -m), {15, 30, 45, 60}});
  auto fixed = bowen_mdim(SystemFamily::fixed(SymbolicSystem::full_shift(2, MetricKind::Ultrametric2adic)),
                          PotentialRule::zero(), SubsetSpec::whole(), fixed_ladder);
  CHECK_FALSE(fixed.flagged);
  REQUIRE(fixed.rungs.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    double m = double(i) + 2.0;
    CHECK(std::abs(fixed.rungs[i].s_star - kLog2) <= 1e-3 * m * kLog2 + 1e-12);
    CHECK(fixed.dim_points[i] == doctest::Approx(1.0 / m).epsilon(2e-3));
  }
  CHECK(std::abs(fixed.fit_value) <= 0.02);
  // the counting capacity carries a depth-offset intercept the exponent
  // route does not; the gap must point below it and stay small
  CHECK(fixed.capacity_gap <= 1e-9);
  CHECK(std::abs(fixed.capacity_gap) <= 0.03);

  // refined grid: full dimension, every rung's exponent is m log2
  std::vector<MdimRungSpec> grid_ladder;
  for (int m = 2; m <= 5; ++m)
    grid_ladder.push_back({std::ldexp(1.0, -m), {12 * m, 24 * m, 36 * m, 48 * m}});
  auto grid = bowen_mdim(SystemFamily::refined_grid(), PotentialRule::zero(), SubsetSpec::whole(),
                         grid_ladder);
  CHECK_FALSE(grid.flagged);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(grid.dim_points[i] == doctest::Approx(1.0).epsilon(2e-3));
  CHECK(std::abs(grid.fit_value - 1.0) <= 0.01);
  CHECK(std::abs(grid.capacity_gap) <= 0.05);
  CHECK(std::abs(grid.value() - grid.capacity.value()) <= 0.05);
}
