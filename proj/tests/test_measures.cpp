#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "mdimlab/measures.hpp"

using namespace mdimlab;

namespace {

const double kLog2 = std::log(2.0);

double h_bernoulli(double q) { return -q * std::log(q) - (1 - q) * std::log(1 - q); }

// All depth-D cylinder masses straight from the model, no level tricks.
std::vector<double> brute_masses(const MeasureModel& mu, int depth) {
  int k = mu.alphabet_size();
  std::size_t total = 1;
  for (int i = 0; i < depth; ++i) total *= static_cast<std::size_t>(k);
  std::vector<double> masses;
  Word w(static_cast<std::size_t>(depth), 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t t = idx;
    for (int i = depth - 1; i >= 0; --i) {
      w[static_cast<std::size_t>(i)] = static_cast<Sym>(t % static_cast<std::size_t>(k));
      t /= static_cast<std::size_t>(k);
    }
    double lm = mu.log_cylinder_mass(w);
    if (lm > kNegInf) masses.push_back(lm);
  }
  std::sort(masses.begin(), masses.end(), std::greater<>());
  return masses;
}

double brute_threshold_logcount(const std::vector<double>& masses, double tau) {
  long long n = 0;
  for (double lm : masses)
    if (lm >= tau) ++n;
  return n > 0 ? std::log(static_cast<double>(n)) : kNegInf;
}

double brute_minimal_logcount(const std::vector<double>& masses, double target) {
  double cum = 0.0;
  long long n = 0;
  for (double lm : masses) {
    cum += std::exp(lm);
    ++n;
    if (cum >= target) return std::log(static_cast<double>(n));
  }
  return std::log(static_cast<double>(n));
}

// Midpoints of the widest gaps between distinct mass levels; thresholds
// there are insensitive to both float noise and level quantization.
std::vector<double> safe_thresholds(const std::vector<double>& masses, double min_gap,
                                    std::size_t max_count) {
  std::vector<std::pair<double, double>> gaps;  // width, midpoint
  for (std::size_t i = 1; i < masses.size(); ++i) {
    double g = masses[i - 1] - masses[i];
    if (g > min_gap) gaps.emplace_back(g, 0.5 * (masses[i - 1] + masses[i]));
  }
  std::sort(gaps.begin(), gaps.end(), std::greater<>());
  if (gaps.size() > max_count) gaps.resize(max_count);
  std::vector<double> taus;
  for (auto& [g, mid] : gaps) taus.push_back(mid);
  return taus;
}

MeasureModel golden_markov() {
  return MeasureModel::markov({{0.5, 0.5}, {1.0, 0.0}}, {2.0 / 3.0, 1.0 / 3.0});
}

}  // namespace

TEST_CASE("measure models validate their invariants") {
  CHECK_THROWS_AS((void)MeasureModel::bernoulli({0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS((void)MeasureModel::bernoulli({0.7, -0.3, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS((void)MeasureModel::bernoulli({}), std::invalid_argument);

  CHECK_THROWS_AS((void)MeasureModel::markov({{0.5, 0.5}, {1.0, 0.0}}, {0.5, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)MeasureModel::markov({{0.5, 0.4}, {1.0, 0.0}}, {2.0 / 3.0, 1.0 / 3.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)MeasureModel::markov({{0.5, 0.5}}, {2.0 / 3.0, 1.0 / 3.0}),
                  std::invalid_argument);
  CHECK(golden_markov().alphabet_size() == 2);

  auto u2 = MeasureModel::bernoulli({0.5, 0.5});
  auto u3 = MeasureModel::bernoulli({1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK_THROWS_AS((void)MeasureModel::mixture({0.5, 0.4}, {u2, u2}), std::invalid_argument);
  CHECK_THROWS_AS((void)MeasureModel::mixture({0.5, 0.5}, {u2, u3}), std::invalid_argument);
  CHECK_THROWS_AS((void)MeasureModel::mixture({1.0}, {MeasureModel::mixture({1.0}, {u2})}),
                  std::invalid_argument);
  CHECK(MeasureModel::mixture({0.5, 0.5}, {u2, u2}).alphabet_size() == 2);

  CHECK_THROWS_AS((void)MeasureModel::empirical({}, 4), std::invalid_argument);
  CHECK_THROWS_AS((void)MeasureModel::empirical({Point::constant(0)}, 0), std::invalid_argument);
  CHECK(MeasureModel::empirical({Point::periodic({0, 1, 2})}, 9).alphabet_size() == 3);
}

TEST_CASE("cylinder masses are exact") {
  auto b = MeasureModel::bernoulli({0.25, 0.75});
  CHECK(b.log_cylinder_mass({0, 1, 1}) ==
        doctest::Approx(std::log(0.25 * 0.75 * 0.75)).epsilon(1e-14));
  CHECK(b.log_cylinder_mass({}) == 0.0);

  auto m = golden_markov();
  CHECK(m.log_cylinder_mass({0, 1, 0}) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
  CHECK(m.log_cylinder_mass({1, 1}) == kNegInf);

  auto d0 = MeasureModel::bernoulli({1.0, 0.0});
  auto d1 = MeasureModel::bernoulli({0.0, 1.0});
  auto mix = MeasureModel::mixture({0.5, 0.5}, {d0, d1});
  CHECK(mix.log_cylinder_mass({0, 0}) == doctest::Approx(std::log(0.5)).epsilon(1e-14));
  CHECK(mix.log_cylinder_mass({0, 1}) == kNegInf);

  auto emp = MeasureModel::empirical({Point::periodic({0, 1}), Point::constant(1)}, 4);
  // factors of length 2: 0101 gives 01,10,01; 1111 gives 11,11,11
  CHECK(emp.log_cylinder_mass({0, 1}) == doctest::Approx(std::log(2.0 / 6.0)).epsilon(1e-14));
  CHECK(emp.log_cylinder_mass({0, 0}) == kNegInf);
  CHECK_THROWS_AS((void)emp.log_cylinder_mass({0, 1, 0, 1, 0}), std::invalid_argument);
}

TEST_CASE("cylinder partitions respect the diameter bound") {
  auto xi = PartitionSpec::cylinders(3, 0.25);
  CHECK(xi.cylinder_depth == 3);
  CHECK_THROWS_AS((void)PartitionSpec::cylinders(2, 0.25), std::invalid_argument);
  CHECK_THROWS_AS((void)PartitionSpec::cylinders(0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS((void)PartitionSpec::cylinders(3, 0.0), std::invalid_argument);
}

TEST_CASE("partition entropy closed forms") {
  auto xi1 = PartitionSpec::cylinders(1, 1.0);
  auto xi2 = PartitionSpec::cylinders(2, 1.0);
  auto xi3 = PartitionSpec::cylinders(3, 1.0);

  CHECK(partition_entropy(MeasureModel::bernoulli({0.5, 0.5}), xi1) ==
        doctest::Approx(kLog2).epsilon(1e-14));
  CHECK(partition_entropy(MeasureModel::bernoulli({0.3, 0.7}), xi2) ==
        doctest::Approx(2 * h_bernoulli(0.3)).epsilon(1e-14));
  CHECK(partition_entropy(MeasureModel::bernoulli({1.0, 0.0}), xi3) == 0.0);

  // two-step identity: pair entropy = start entropy + one transition
  auto m = golden_markov();
  double start = -(2.0 / 3.0) * std::log(2.0 / 3.0) - (1.0 / 3.0) * std::log(1.0 / 3.0);
  CHECK(partition_entropy(m, xi2) ==
        doctest::Approx(start + (2.0 / 3.0) * kLog2).epsilon(1e-12));
  CHECK(partition_entropy(m, xi2) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  auto emp = MeasureModel::empirical({Point::periodic({0, 1})}, 8);
  CHECK_THROWS_AS((void)partition_entropy(emp, xi2), std::invalid_argument);
}

TEST_CASE("entropy rate closed forms are depth independent") {
  auto u = MeasureModel::bernoulli({0.5, 0.5});
  auto m = golden_markov();
  for (int r : {1, 2, 3}) {
    auto xi = PartitionSpec::cylinders(r, 1.0);
    CHECK(dynamical_entropy(u, xi) == doctest::Approx(kLog2).epsilon(1e-14));
    CHECK(dynamical_entropy(m, xi) == doctest::Approx((2.0 / 3.0) * kLog2).epsilon(1e-14));
  }

  auto xi = PartitionSpec::cylinders(2, 1.0);
  auto identity = MeasureModel::markov({{1.0, 0.0}, {0.0, 1.0}}, {0.5, 0.5});
  CHECK(dynamical_entropy(identity, xi) == 0.0);

  auto mix = MeasureModel::mixture({0.25, 0.75}, {u, m});
  CHECK(dynamical_entropy(mix, xi) ==
        doctest::Approx(0.25 * kLog2 + 0.75 * (2.0 / 3.0) * kLog2).epsilon(1e-14));

  auto points = MeasureModel::mixture(
      {0.5, 0.5}, {MeasureModel::bernoulli({1.0, 0.0}), MeasureModel::bernoulli({0.0, 1.0})});
  CHECK(dynamical_entropy(points, xi) == 0.0);

  // deterministic orbit: conditioning kills the block entropy
  auto emp = MeasureModel::empirical({Point::periodic({0, 1})}, 32);
  CHECK(std::abs(dynamical_entropy(emp, xi)) <= 0.02);
}

TEST_CASE("covering counts match brute enumeration") {
  SUBCASE("two-symbol levels are exact") {
    auto mu = MeasureModel::bernoulli({0.3, 0.7});
    auto masses = brute_masses(mu, 10);
    for (double tau : safe_thresholds(masses, 0.02, 4))
      CHECK(log_covering_count(mu, 10, tau) ==
            doctest::Approx(brute_threshold_logcount(masses, tau)).epsilon(1e-9));
    for (double target : {0.5, 0.75, 0.9})
      CHECK(log_minimal_covering_count(mu, 10, target) ==
            doctest::Approx(brute_minimal_logcount(masses, target)).epsilon(1e-6));
  }

  SUBCASE("three-symbol histogram walk") {
    auto mu = MeasureModel::bernoulli({0.2, 0.3, 0.5});
    auto masses = brute_masses(mu, 7);
    for (double tau : safe_thresholds(masses, 0.05, 3))
      CHECK(log_covering_count(mu, 7, tau) ==
            doctest::Approx(brute_threshold_logcount(masses, tau)).epsilon(1e-9));
    for (double target : {0.75, 0.9})
      CHECK(log_minimal_covering_count(mu, 7, target) ==
            doctest::Approx(brute_minimal_logcount(masses, target)).epsilon(0.02));
  }

  SUBCASE("markov state walk, sparse levels") {
    auto mu = golden_markov();
    auto masses = brute_masses(mu, 10);
    for (double tau : safe_thresholds(masses, 0.05, 3))
      CHECK(log_covering_count(mu, 10, tau) ==
            doctest::Approx(brute_threshold_logcount(masses, tau)).epsilon(1e-9));
    for (double target : {0.75, 0.9})
      CHECK(log_minimal_covering_count(mu, 10, target) ==
            doctest::Approx(brute_minimal_logcount(masses, target)).epsilon(0.02));
  }

  SUBCASE("markov state walk, dense levels") {
    auto mu = MeasureModel::markov({{0.7, 0.3}, {0.4, 0.6}}, {4.0 / 7.0, 3.0 / 7.0});
    auto masses = brute_masses(mu, 9);
    for (double tau : safe_thresholds(masses, 0.05, 3))
      CHECK(log_covering_count(mu, 9, tau) ==
            doctest::Approx(brute_threshold_logcount(masses, tau)).epsilon(1e-9));
    // dense levels leave the boundary stratum ambiguous up to the
    // quantization grid, so the greedy count carries a wider band
    for (double target : {0.75, 0.9})
      CHECK(log_minimal_covering_count(mu, 9, target) ==
            doctest::Approx(brute_minimal_logcount(masses, target)).epsilon(0.1));
  }

  SUBCASE("uniform single level") {
    auto mu = MeasureModel::bernoulli({0.25, 0.25, 0.25, 0.25});
    CHECK(log_covering_count(mu, 6, 6 * std::log(0.25) - 0.01) ==
          doctest::Approx(6 * std::log(4.0)).epsilon(1e-12));
    CHECK(log_covering_count(mu, 6, 6 * std::log(0.25) + 0.01) == kNegInf);
    CHECK(log_minimal_covering_count(mu, 6, 0.9) ==
          doctest::Approx(std::log(std::ceil(0.9 * 4096.0))).epsilon(1e-12));
  }

  SUBCASE("empirical frequency levels") {
    auto mu = MeasureModel::empirical({Point::periodic({0, 0, 1})}, 30);
    // starts 0..27 hit 001,010,100 with multiplicities 10,9,9
    CHECK(log_covering_count(mu, 3, std::log(9.5 / 28.0)) == doctest::Approx(0.0));
    CHECK(log_covering_count(mu, 3, std::log(8.5 / 28.0)) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(log_minimal_covering_count(mu, 3, 0.75) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }

  SUBCASE("mixtures and bad arguments are rejected") {
    auto mix = MeasureModel::mixture(
        {0.5, 0.5}, {MeasureModel::bernoulli({0.5, 0.5}), MeasureModel::bernoulli({0.3, 0.7})});
    CHECK_THROWS_AS((void)log_covering_count(mix, 4, -1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)log_minimal_covering_count(mix, 4, 0.9), std::invalid_argument);
    auto u = MeasureModel::bernoulli({0.5, 0.5});
    CHECK_THROWS_AS((void)log_minimal_covering_count(u, 4, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)log_minimal_covering_count(u, 0, 0.9), std::invalid_argument);
  }
}

TEST_CASE("covering entropy rate hits closed forms") {
  const std::array<int, 3> ladder{10, 20, 30};

  SUBCASE("uniform measures are exactly linear") {
    const std::array<int, 3> deep{16, 24, 32};
    auto est = katok_entropy(MeasureModel::bernoulli({0.5, 0.5}), 0.25, 0.1, deep, 1000, 7);
    // counts are whole cylinders, so the slope is log 2 only up to the
    // rounding of 0.9 * 2^depth at the smallest horizon
    CHECK(est.rate == doctest::Approx(kLog2).epsilon(1e-6));
    REQUIRE(est.log_counts.size() == 3);
    for (std::size_t j = 0; j < 3; ++j) {
      // scale 1/4 adds two symbols of depth per horizon
      double expect = std::log(std::ceil(0.9 * std::ldexp(1.0, deep[j] + 2)));
      CHECK(est.log_counts[j] == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  SUBCASE("point mass has rate zero") {
    auto est = katok_entropy(MeasureModel::bernoulli({1.0, 0.0}), 0.25, 0.1, ladder, 1000, 7);
    CHECK(std::abs(est.rate) <= 1e-12);
  }

  SUBCASE("skewed coin lands within five percent on a dense ladder") {
    // sparse ladders can catch a single ramp of the stratum wobble, so
    // rate quality is only promised for ladders spanning several strata
    std::vector<int> dense;
    for (int n = 10; n <= 30; n += 2) dense.push_back(n);
    auto est = katok_entropy(MeasureModel::bernoulli({0.9, 0.1}), 0.25, 0.1, dense, 10000, 1);
    CHECK(std::abs(est.rate - h_bernoulli(0.9)) <= 0.05 * h_bernoulli(0.9));
  }

  SUBCASE("markov chain lands within ten percent") {
    const std::array<int, 3> ns{8, 12, 16};
    auto est = katok_entropy(golden_markov(), 0.25, 0.1, ns, 4000, 11);
    double h = (2.0 / 3.0) * kLog2;
    CHECK(std::abs(est.rate - h) <= 0.1 * h);
  }

  SUBCASE("mixtures average their components") {
    auto mix = MeasureModel::mixture(
        {0.5, 0.5}, {MeasureModel::bernoulli({0.5, 0.5}), MeasureModel::bernoulli({1.0, 0.0})});
    const std::array<int, 3> deep{16, 24, 32};
    auto est = katok_entropy(mix, 0.25, 0.1, deep, 1000, 7);
    CHECK(est.rate == doctest::Approx(0.5 * kLog2).epsilon(1e-6));
    CHECK(est.log_counts.empty());
  }

  SUBCASE("deterministic orbit sample has rate near zero") {
    auto emp = MeasureModel::empirical({Point::periodic({0, 1})}, 80);
    const std::array<int, 2> ns{6, 10};
    auto est = katok_entropy(emp, 0.25, 0.1, ns, 500, 3);
    CHECK(std::abs(est.rate) <= 0.05);
  }

  SUBCASE("estimates are reproducible from the seed") {
    auto mu = MeasureModel::bernoulli({0.9, 0.1});
    auto a = katok_entropy(mu, 0.25, 0.1, ladder, 2000, 42);
    auto b = katok_entropy(mu, 0.25, 0.1, ladder, 2000, 42);
    CHECK(a.rate == b.rate);
    CHECK(a.log_counts == b.log_counts);
  }

  SUBCASE("worker count cannot change any byte") {
    auto mu = MeasureModel::bernoulli({0.9, 0.1});
    set_worker_count(1);
    auto a = katok_entropy(mu, 0.25, 0.1, ladder, 2000, 42);
    set_worker_count(4);
    auto b = katok_entropy(mu, 0.25, 0.1, ladder, 2000, 42);
    set_worker_count(1);
    CHECK(a.rate == b.rate);
  }

  SUBCASE("defect and scale barely move the rate") {
    auto mu = MeasureModel::bernoulli({0.8, 0.2});
    auto r1 = katok_entropy(mu, 0.25, 0.1, ladder, 4000, 5).rate;
    auto r2 = katok_entropy(mu, 0.25, 0.3, ladder, 4000, 5).rate;
    auto r3 = katok_entropy(mu, 0.125, 0.1, ladder, 4000, 5).rate;
    CHECK(std::abs(r1 - r2) <= 0.05);
    CHECK(r2 <= r1 + 0.02);  // larger defect never needs more covering
    CHECK(std::abs(r1 - r3) <= 0.05);
    CHECK(r1 <= r3 + 0.02);  // coarser scale never needs more covering
  }

  SUBCASE("refusals and bad ladders") {
    auto mu = MeasureModel::bernoulli({0.5, 0.5});
    CHECK_THROWS_AS((void)katok_entropy(mu, 0.25, 0.1, ladder, 50, 1), std::invalid_argument);
    const std::array<int, 1> single{10};
    CHECK_THROWS_AS((void)katok_entropy(mu, 0.25, 0.1, single, 1000, 1), std::invalid_argument);
    const std::array<int, 2> flat{10, 10};
    CHECK_THROWS_AS((void)katok_entropy(mu, 0.25, 0.1, flat, 1000, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)katok_entropy(mu, 1.5, 0.1, ladder, 1000, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)katok_entropy(mu, 0.25, 0.0, ladder, 1000, 1), std::invalid_argument);
    auto emp = MeasureModel::empirical({Point::periodic({0, 1})}, 20);
    CHECK_THROWS_AS((void)katok_entropy(emp, 0.25, 0.1, ladder, 1000, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("scale-normalized covering entropy over families") {
  const std::array<double, 4> scales{0.25, 0.125, 0.0625, 0.03125};
  auto limit = MeasureModel::bernoulli({0.5, 0.5});

  SUBCASE("refining uniform family attains one") {
    double v = H_delta_K(limit, 0.1, scales, MeasureFamily::refined_grid_uniform(), 2000, 1);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
    double w = H_delta_K(limit, 0.3, scales, MeasureFamily::refined_grid_uniform(), 2000, 1);
    CHECK(std::abs(v - w) <= 1e-9);  // defect-insensitive
  }

  SUBCASE("constant family decays with the scale") {
    double v = H_delta_K(limit, 0.1, scales, MeasureFamily::constant(), 2000, 1);
    CHECK(v == doctest::Approx(kLog2 / std::log(16.0)).epsilon(1e-6));
    const std::array<double, 2> coarse{0.25, 0.125};
    double w = H_delta_K(limit, 0.1, coarse, MeasureFamily::constant(), 2000, 1);
    CHECK(v < w);
  }

  SUBCASE("bad ladders and sample floors propagate") {
    const std::array<double, 2> rising{0.125, 0.25};
    CHECK_THROWS_AS((void)H_delta_K(limit, 0.1, rising, MeasureFamily::constant(), 2000, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)H_delta_K(limit, 0.1, scales, MeasureFamily::constant(), 20, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("scale-normalized partition entropy over families") {
  const std::array<double, 4> scales{0.25, 0.125, 0.0625, 0.03125};
  auto limit = MeasureModel::bernoulli({0.5, 0.5});

  CHECK(H_of_mu(limit, scales, MeasureFamily::refined_grid_uniform()) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(H_of_mu(limit, scales, MeasureFamily::constant()) ==
        doctest::Approx(kLog2 / std::log(16.0)).epsilon(1e-12));

  SUBCASE("the two routes agree where the sup is attained") {
    auto skew = MeasureModel::bernoulli({0.7, 0.3});
    double hK = H_delta_K(skew, 0.1, scales, MeasureFamily::constant(), 4000, 3);
    double hP = H_of_mu(skew, scales, MeasureFamily::constant());
    CHECK(hK <= hP + 0.02);
    double rK = H_delta_K(skew, 0.1, scales, MeasureFamily::refined_grid_uniform(), 2000, 3);
    double rP = H_of_mu(skew, scales, MeasureFamily::refined_grid_uniform());
    CHECK(rK <= rP + 0.02);
    const std::array<double, 4> quarter{0.0625, 0.03125, 0.015625, 0.0078125};
    double rQ = H_delta_K(skew, 0.1, quarter, MeasureFamily::refined_grid_uniform(), 2000, 3);
    CHECK(rP <= rQ + 0.05);
  }
}

TEST_CASE("covering and partition entropies sandwich each other") {
  // unnormalized: the covering rate at scale eps sits below the finest
  // sub-eps partition rate, which in turn is recovered at scale eps/4
  for (double q : {0.7, 0.9}) {
    auto mu = MeasureModel::bernoulli({q, 1 - q});
    double h = dynamical_entropy(mu, PartitionSpec::cylinders(3, 0.25));
    const std::array<int, 3> ladder{10, 20, 30};
    double at_eps = katok_entropy(mu, 0.25, 0.1, ladder, 6000, 5).rate;
    double at_quarter = katok_entropy(mu, 0.0625, 0.1, ladder, 6000, 5).rate;
    CHECK(at_eps <= h + 0.02);
    CHECK(h <= at_quarter + 0.05);
  }
}
