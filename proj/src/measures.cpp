#include "mdimlab/measures.hpp"

#include "mdimlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace mdimlab {

namespace {

constexpr double kSumTol = 1e-12;

// Level walks quantize per-step log-probabilities to this grid. Counts
// are exact for the quantized masses; a true mass can land on the wrong
// side of a threshold only if it sits within depth * width / 2 of it.
constexpr double kLevelWidth = 1e-3;
constexpr std::size_t kLevelGuard = std::size_t{1} << 21;

constexpr std::uint64_t kComponentSeedStride = 1000003;

// log of the standard normal upper tail; asymptotic branch before erfc
// underflows.
double log_gauss_upper(double x) {
  if (x < 34.0) return std::log(0.5 * std::erfc(x / std::sqrt(2.0)));
  return -0.5 * x * x - std::log(x) - 0.5 * std::log(2.0 * 3.14159265358979323846);
}

// Depth at which cylinders fall strictly below eps: one past the last
// j with 2^-j >= eps. The dyadic scale convention used by the covering
// machinery; covering families carry depth - 1 extra symbols per
// horizon.
int scale_depth(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("scale must lie in (0,1)");
  int a = 0;
  for (double g = 1.0; g >= eps; g *= 0.5) ++a;
  return a;
}

double xlogx(double m) { return m > 0.0 ? m * std::log(m) : 0.0; }

// log(e^la - e^lb) for la >= lb; clamps to -inf at equality.
double log_diff(double la, double lb) {
  if (lb >= la) return kNegInf;
  if (lb == kNegInf) return la;
  return la + std::log1p(-std::exp(lb - la));
}

void check_distribution(std::span<const double> p, const char* what) {
  if (p.empty()) throw std::invalid_argument(std::string(what) + " is empty");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw std::invalid_argument(std::string(what) + " has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSumTol)
    throw std::invalid_argument(std::string(what) + " does not sum to 1");
}

// Distinct depth-r factors of the sample with multiplicities, one count
// per start position in [0, sample_len - r] of every sampled point.
std::map<Word, long long> factor_counts(const MeasureModel& mu, int r) {
  if (r < 1) throw std::invalid_argument("factor depth must be positive");
  if (r > mu.sample_len)
    throw std::invalid_argument("factor depth exceeds the sampled word length");
  std::map<Word, long long> counts;
  for (const Point& x : mu.sample) {
    Word w = x.first(static_cast<std::size_t>(mu.sample_len));
    for (int s = 0; s + r <= mu.sample_len; ++s)
      ++counts[Word(w.begin() + s, w.begin() + s + r)];
  }
  return counts;
}

double empirical_block_entropy(const MeasureModel& mu, int r) {
  auto counts = factor_counts(mu, r);
  double total = 0.0;
  for (const auto& [w, c] : counts) total += static_cast<double>(c);
  double h = 0.0;
  for (const auto& [w, c] : counts) h -= xlogx(static_cast<double>(c) / total);
  return h;
}

bool all_symbols_equal(std::span<const double> p) {
  auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  return *hi - *lo <= 1e-15;
}

double log_binomial(int n, int c) {
  return std::lgamma(n + 1.0) - std::lgamma(c + 1.0) - std::lgamma(n - c + 1.0);
}

long long quantize_step(double log_p) { return std::llround(log_p / kLevelWidth); }

// One stratum of the mass distribution over depth-r cylinders: every
// cylinder in it has (quantized) log-mass `log_mass`, and there are
// exp(log_count) of them.
struct MassLevel {
  double log_mass = 0.0;
  double log_count = 0.0;
};

void sort_levels_descending(std::vector<MassLevel>& levels) {
  std::sort(levels.begin(), levels.end(),
            [](const MassLevel& a, const MassLevel& b) { return a.log_mass > b.log_mass; });
}

std::vector<MassLevel> binomial_levels(std::span<const double> p, int depth) {
  double lp0 = p[0] > 0.0 ? std::log(p[0]) : kNegInf;
  double lp1 = p[1] > 0.0 ? std::log(p[1]) : kNegInf;
  std::vector<MassLevel> levels;
  for (int c = 0; c <= depth; ++c) {
    double lm = 0.0;
    if (c > 0) lm += c * lp1;
    if (depth - c > 0) lm += (depth - c) * lp0;
    if (lm > kNegInf) levels.push_back({lm, log_binomial(depth, c)});
  }
  return levels;
}

// Sparse histogram over quantized log-mass levels; ordered keys keep
// the accumulation order canonical.
std::vector<MassLevel> bernoulli_histogram_levels(std::span<const double> p, int depth) {
  std::vector<long long> steps;
  for (double v : p)
    if (v > 0.0) steps.push_back(quantize_step(std::log(v)));
  std::map<long long, double> hist{{0, 0.0}};
  for (int i = 0; i < depth; ++i) {
    std::map<long long, double> next;
    for (const auto& [lvl, lc] : hist)
      for (long long s : steps) {
        auto [it, fresh] = next.try_emplace(lvl + s, lc);
        if (!fresh) it->second = log_add(it->second, lc);
      }
    if (next.size() > kLevelGuard)
      throw std::runtime_error("level walk exceeded the histogram guard");
    hist = std::move(next);
  }
  std::vector<MassLevel> levels;
  levels.reserve(hist.size());
  for (const auto& [lvl, lc] : hist)
    levels.push_back({static_cast<double>(lvl) * kLevelWidth, lc});
  return levels;
}

std::vector<MassLevel> markov_histogram_levels(const MeasureModel& mu, int depth) {
  int k = static_cast<int>(mu.pi.size());
  std::map<std::pair<long long, int>, double> hist;
  for (int a = 0; a < k; ++a)
    if (mu.pi[a] > 0.0) hist.emplace(std::pair{quantize_step(std::log(mu.pi[a])), a}, 0.0);
  for (int i = 1; i < depth; ++i) {
    std::map<std::pair<long long, int>, double> next;
    for (const auto& [key, lc] : hist) {
      auto [lvl, a] = key;
      for (int b = 0; b < k; ++b) {
        double t = mu.rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        if (t <= 0.0) continue;
        auto [it, fresh] = next.try_emplace(std::pair{lvl + quantize_step(std::log(t)), b}, lc);
        if (!fresh) it->second = log_add(it->second, lc);
      }
    }
    if (next.size() > kLevelGuard)
      throw std::runtime_error("level walk exceeded the histogram guard");
    hist = std::move(next);
  }
  std::map<long long, double> collapsed;
  for (const auto& [key, lc] : hist) {
    auto [it, fresh] = collapsed.try_emplace(key.first, lc);
    if (!fresh) it->second = log_add(it->second, lc);
  }
  std::vector<MassLevel> levels;
  levels.reserve(collapsed.size());
  for (const auto& [lvl, lc] : collapsed)
    levels.push_back({static_cast<double>(lvl) * kLevelWidth, lc});
  return levels;
}

std::vector<MassLevel> empirical_levels(const MeasureModel& mu, int depth) {
  auto counts = factor_counts(mu, depth);
  double total = 0.0;
  for (const auto& [w, c] : counts) total += static_cast<double>(c);
  std::map<long long, long long> by_multiplicity;
  for (const auto& [w, c] : counts) ++by_multiplicity[c];
  std::vector<MassLevel> levels;
  levels.reserve(by_multiplicity.size());
  for (const auto& [c, n] : by_multiplicity)
    levels.push_back({std::log(static_cast<double>(c)) - std::log(total),
                      std::log(static_cast<double>(n))});
  return levels;
}

// Mass strata of depth-r cylinders, heaviest first. Exact levels for
// uniform, two-symbol and empirical models; quantized histograms
// otherwise.
std::vector<MassLevel> mass_levels(const MeasureModel& mu, int depth) {
  std::vector<MassLevel> levels;
  switch (mu.kind) {
    case MeasureModel::Kind::Bernoulli:
      if (all_symbols_equal(mu.p))
        levels.push_back({depth * std::log(mu.p[0]),
                          depth * std::log(static_cast<double>(mu.p.size()))});
      else if (mu.p.size() == 2)
        levels = binomial_levels(mu.p, depth);
      else
        levels = bernoulli_histogram_levels(mu.p, depth);
      break;
    case MeasureModel::Kind::Markov:
      levels = markov_histogram_levels(mu, depth);
      break;
    case MeasureModel::Kind::Mixture:
      throw std::invalid_argument("mixture covering counts are estimated per component");
    case MeasureModel::Kind::Empirical:
      levels = empirical_levels(mu, depth);
      break;
  }
  sort_levels_descending(levels);
  return levels;
}

// Sample index above bit 16, position within the word in the low 16;
// each ladder rung draws from its own substream. Every draw is a pure
// function of (seed, rung, counter), so chunking over samples cannot
// change any byte.
std::uint64_t counter_at(std::size_t sample, int pos) {
  return (static_cast<std::uint64_t>(sample) << 16) | static_cast<std::uint64_t>(pos & 0xFFFF);
}

int pick_from_cdf(std::span<const double> dist, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    acc += dist[i];
    if (u < acc) return static_cast<int>(i);
  }
  // rounding shortfall at the top of the cdf
  for (int i = static_cast<int>(dist.size()) - 1; i >= 0; --i)
    if (dist[i] > 0.0) return i;
  return 0;
}

}  // namespace

MeasureModel MeasureModel::bernoulli(std::vector<double> p) {
  MeasureModel m;
  m.kind = Kind::Bernoulli;
  m.p = std::move(p);
  m.validate();
  return m;
}

MeasureModel MeasureModel::markov(std::vector<std::vector<double>> rows, std::vector<double> pi) {
  MeasureModel m;
  m.kind = Kind::Markov;
  m.rows = std::move(rows);
  m.pi = std::move(pi);
  m.validate();
  return m;
}

MeasureModel MeasureModel::mixture(std::vector<double> weights,
                                   std::vector<MeasureModel> components) {
  MeasureModel m;
  m.kind = Kind::Mixture;
  m.weights = std::move(weights);
  m.components = std::move(components);
  m.validate();
  return m;
}

MeasureModel MeasureModel::empirical(std::vector<Point> sample, int sample_len) {
  MeasureModel m;
  m.kind = Kind::Empirical;
  m.sample = std::move(sample);
  m.sample_len = sample_len;
  m.validate();
  return m;
}

int MeasureModel::alphabet_size() const {
  switch (kind) {
    case Kind::Bernoulli:
      return static_cast<int>(p.size());
    case Kind::Markov:
      return static_cast<int>(pi.size());
    case Kind::Mixture:
      return components.empty() ? 0 : components.front().alphabet_size();
    case Kind::Empirical: {
      int k = 1;
      for (const Point& x : sample)
        for (Sym s : x.first(static_cast<std::size_t>(sample_len)))
          k = std::max(k, static_cast<int>(s) + 1);
      return k;
    }
  }
  throw std::logic_error("unknown measure kind");
}

void MeasureModel::validate() const {
  switch (kind) {
    case Kind::Bernoulli:
      check_distribution(p, "symbol distribution");
      return;
    case Kind::Markov: {
      check_distribution(pi, "stationary vector");
      std::size_t k = pi.size();
      if (rows.size() != k)
        throw std::invalid_argument("transition matrix does not match the alphabet");
      for (const auto& row : rows) {
        if (row.size() != k)
          throw std::invalid_argument("transition matrix does not match the alphabet");
        check_distribution(row, "transition row");
      }
      for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += pi[i] * rows[i][j];
        if (std::abs(s - pi[j]) > kSumTol)
          throw std::invalid_argument("stationary vector is not stationary");
      }
      return;
    }
    case Kind::Mixture: {
      if (weights.empty() || weights.size() != components.size())
        throw std::invalid_argument("mixture weights and components do not match");
      double sum = 0.0;
      for (double w : weights) {
        if (!(w > 0.0)) throw std::invalid_argument("mixture weights must be positive");
        sum += w;
      }
      if (std::abs(sum - 1.0) > kSumTol)
        throw std::invalid_argument("mixture weights do not sum to 1");
      for (const auto& c : components) {
        if (c.kind == Kind::Mixture)
          throw std::invalid_argument("mixture components must be ergodic models");
        c.validate();
        if (c.alphabet_size() != components.front().alphabet_size())
          throw std::invalid_argument("mixture components disagree on the alphabet");
      }
      return;
    }
    case Kind::Empirical:
      if (sample.empty()) throw std::invalid_argument("empirical model needs sampled points");
      if (sample_len < 1)
        throw std::invalid_argument("empirical sample length must be positive");
      return;
  }
  throw std::logic_error("unknown measure kind");
}

double MeasureModel::log_cylinder_mass(const Word& w) const {
  if (w.empty()) return 0.0;
  switch (kind) {
    case Kind::Bernoulli: {
      double lm = 0.0;
      for (Sym s : w) {
        if (s >= p.size() || p[s] <= 0.0) return kNegInf;
        lm += std::log(p[s]);
      }
      return lm;
    }
    case Kind::Markov: {
      if (w[0] >= pi.size() || pi[w[0]] <= 0.0) return kNegInf;
      double lm = std::log(pi[w[0]]);
      for (std::size_t i = 1; i < w.size(); ++i) {
        if (w[i] >= pi.size()) return kNegInf;
        double t = rows[w[i - 1]][w[i]];
        if (t <= 0.0) return kNegInf;
        lm += std::log(t);
      }
      return lm;
    }
    case Kind::Mixture: {
      std::vector<double> parts(components.size());
      for (std::size_t i = 0; i < components.size(); ++i)
        parts[i] = std::log(weights[i]) + components[i].log_cylinder_mass(w);
      return log_sum_exp(parts);
    }
    case Kind::Empirical: {
      int r = static_cast<int>(w.size());
      if (r > sample_len)
        throw std::invalid_argument("cylinder deeper than the sampled word length");
      long long occ = 0, total = 0;
      for (const Point& x : sample) {
        Word full = x.first(static_cast<std::size_t>(sample_len));
        for (int s = 0; s + r <= sample_len; ++s) {
          ++total;
          if (std::equal(w.begin(), w.end(), full.begin() + s)) ++occ;
        }
      }
      if (occ == 0) return kNegInf;
      return std::log(static_cast<double>(occ)) - std::log(static_cast<double>(total));
    }
  }
  throw std::logic_error("unknown measure kind");
}

PartitionSpec PartitionSpec::cylinders(int depth, double diameter_bound) {
  if (depth < 1) throw std::invalid_argument("partition depth must be positive");
  if (!(diameter_bound > 0.0)) throw std::invalid_argument("diameter bound must be positive");
  if (!(std::ldexp(1.0, -depth) < diameter_bound))
    throw std::invalid_argument("partition depth too shallow for the diameter bound");
  PartitionSpec xi;
  xi.cylinder_depth = depth;
  xi.diameter_bound = diameter_bound;
  return xi;
}

double partition_entropy(const MeasureModel& mu, const PartitionSpec& xi) {
  mu.validate();
  if (mu.kind == MeasureModel::Kind::Empirical)
    throw std::invalid_argument("empirical models have no exact cylinder masses");
  int k = mu.alphabet_size();
  int r = xi.cylinder_depth;
  if (r < 1) throw std::invalid_argument("partition depth must be positive");
  std::size_t total = 1;
  for (int i = 0; i < r; ++i) {
    total *= static_cast<std::size_t>(k);
    if (total > (std::size_t{1} << 22))
      throw std::invalid_argument("partition too fine to enumerate");
  }
  Word w(static_cast<std::size_t>(r), 0);
  double h = 0.0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t t = idx;
    for (int i = r - 1; i >= 0; --i) {
      w[static_cast<std::size_t>(i)] = static_cast<Sym>(t % static_cast<std::size_t>(k));
      t /= static_cast<std::size_t>(k);
    }
    double lm = mu.log_cylinder_mass(w);
    if (lm > kNegInf) h -= xlogx(std::exp(lm));
  }
  return h;
}

double dynamical_entropy(const MeasureModel& mu, const PartitionSpec& xi) {
  mu.validate();
  switch (mu.kind) {
    case MeasureModel::Kind::Bernoulli: {
      double h = 0.0;
      for (double v : mu.p) h -= xlogx(v);
      return h;
    }
    case MeasureModel::Kind::Markov: {
      double h = 0.0;
      for (std::size_t i = 0; i < mu.pi.size(); ++i) {
        double row_h = 0.0;
        for (double t : mu.rows[i]) row_h -= xlogx(t);
        h += mu.pi[i] * row_h;
      }
      return h;
    }
    case MeasureModel::Kind::Mixture: {
      double h = 0.0;
      for (std::size_t i = 0; i < mu.components.size(); ++i)
        h += mu.weights[i] * dynamical_entropy(mu.components[i], xi);
      return h;
    }
    case MeasureModel::Kind::Empirical: {
      int r = xi.cylinder_depth;
      if (r >= 2) return empirical_block_entropy(mu, r) - empirical_block_entropy(mu, r - 1);
      return empirical_block_entropy(mu, 1);
    }
  }
  throw std::logic_error("unknown measure kind");
}

double log_covering_count(const MeasureModel& mu, int depth, double log_mass_threshold) {
  mu.validate();
  if (depth < 1) throw std::invalid_argument("depth must be positive");
  std::vector<double> parts;
  for (const MassLevel& lvl : mass_levels(mu, depth))
    if (lvl.log_mass >= log_mass_threshold) parts.push_back(lvl.log_count);
  return log_sum_exp(parts);
}

double log_minimal_covering_count(const MeasureModel& mu, int depth, double target_mass) {
  mu.validate();
  if (depth < 1) throw std::invalid_argument("depth must be positive");
  if (!(target_mass > 0.0 && target_mass < 1.0))
    throw std::invalid_argument("target mass must lie in (0,1)");
  double target = std::log(target_mass);
  double cum = kNegInf;
  double count = kNegInf;
  for (const MassLevel& lvl : mass_levels(mu, depth)) {
    double with_level = log_add(cum, lvl.log_mass + lvl.log_count);
    if (with_level >= target) {
      // the boundary stratum contributes only as many cylinders as the
      // residual mass needs
      double ratio = log_diff(target, cum) - lvl.log_mass;
      double partial = ratio < 36.0 ? std::log(std::max(1.0, std::ceil(std::exp(ratio))))
                                    : ratio;
      return log_add(count, partial);
    }
    cum = with_level;
    count = log_add(count, lvl.log_count);
  }
  return count;  // rounding shortfall; every cylinder is in the cover
}

KatokEstimate katok_entropy(const MeasureModel& mu, double epsilon, double delta,
                            std::span<const int> n_ladder, int sample_size, std::uint64_t seed) {
  mu.validate();
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
  if (static_cast<double>(sample_size) < 10.0 / delta)
    throw std::invalid_argument("sample size below the 10/delta refusal floor");
  if (n_ladder.size() < 2)
    throw std::invalid_argument("need at least two horizons for a rate");
  for (std::size_t j = 0; j < n_ladder.size(); ++j) {
    if (n_ladder[j] < 1) throw std::invalid_argument("horizons must be positive");
    if (j > 0 && n_ladder[j] <= n_ladder[j - 1])
      throw std::invalid_argument("horizon ladder must increase strictly");
  }
  int offset = scale_depth(epsilon) - 1;

  KatokEstimate est;
  est.epsilon = epsilon;
  est.delta = delta;
  est.n_ladder.assign(n_ladder.begin(), n_ladder.end());
  est.sample_size = sample_size;
  est.seed = seed;

  if (mu.kind == MeasureModel::Kind::Mixture) {
    // ergodic components are estimated independently; the covering
    // entropy of the mixture is their weighted average
    double rate = 0.0;
    for (std::size_t i = 0; i < mu.components.size(); ++i)
      rate += mu.weights[i] * katok_entropy(mu.components[i], epsilon, delta, n_ladder,
                                            sample_size, seed + kComponentSeedStride * (i + 1))
                                  .rate;
    est.rate = rate;
    return est;
  }

  int max_depth = n_ladder.back() + offset;
  if (max_depth > 0xFFFF) throw std::invalid_argument("horizon too deep for the draw counters");
  if (mu.kind == MeasureModel::Kind::Empirical && max_depth > mu.sample_len)
    throw std::invalid_argument("horizon exceeds the sampled word length");

  CounterRng base(seed, 0);
  std::size_t S = static_cast<std::size_t>(sample_size);
  double z = inverse_normal_cdf(1.0 - delta);
  std::vector<double> ys(n_ladder.size());

  for (std::size_t j = 0; j < n_ladder.size(); ++j) {
    CounterRng rng = base.split(j);
    int depth = n_ladder[j] + offset;
    std::vector<double> lm(S);
    if (mu.kind == MeasureModel::Kind::Empirical) {
      auto counts = factor_counts(mu, depth);
      double total = 0.0;
      for (const auto& [w, c] : counts) total += static_cast<double>(c);
      std::size_t npoints = mu.sample.size();
      int starts = mu.sample_len - depth + 1;
      parallel_for_index(S, [&](std::size_t s) {
        auto pt = static_cast<std::size_t>(rng.uniform(counter_at(s, 0)) *
                                           static_cast<double>(npoints));
        pt = std::min(pt, npoints - 1);
        int st = std::min(starts - 1, static_cast<int>(rng.uniform(counter_at(s, 1)) *
                                                       static_cast<double>(starts)));
        Word w = mu.sample[pt].shifted(static_cast<std::size_t>(st))
                     .first(static_cast<std::size_t>(depth));
        lm[s] = std::log(static_cast<double>(counts.at(w))) - std::log(total);
      });
    } else if (mu.kind == MeasureModel::Kind::Bernoulli) {
      parallel_for_index(S, [&](std::size_t s) {
        double acc = 0.0;
        for (int i = 0; i < depth; ++i) {
          int a = pick_from_cdf(mu.p, rng.uniform(counter_at(s, i)));
          acc += std::log(mu.p[static_cast<std::size_t>(a)]);
        }
        lm[s] = acc;
      });
    } else {
      parallel_for_index(S, [&](std::size_t s) {
        int a = pick_from_cdf(mu.pi, rng.uniform(counter_at(s, 0)));
        double acc = std::log(mu.pi[static_cast<std::size_t>(a)]);
        for (int i = 1; i < depth; ++i) {
          int b = pick_from_cdf(mu.rows[static_cast<std::size_t>(a)],
                                rng.uniform(counter_at(s, i)));
          acc += std::log(mu.rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]);
          a = b;
        }
        lm[s] = acc;
      });
    }

    double mean = 0.0;
    for (double v : lm) mean += v;
    mean /= static_cast<double>(S);
    double var = 0.0;
    for (double v : lm) var += (v - mean) * (v - mean);
    var = S > 1 ? var / static_cast<double>(S - 1) : 0.0;
    double sigma = std::sqrt(std::max(var, 0.0));

    double log_n = log_minimal_covering_count(mu, depth, 1.0 - delta);
    est.log_counts.push_back(log_n);
    // with word log-masses modeled as Gaussian(mean, sigma^2) the exact
    // count down to the 1-delta mass quantile is
    // exp(depth*h + sigma^2/2) * UpperTail(sigma - z), so subtracting
    // those terms leaves a line of slope h; at sigma = 0 the tail factor
    // collapses to 1-delta and the corrected count is exact
    ys[j] = log_n - 0.5 * sigma * sigma - log_gauss_upper(sigma - z);
  }

  std::vector<double> xs(n_ladder.size());
  for (std::size_t j = 0; j < n_ladder.size(); ++j) xs[j] = static_cast<double>(n_ladder[j]);
  // exact counts wobble as the mass quantile crosses discrete mass
  // strata; the wobble is mean zero over several strata, so the fit
  // uses every rung and dense ladders average it out
  LinearFit fit = fit_line(xs, ys);
  est.rate = fit.slope;
  return est;
}

MeasureFamily MeasureFamily::constant() { return {}; }

MeasureFamily MeasureFamily::refined_grid_uniform() {
  MeasureFamily f;
  f.kind = Kind::RefinedGridUniform;
  return f;
}

MeasureModel MeasureFamily::at(double eps, const MeasureModel& limit) const {
  if (kind == Kind::Constant) return limit;
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("scale must lie in (0,1)");
  // alphabet refines as ceil(1/eps), matching the grid system family
  int k = std::max(2, static_cast<int>(std::ceil(1.0 / eps - 1e-12)));
  return MeasureModel::bernoulli(std::vector<double>(static_cast<std::size_t>(k), 1.0 / k));
}

namespace {

void check_scale_ladder(std::span<const double> eps_ladder) {
  if (eps_ladder.empty()) throw std::invalid_argument("scale ladder is empty");
  for (std::size_t r = 0; r < eps_ladder.size(); ++r) {
    if (!(eps_ladder[r] > 0.0 && eps_ladder[r] < 1.0))
      throw std::invalid_argument("scales must lie in (0,1)");
    if (r > 0 && eps_ladder[r] >= eps_ladder[r - 1])
      throw std::invalid_argument("scale ladder must decrease strictly");
  }
}

double tail_window_max(std::span<const double> vals) {
  std::size_t window = std::min(vals.size(), std::max<std::size_t>(2, (vals.size() + 2) / 3));
  return *std::max_element(vals.end() - static_cast<std::ptrdiff_t>(window), vals.end());
}

}  // namespace

double H_delta_K(const MeasureModel& mu, double delta, std::span<const double> epsilon_ladder,
                 const MeasureFamily& family, int sample_size, std::uint64_t seed) {
  check_scale_ladder(epsilon_ladder);
  static constexpr int kHorizons[] = {10, 20, 30, 40};
  std::vector<double> vals(epsilon_ladder.size());
  for (std::size_t r = 0; r < epsilon_ladder.size(); ++r) {
    double eps = epsilon_ladder[r];
    MeasureModel m = family.at(eps, mu);
    KatokEstimate est = katok_entropy(m, eps, delta, kHorizons, sample_size, seed + r);
    vals[r] = est.rate / std::abs(std::log(eps));
  }
  return tail_window_max(vals);
}

double H_of_mu(const MeasureModel& mu, std::span<const double> epsilon_ladder,
               const MeasureFamily& family) {
  check_scale_ladder(epsilon_ladder);
  std::vector<double> vals(epsilon_ladder.size());
  for (std::size_t r = 0; r < epsilon_ladder.size(); ++r) {
    double eps = epsilon_ladder[r];
    MeasureModel m = family.at(eps, mu);
    // cylinders at the resolution depth attain the inf over partitions
    // with mesh below eps, and the entropy rate there is closed-form
    double h = dynamical_entropy(m, PartitionSpec::cylinders(scale_depth(eps), eps));
    vals[r] = h / std::abs(std::log(eps));
  }
  return tail_window_max(vals);
}

}  // namespace mdimlab
