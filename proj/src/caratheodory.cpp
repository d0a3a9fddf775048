#include "mdimlab/caratheodory.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdimlab/util.hpp"

namespace mdimlab {

namespace {

bool word_has_prefix(const Word& w, const Word& prefix) {
  return prefix.size() <= w.size() && std::equal(prefix.begin(), prefix.end(), w.begin());
}

bool word_is_alive(const SymbolicSystem& sys, const Word& w) {
  try {
    sys.extend_word_to_point(w);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

// Symbolic covering check: the union of the balls' realized cylinders
// must contain the subset. Descends the allowed-word tree under the
// subset's constraint, pruning as soon as some cylinder word is a
// prefix; a live leaf with no such prefix witnesses the gap.
void verify_covering(const SymbolicSystem& sys, const SubsetSpec& Z,
                     const std::vector<Word>& cylinder_words, bool any_whole_space) {
  if (any_whole_space) return;

  if (Z.kind == SubsetSpec::Kind::SinglePoint) {
    std::size_t deepest = 0;
    for (const Word& w : cylinder_words) {
      deepest = std::max(deepest, w.size());
      if (Z.point.first(w.size()) == w) return;
    }
    throw std::invalid_argument("cover rejected: uncovered cylinder " +
                                word_str(Z.point.first(std::max<std::size_t>(deepest, 1))));
  }

  Word base;
  if (Z.kind == SubsetSpec::Kind::Cylinder) base = Z.cylinder;
  std::size_t stop = base.size();
  for (const Word& w : cylinder_words) stop = std::max(stop, w.size());

  auto covered = [&](const Word& w) {
    for (const Word& c : cylinder_words)
      if (word_has_prefix(w, c)) return true;
    return false;
  };
  auto descend = [&](auto&& self, Word& w) -> void {
    if (covered(w)) return;
    if (w.size() >= stop) {
      if (word_is_alive(sys, w))
        throw std::invalid_argument("cover rejected: uncovered cylinder " + word_str(w));
      return;
    }
    for (int sym = 0; sym < sys.alphabet_size; ++sym) {
      w.push_back(static_cast<Sym>(sym));
      if (sys.factor_allowed(w)) self(self, w);
      w.pop_back();
    }
  };
  Word w = base;
  descend(descend, w);
}

void require_scale(double eps) {
  if (!(eps > 0.0) || !(eps < 1.0))
    throw std::invalid_argument("scale must lie strictly between 0 and 1");
}

// Uniform-length cover bound at horizon n: one ball per depth n-1+A
// cylinder inside [u], each weighted by the sup over the enclosing
// depth n-1+F cylinder of its center. The branching between the two
// depths is bounded by k^(A-F); for full shifts and any ultrametric
// system the bound is attained.
double uniform_cover_log_sum(const SymbolicSystem& sys, const ResolvedPotential& scaled,
                             const Word& u, int n, double s, double eps) {
  int A = sys.ball_agreement_len(eps);
  int F = sys.forced_agreement_len(eps);
  int depth = std::max(0, n - 1 + F);
  double branching = (A - F) * std::log(double(sys.alphabet_size));
  return -s * n + branching + log_cylinder_partition(sys, scaled, u, n, depth, true);
}

// Per-step drift of a single-point cover weight, exact thanks to the
// eventually periodic tail.
double point_tail_average(const SymbolicSystem& sys, const ResolvedPotential& pot,
                          const Point& x) {
  std::size_t n0 = x.prefix.size();
  int p = static_cast<int>(x.eventual_period());
  return birkhoff_sum(sys, pot, x.shifted(n0), p) / p;
}

struct PointWeights {
  double lo = kPosInf;  // min over the window of -s n + |log eps| S_n psi(x)
  double hi = kPosInf;  // min over the window of the single-ball cover weight
  int n_at_hi = 0;
  double drift = 0.0;  // per-step slope of the weight beyond the transient
};

PointWeights scan_point_weights(const SymbolicSystem& sys, const ResolvedPotential& psi,
                                const ResolvedPotential& scaled, const Point& x, double s,
                                int N, int window, double eps) {
  double lambda = std::abs(std::log(eps));
  int F = sys.forced_agreement_len(eps);
  int n0 = static_cast<int>(x.prefix.size());
  int p = static_cast<int>(x.eventual_period());
  PointWeights out;
  out.drift = lambda * point_tail_average(sys, psi, x) - s;

  int W = std::max(window, 2 * (n0 + p) + 4);
  for (int n = N; n <= N + W; ++n) {
    double wlo = -s * n + lambda * birkhoff_sum(sys, psi, x, n);
    int depth = std::max(0, n - 1 + F);
    double whi =
        -s * n + extremal_birkhoff_over_cylinder(sys, scaled, x.first(std::size_t(depth)), n, true);
    out.lo = std::min(out.lo, wlo);
    if (whi < out.hi) {
      out.hi = whi;
      out.n_at_hi = n;
    }
  }
  // Beyond the scan the weight is linear per residue class of n mod p;
  // with nonnegative drift the smallest representative caps the tail.
  if (out.drift >= 0.0) {
    for (int j = 0; j < p; ++j) {
      int n = N + W + 1 + j;
      double wlo = -s * n + lambda * birkhoff_sum(sys, psi, x, n);
      out.lo = std::min(out.lo, wlo);
    }
  }
  return out;
}

// Mass-distribution certificate on full shifts with single-coordinate
// potentials: the product measure tilted by the scaled potential has
// log-pressure LogLambda, and every ball of length n >= N carries weight
// at least exp(N (LogLambda - s)) times its measure.
struct TiltCertificate {
  bool applicable = false;
  double log_lambda = 0.0;
  double log_pmax = 0.0;
  double log_pmin = 0.0;
};

TiltCertificate tilt_certificate(const SymbolicSystem& sys, const ResolvedPotential& scaled) {
  TiltCertificate t;
  if (!sys.forbidden_words.empty() || scaled.depth != 1) return t;
  t.applicable = true;
  t.log_lambda = log_sum_exp(scaled.table);
  double pmax = kNegInf, pmin = kPosInf;
  for (double v : scaled.table) {
    pmax = std::max(pmax, v - t.log_lambda);
    pmin = std::min(pmin, v - t.log_lambda);
  }
  t.log_pmax = pmax;
  t.log_pmin = pmin;
  return t;
}

const Word& subset_word(const SubsetSpec& Z) {
  static const Word empty;
  return Z.kind == SubsetSpec::Kind::Cylinder ? Z.cylinder : empty;
}

}  // namespace

double cover_sum(const SymbolicSystem& sys, const ResolvedPotential& psi,
                 const CoverCandidate& cover, double s, double eps) {
  require_scale(eps);
  if (cover.balls.empty()) throw std::invalid_argument("cover has no balls");
  double lambda = std::abs(std::log(eps));
  ResolvedPotential scaled = scale_potential(psi, lambda);

  std::vector<Word> cylinder_words;
  std::vector<Word> enclosing_words(cover.balls.size());
  bool any_whole = false;
  cylinder_words.reserve(cover.balls.size());
  for (std::size_t i = 0; i < cover.balls.size(); ++i) {
    const BowenBallSpec& b = cover.balls[i];
    if (b.eps != eps)
      throw std::invalid_argument("cover mixes scales; all balls must use the given eps");
    DynamicalBallCylinder cyl = dynamical_ball_cylinder(sys, b);
    if (cyl.whole_space) {
      any_whole = true;
      enclosing_words[i] = {};
    } else {
      cylinder_words.push_back(cyl.word);
      enclosing_words[i] = b.center.first(std::size_t(cyl.depth_forced));
    }
  }
  verify_covering(sys, cover.covered, cylinder_words, any_whole);

  std::vector<double> terms(cover.balls.size());
  parallel_for_index(cover.balls.size(), [&](std::size_t i) {
    const BowenBallSpec& b = cover.balls[i];
    double sup = extremal_birkhoff_over_cylinder(sys, scaled, enclosing_words[i], b.n, true);
    terms[i] = -s * b.n + sup;
  });
  return log_sum_exp(terms);
}

OuterMeasureBracket outer_measure_m(const SymbolicSystem& sys, const ResolvedPotential& psi,
                                    const SubsetSpec& Z, double s, int N, double eps,
                                    int window) {
  require_scale(eps);
  if (N < 1) throw std::invalid_argument("minimum cover length must be positive");
  if (window < 0) throw std::invalid_argument("negative window");
  double lambda = std::abs(std::log(eps));
  ResolvedPotential scaled = scale_potential(psi, lambda);
  OuterMeasureBracket out;

  if (Z.kind == SubsetSpec::Kind::SinglePoint) {
    if (!Z.point.valid_for(sys)) throw std::invalid_argument("point not in the system");
    PointWeights w = scan_point_weights(sys, psi, scaled, Z.point, s, N, window, eps);
    if (w.drift < 0.0) {
      // the single-ball cover weight decays geometrically: m is zero
      out.lo = kNegInf;
      out.hi = kNegInf;
      out.n_at_hi = 0;
      out.lower_certified = true;
      out.provenance = CountProvenance::Exact;
      return out;
    }
    out.lo = w.lo;
    out.hi = w.hi;
    out.n_at_hi = w.n_at_hi;
    out.lower_certified = true;
    out.provenance = out.hi - out.lo <= 1e-12 * (1.0 + std::abs(out.hi))
                         ? CountProvenance::Exact
                         : CountProvenance::Bracket;
    return out;
  }

  const Word& u = subset_word(Z);
  if (Z.kind == SubsetSpec::Kind::Cylinder) sys.extend_word_to_point(u);

  out.hi = kPosInf;
  for (int n = N; n <= N + window; ++n) {
    double v = uniform_cover_log_sum(sys, scaled, u, n, s, eps);
    if (v < out.hi) {
      out.hi = v;
      out.n_at_hi = n;
    }
  }

  out.lo = kNegInf;
  if (s <= scaled.min_value()) out.lo = std::max(out.lo, N * (scaled.min_value() - s));
  TiltCertificate t = tilt_certificate(sys, scaled);
  if (t.applicable && s <= t.log_lambda) {
    int F = sys.forced_agreement_len(eps);
    double c_log = F >= 1 ? (F - 1) * t.log_pmax : -t.log_pmin;
    double mu_z = 0.0;
    for (Sym a : u) mu_z += scaled.table[a] - t.log_lambda;
    out.lo = std::max(out.lo, N * (t.log_lambda - s) - c_log + mu_z);
  }
  out.lower_certified = out.lo > kNegInf;
  out.provenance = out.hi - out.lo <= 1e-12 * (1.0 + std::abs(out.hi))
                       ? CountProvenance::Exact
                       : CountProvenance::Bracket;
  return out;
}

namespace {

enum class Trend { Positive, Zero, Undecided };

}  // namespace

CriticalExponent critical_exponent(const SymbolicSystem& sys, const ResolvedPotential& psi,
                                   const SubsetSpec& Z, double eps,
                                   std::span<const int> N_schedule, double tol) {
  require_scale(eps);
  if (N_schedule.empty()) throw std::invalid_argument("empty length schedule");
  for (std::size_t i = 0; i < N_schedule.size(); ++i) {
    if (N_schedule[i] < 1) throw std::invalid_argument("schedule lengths must be positive");
    if (i > 0 && N_schedule[i] <= N_schedule[i - 1])
      throw std::invalid_argument("schedule lengths must strictly increase");
  }
  double lambda = std::abs(std::log(eps));
  if (tol <= 0.0) tol = 1e-3 * lambda;
  ResolvedPotential scaled = scale_potential(psi, lambda);

  CriticalExponent out;
  out.eps = eps;
  out.n_used = N_schedule.back();

  // s-independent part of the trend series, computed once
  bool point_mode = Z.kind == SubsetSpec::Kind::SinglePoint;
  double point_avg = 0.0;
  std::vector<double> base;
  TiltCertificate t;
  if (point_mode) {
    if (!Z.point.valid_for(sys)) throw std::invalid_argument("point not in the system");
    point_avg = lambda * point_tail_average(sys, psi, Z.point);
  } else {
    const Word& u = subset_word(Z);
    if (Z.kind == SubsetSpec::Kind::Cylinder) sys.extend_word_to_point(u);
    base.reserve(N_schedule.size());
    for (int n : N_schedule) base.push_back(uniform_cover_log_sum(sys, scaled, u, n, 0.0, eps));
    t = tilt_certificate(sys, scaled);
  }

  constexpr double kSlopeTol = 1e-10;
  auto classify = [&](double s) -> Trend {
    if (point_mode) {
      double drift = point_avg - s;
      return drift >= -1e-12 * (1.0 + std::abs(s)) ? Trend::Positive : Trend::Zero;
    }
    if (s <= scaled.min_value()) return Trend::Positive;
    if (t.applicable && s <= t.log_lambda) return Trend::Positive;
    std::size_t m = N_schedule.size();
    std::size_t take = std::max<std::size_t>(2, (m + 1) / 2);
    take = std::min(take, m);
    std::vector<double> xs, ys;
    for (std::size_t j = m - take; j < m; ++j) {
      xs.push_back(double(N_schedule[j]));
      ys.push_back(base[j] - s * N_schedule[j]);
    }
    if (xs.size() < 2) return Trend::Undecided;
    LinearFit fit = fit_line(xs, ys);
    if (fit.slope < -kSlopeTol) return Trend::Zero;
    if (fit.slope > kSlopeTol) return Trend::Positive;
    return Trend::Undecided;
  };

  double s_lo = scaled.min_value();
  double s_hi = scaled.max_value() + std::log(double(sys.alphabet_size)) + 1.0;
  if (classify(s_lo) == Trend::Zero || classify(s_hi) != Trend::Zero) {
    out.flagged = true;
    out.s_low = s_lo;
    out.s_high = s_hi;
    out.s_star = 0.5 * (s_lo + s_hi);
    return out;
  }
  while (s_hi - s_lo > tol) {
    double mid = 0.5 * (s_lo + s_hi);
    Trend c = classify(mid);
    if (c == Trend::Positive) {
      s_lo = mid;
    } else if (c == Trend::Zero) {
      s_hi = mid;
    } else {
      out.flagged = true;
      break;
    }
  }
  out.s_low = s_lo;
  out.s_high = s_hi;
  out.s_star = 0.5 * (s_lo + s_hi);
  return out;
}

BowenMdimEstimate bowen_mdim(const SystemFamily& family, const PotentialRule& rule,
                             const SubsetSpec& Z, std::span<const MdimRungSpec> ladder) {
  if (ladder.empty()) throw std::invalid_argument("bowen_mdim: empty scale ladder");
  for (std::size_t i = 0; i + 1 < ladder.size(); ++i)
    if (!(ladder[i].eps > ladder[i + 1].eps))
      throw std::invalid_argument("bowen_mdim: scales must strictly decrease");

  BowenMdimEstimate est;
  est.rungs.resize(ladder.size());
  est.dim_points.resize(ladder.size());
  parallel_for_index(ladder.size(), [&](std::size_t i) {
    const MdimRungSpec& spec = ladder[i];
    SymbolicSystem sys = family.at(spec.eps);
    ResolvedPotential pot = resolve(rule.materialize(sys), sys);
    CriticalExponent crit = critical_exponent(sys, pot, Z, spec.eps, spec.ns);
    est.rungs[i] = crit;
    est.dim_points[i] = crit.s_star / std::abs(std::log(spec.eps));
  });
  est.last_point = est.dim_points.back();
  if (est.dim_points.size() >= 2) {
    std::vector<double> xs;
    for (const MdimRungSpec& spec : ladder) xs.push_back(1.0 / std::abs(std::log(spec.eps)));
    LinearFit fit = fit_line(xs, est.dim_points);
    est.fit_value = fit.intercept;
    est.fit_residual = fit.max_residual;
  } else {
    est.fit_value = est.last_point;
    est.fit_residual = 0.0;
  }
  for (const CriticalExponent& c : est.rungs) est.flagged = est.flagged || c.flagged;

  est.capacity = upper_mdim(family, rule, Z, ladder);
  double bisect_slack = 0.0;
  for (std::size_t i = 0; i < est.rungs.size(); ++i) {
    double lambda = std::abs(std::log(ladder[i].eps));
    bisect_slack = std::max(bisect_slack, (est.rungs[i].s_high - est.rungs[i].s_low) / (2 * lambda));
  }
  double combined = est.fit_residual + est.capacity.fit_residual + bisect_slack;
  if (est.fit_value > est.capacity.value() + std::max(0.05, 2.0 * combined))
    throw std::logic_error(
        "critical-exponent dimension exceeded the counting capacity beyond combined uncertainty");
  est.capacity_gap = est.fit_value - est.capacity.value();
  return est;
}

}  // namespace mdimlab
