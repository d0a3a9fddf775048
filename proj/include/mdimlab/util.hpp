#pragma once

// Shared numeric helpers. Everything here is deterministic: summation
// trees are fixed by index, never by thread schedule, so results are
// byte-identical for any worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mdimlab {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

// log(e^a + e^b), safe for -inf operands.
inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// Pairwise reduction over [lo, hi). The tree shape depends only on the
// index range, which keeps the result independent of chunking.
inline double log_sum_exp_range(std::span<const double> v, std::size_t lo, std::size_t hi) {
  if (lo >= hi) return kNegInf;
  if (hi - lo == 1) return v[lo];
  std::size_t mid = lo + (hi - lo) / 2;
  return log_add(log_sum_exp_range(v, lo, mid), log_sum_exp_range(v, mid, hi));
}

inline double log_sum_exp(std::span<const double> v) {
  return log_sum_exp_range(v, 0, v.size());
}

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double max_residual = 0.0;
};

// Least squares y = a + b x. Two points minimum; callers that need a
// trend with fewer points must handle that themselves.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need at least two matched points");
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double det = n * sxx - sx * sx;
  LinearFit f;
  if (std::abs(det) < 1e-300) {
    // vertical degenerate; fall back to mean level
    f.intercept = sy / n;
    f.slope = 0.0;
  } else {
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy * sxx - sx * sxy) / det;
  }
  for (std::size_t i = 0; i < x.size(); ++i)
    f.max_residual = std::max(f.max_residual, std::abs(y[i] - (f.intercept + f.slope * x[i])));
  return f;
}

// Inverse standard normal CDF, Acklam's rational approximation
// (|relative error| < 1.2e-9 on (0,1)). Good enough for the
// second-order coverage corrections we apply to covering counts.
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inverse_normal_cdf: p outside (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double q, r, x;
  if (p < plow) {
    q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= phigh) {
    q = p - 0.5;
    r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  return x;
}

// FNV-1a, used for config hashes and output digests.
inline std::uint64_t fnv1a(std::span<const unsigned char> bytes,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s) {
  return fnv1a(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

// Best rational n/d with d <= max_den approximating x (continued
// fractions). Returns false if the residual exceeds tol.
inline bool rationalize(double x, std::int64_t max_den, double tol, std::int64_t& num,
                        std::int64_t& den) {
  double sign = x < 0 ? -1.0 : 1.0;
  double ax = std::abs(x);
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double frac = ax;
  for (int it = 0; it < 64; ++it) {
    double fl = std::floor(frac);
    if (fl > 9e17) return false;
    std::int64_t a = static_cast<std::int64_t>(fl);
    std::int64_t p2 = a * p1 + p0, q2 = a * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    double rem = frac - fl;
    if (rem < 1e-15) break;
    frac = 1.0 / rem;
  }
  if (q1 == 0) return false;
  if (std::abs(ax - static_cast<double>(p1) / static_cast<double>(q1)) > tol) return false;
  num = static_cast<std::int64_t>(sign) * p1;
  den = q1;
  return true;
}

// ---- deterministic parallelism ----------------------------------------

// Worker count is a process-global knob set once by the CLI / tests.
void set_worker_count(int n);
int worker_count();

// Runs fn(i) for i in [0, count) across workers. Work is split into
// chunks whose boundaries depend only on `count`, and any combining the
// caller does afterwards walks results in index order, so output bytes
// cannot depend on the worker count.
void parallel_for_index(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace mdimlab
