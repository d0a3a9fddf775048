#pragma once

// Partition-function counting at a fixed time horizon n and scale eps:
// sup-weighted maximal separated families (P) and inf-weighted minimal
// spanning families (Q). On symbolic systems both reduce to sums over
// allowed cylinders between two depths, computed by transfer iteration
// in log space. All logs are natural.
//
// For the 2-adic ultrametric the two depths coincide and every value
// is exact. For the embedded grid metric they differ and values come
// back as a bracket; the reported value is the upper end, the bracket
// width is the honest uncertainty.

#include <span>

#include "mdimlab/symbolic.hpp"

namespace mdimlab {

enum class CountProvenance { Exact, Bracket, GreedyLowerBound, Sampled };
std::string provenance_str(CountProvenance p);

struct LogBracket {
  double lo = kNegInf;
  double hi = kNegInf;
  CountProvenance provenance = CountProvenance::Exact;
  int depth_lo = 0;  // cylinder depth realizing the lower end
  int depth_hi = 0;  // cylinder depth realizing the upper end

  double value() const { return hi; }
  double width() const { return hi - lo; }
};

// log of the number of allowed depth-L words that start a point of the
// system (dead-end words are not counted).
double log_allowed_word_count(const SymbolicSystem& sys, int depth);

// log sum over allowed depth-`depth` cylinders inside [u] of
// exp(extremal over the cylinder's points of S_n pot); extremal is sup
// or inf. The workhorse both partition functions reduce to; exposed for
// the cover and level-set machinery.
double log_cylinder_partition(const SymbolicSystem& sys, const ResolvedPotential& pot,
                              const Word& u, int n, int depth, bool sup_mode);

// extremal of S_n pot over the points of [u].
double extremal_birkhoff_over_cylinder(const SymbolicSystem& sys, const ResolvedPotential& pot,
                                       const Word& u, int n, bool sup_mode);

// P_n(eps): sup over (n,eps)-separated subsets of `within` of the
// summed weights exp(S_n pot). Separation is taken in the closed sense
// d_n >= eps, which is the convention the cylinder counts realize.
LogBracket partition_function_P(const SymbolicSystem& sys, const ResolvedPotential& pot,
                                const SubsetSpec& within, int n, double eps);

// Q_n(eps): inf over (n,eps)-spanning subsets of `within` (open balls
// d_n < eps centered in the subset) of the summed weights.
LogBracket minimal_spanning_Q(const SymbolicSystem& sys, const ResolvedPotential& pot,
                              const SubsetSpec& within, int n, double eps);

struct SeparatedFamily {
  std::vector<Point> points;
  int n = 1;
  double eps = 0.5;
  bool transversal = false;  // one point per forced-depth cylinder
};

// The canonical maximal family: one point in every allowed cylinder at
// the forced depth. Throws if the family would exceed size_limit.
SeparatedFamily max_separated_family(const SymbolicSystem& sys, int n, double eps,
                                     std::size_t size_limit = 1u << 20);

// Greedy packing over candidate cylinders at a caller-chosen depth;
// a certified lower bound used to cross-check the transversal.
SeparatedFamily greedy_separated_family(const SymbolicSystem& sys, int n, double eps,
                                        int candidate_depth, std::size_t size_limit = 4096);

bool pairwise_separated(const SymbolicSystem& sys, const SeparatedFamily& fam);

struct PressurePoint {
  int n = 1;
  LogBracket log_value;
};

// Append-only series of log P_n (or log Q_n) against n.
struct PressureSeries {
  std::vector<PressurePoint> points;
  void append(PressurePoint p);
};

// Growth rate read off a tail window: max over the window of
// (1/n) log value, for each bracket end. Windows contain the largest
// ceil(N/3) horizons, at least two when available.
struct RateEstimate {
  double lo = kNegInf;
  double hi = kNegInf;
  int window_first_n = 0;
  int window_len = 0;
  double value() const { return hi; }
};

RateEstimate pressure_rate(const PressureSeries& series);

struct MdimRungSpec {
  double eps = 0.5;
  std::vector<int> ns;
};

struct MdimRung {
  double eps = 0.5;
  PressureSeries p_series, q_series;
  RateEstimate p_rate, q_rate;
  double dim_point = 0.0;  // p_rate.value() / |log eps|
  double pq_rate_gap = 0.0;
};

// Upper metric mean dimension with potential: per-rung pressure rates
// over |log eps|, plus the two extrapolations every consumer should
// look at before trusting a number. fit_value is the intercept of a
// least-squares line in x = 1/|log eps|; the residual comes along.
// The potential is scaled by |log eps| per rung before entering the
// partition functions, so a constant psi = c shifts the value by c;
// the fixed-scale P and Q below take their potential as given.
struct MdimEstimate {
  std::vector<MdimRung> rungs;
  double last_point = 0.0;
  double fit_value = 0.0;
  double fit_residual = 0.0;
  double value() const { return fit_value; }
};

MdimEstimate upper_mdim(const SystemFamily& family, const PotentialRule& rule,
                        const SubsetSpec& within, std::span<const MdimRungSpec> ladder);

}  // namespace mdimlab
