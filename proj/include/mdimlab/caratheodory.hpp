#pragma once
// Outer-measure side of the dimension computations. A cover of a subset
// by dynamical balls has a weighted sum at exponent s; the infimum over
// covers with lengths >= N defines an outer measure m(Z, psi, s, N, eps),
// the potential entering scaled by |log eps|. As s grows, m drops from
// infinity to zero at a critical exponent s*(eps), and s*(eps)/|log eps|
// along a scale ladder estimates the dimension of Z.
//
// Everything here is two-sided: uniform-length covers give certified
// upper bounds, mass-distribution certificates (where available) give
// lower bounds, and the 0-vs-infinity decision is made from the trend of
// the bracket along a schedule of minimum lengths.

#include <span>
#include <vector>

#include "mdimlab/counting.hpp"
#include "mdimlab/symbolic.hpp"

namespace mdimlab {

// A proposed cover of `covered` by dynamical balls, all at one scale.
struct CoverCandidate {
  std::vector<BowenBallSpec> balls;
  SubsetSpec covered = SubsetSpec::whole();
};

// log of sum_i exp(-s * n_i + |log eps| * sup over ball i of S_{n_i} psi).
// First verifies symbolically that the realized cylinders of the balls
// cover the subset; a non-covering candidate is rejected with an
// uncovered cylinder named in the error. The per-ball sup is taken over
// the cylinder enclosing the ball, which is the ball itself on
// ultrametric systems and a certified over-estimate on sup-metric ones.
double cover_sum(const SymbolicSystem& sys, const ResolvedPotential& psi,
                 const CoverCandidate& cover, double s, double eps);

// Bracket on log m(Z, psi, s, N, eps). The upper end is the best
// uniform-length cover with length in [N, N+window]; the lower end is a
// mass-distribution certificate when one applies (full shifts with
// single-coordinate potentials, and single points, where the bound is
// exact), -inf otherwise.
struct OuterMeasureBracket {
  double lo = kNegInf;
  double hi = kPosInf;
  int n_at_hi = 0;  // cover length achieving the upper end
  bool lower_certified = false;
  CountProvenance provenance = CountProvenance::Bracket;
};

OuterMeasureBracket outer_measure_m(const SymbolicSystem& sys, const ResolvedPotential& psi,
                                    const SubsetSpec& Z, double s, int N, double eps,
                                    int window = 8);

// Location of the drop of m from infinity to zero. The final bracket
// [s_low, s_high] has width at most the bisection tolerance unless the
// trend was undecidable somewhere, in which case `flagged` is set and
// the bracket is left wide.
struct CriticalExponent {
  double s_star = 0.0;
  double s_low = 0.0;
  double s_high = 0.0;
  double eps = 0.0;
  int n_used = 0;  // largest cover length consulted
  bool flagged = false;
};

// Bisection on s; each classification reads the trend of the bracket on
// log m along N_schedule (certified lower bounds take precedence over
// the slope of the upper bound). tol <= 0 selects 1e-3 * |log eps|.
CriticalExponent critical_exponent(const SymbolicSystem& sys, const ResolvedPotential& psi,
                                   const SubsetSpec& Z, double eps,
                                   std::span<const int> N_schedule, double tol = 0.0);

// Dimension ladder built from critical exponents, with the counting
// capacity computed on the same ladder for comparison. dim_points are
// s*(eps)/|log eps| per rung; the reported value is the intercept of the
// fit in 1/|log eps|.
struct BowenMdimEstimate {
  std::vector<CriticalExponent> rungs;
  std::vector<double> dim_points;
  double last_point = 0.0;
  double fit_value = 0.0;
  double fit_residual = 0.0;
  MdimEstimate capacity;
  double capacity_gap = 0.0;  // fit_value - capacity.value(), signed
  bool flagged = false;
  double value() const { return fit_value; }
};

// Each rung reuses its `ns` as the schedule of minimum cover lengths.
// The estimate can never genuinely exceed the counting capacity; if the
// two cross beyond their combined uncertainty the sums have violated
// their own bounds and this throws. On an invariant subset the two
// agree, and `capacity_gap` is reported so callers can check equality.
BowenMdimEstimate bowen_mdim(const SystemFamily& family, const PotentialRule& rule,
                             const SubsetSpec& Z, std::span<const MdimRungSpec> ladder);

}  // namespace mdimlab
