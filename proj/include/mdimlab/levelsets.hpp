#pragma once
// Birkhoff level sets seen through finite windows. The points whose
// length-L averages of phi sit within delta of alpha form a union of
// depth-L cylinders, so counting machinery applies verbatim once the
// partition functions are restricted to qualifying cylinders; the
// limit object is approached by shrinking delta along a declared
// schedule. The variational side solves the constrained entropy
// maximum over product measures in closed Gibbs form and feeds the
// optimizers through the measure-entropy estimators, so the left and
// right sides of the dimension identity are computed by independent
// routes.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdimlab/counting.hpp"
#include "mdimlab/measures.hpp"
#include "mdimlab/symbolic.hpp"

namespace mdimlab {

// Window selector at level alpha with half-width delta. A depth-L
// cylinder qualifies when some point of it has length-L average of phi
// inside [alpha - delta, alpha + delta]; for single-coordinate
// potentials the average is constant on the cylinder and the rule is
// exact. n_min marks the first horizon the window is consulted at.
struct LevelSetWindow {
  double alpha = 0.5;
  double delta = 0.05;
  int n_min = 1;

  void validate() const;
};

// Mean interval of S_L phi / L over the points of [w]; degenerate for
// single-coordinate potentials. Used by the tests to cross-check the
// counting DP against direct enumeration.
struct MeanInterval {
  double lo = 0.0;
  double hi = 0.0;
};
MeanInterval cylinder_mean_interval(const SymbolicSystem& sys, const ResolvedPotential& phi,
                                    const Word& w);

bool window_qualifies(const LevelSetWindow& window, const MeanInterval& interval);

// Partition function of the level window: the sup-weighted separated
// count of partition_function_P restricted to qualifying cylinders,
// with the same depth bracket as counting (each end applies the window
// at its own cylinder depth; the ends coincide on ultrametric
// systems). The potential psi is taken as given, exactly like the
// unrestricted partition functions; dimension-level callers scale it
// by |log eps| themselves. An empty window reports -inf on both ends.
//
// Membership sums ride the potential's integer lattice and are exact
// whenever it exists; otherwise per-window values are quantized to a
// grid no coarser than delta/4 and the window is widened by half a
// grid step, so qualification errs only toward inclusion.
LogBracket level_restricted_P(const SymbolicSystem& sys, const ResolvedPotential& phi,
                              const ResolvedPotential& psi, const LevelSetWindow& window, int n,
                              double eps);

// Dimension of the level set along a shrinking window schedule: for
// each half-width the counting conventions are applied to the
// restricted partition function (only the separated-side series is
// filled), and the reported value is the final, smallest-width
// estimate. Scales whose window is empty at every horizon are dropped
// from the extrapolation; if every rung is empty the value is -inf.
struct LevelMdimEstimate {
  double alpha = 0.5;
  std::vector<double> deltas;           // strictly decreasing half-widths
  std::vector<MdimEstimate> per_delta;  // counting-convention estimate per width
  // every rung's dimension point is non-increasing along the schedule;
  // the comparison is per rung because extrapolated intercepts can
  // cross within fit noise while the underlying counts cannot
  bool monotone = true;

  double value() const { return per_delta.back().fit_value; }
};

LevelMdimEstimate level_mdim(const SystemFamily& family, const PotentialRule& phi,
                             const PotentialRule& psi, double alpha,
                             std::span<const MdimRungSpec> ladder,
                             std::span<const double> delta_schedule);

// The three right-hand quantities of the dimension identity, all
// built on the same per-scale constrained optimizer.
enum class VariationalKind {
  Partition,  // (max constrained h + |log eps| int psi) / |log eps|, closed form
  Entropy,    // partition-entropy route through the measure module
  Covering    // covering-number route (sampled debias, exact counts)
};

// Sampling knobs for the covering route. The horizon ladder is dense
// on purpose: exact covering counts wobble across mass strata and only
// a fit over several strata averages that out.
struct KatokParams {
  double delta = 0.1;
  int samples = 8192;
  std::uint64_t seed = 1;
  std::vector<int> horizons = {10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30};
};

// Per-scale constrained optimizer: among product measures on the rung
// alphabet with int phi = alpha, entropy plus |log eps| int psi is
// maximized by p_i proportional to exp(t v_i + |log eps| psi_i); t is
// the unique root of the mean constraint, found to 1e-10. Boundary
// alphas degenerate to the uniform measure on the extremal symbols;
// alphas outside the value range mark the rung infeasible.
struct GibbsOptimizer {
  double eps = 0.5;
  double lambda = 0.0;  // |log eps|
  bool feasible = false;
  double t = 0.0;
  std::vector<double> p;
  double entropy = 0.0;
  double phi_integral = 0.0;
  double psi_integral = 0.0;
  double value = 0.0;  // this rung's normalized contribution
};

// Solves one rung directly: among product measures p on the rung
// alphabet with sum p_i v_i = alpha, maximizes entropy plus
// sum p_i psi_scaled_i, where psi_scaled already carries its
// |log eps| factor. Infeasible alphas come back with feasible unset.
GibbsOptimizer solve_gibbs(double eps, double lambda, std::span<const double> v,
                           std::span<const double> psi_scaled, double alpha);

struct VariationalEstimate {
  VariationalKind kind = VariationalKind::Partition;
  double alpha = 0.5;
  std::vector<GibbsOptimizer> rungs;
  double last_point = 0.0;
  double fit_value = 0.0;
  double fit_residual = 0.0;

  double value() const { return fit_value; }
};

// Constrained variational value along the scale ladder, one optimizer
// per rung, extrapolated exactly like the counting dimensions
// (intercept of the fit in 1/|log eps| over the feasible rungs).
// Requires single-coordinate potentials on systems with no forbidden
// words; that is the regime where the product-measure optimum is the
// optimum over all invariant measures.
VariationalEstimate constrained_variational_rhs(const SystemFamily& family,
                                                const PotentialRule& phi,
                                                const PotentialRule& psi, double alpha,
                                                std::span<const double> epsilon_ladder,
                                                VariationalKind kind,
                                                const KatokParams& katok = {});

// Thrown when the three-way comparison is requested on a system
// without the gluing property its hypotheses need.
struct SpecificationRequired : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Theorem1Options {
  std::vector<double> window_deltas = {0.1, 0.05};
  KatokParams katok = {};
  double tolerance = 0.1;
};

// One row per alpha: the level-set dimension and the three
// variational columns, their worst pairwise gap, and the verdict.
struct SpectrumCurve {
  std::vector<double> alphas;
  std::vector<double> lhs;
  std::vector<double> rhs_partition;
  std::vector<double> rhs_H;
  std::vector<double> rhs_K;
  std::vector<double> worst_pair;
  double tolerance = 0.1;
  bool pass = false;
  std::string summary;
};

// Runs the three-way comparison on every alpha of the grid. Refuses
// systems without specification (SpecificationRequired) and alphas
// outside the open range of the level potential (invalid_argument).
// PASS means every row's worst pairwise gap is within the tolerance.
SpectrumCurve verify_theorem1(const SystemFamily& family, const PotentialRule& phi,
                              const PotentialRule& psi, std::span<const double> alpha_grid,
                              std::span<const MdimRungSpec> ladder,
                              const Theorem1Options& options = {});

}  // namespace mdimlab
