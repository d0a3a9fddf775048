#pragma once
// Flows built over a symbolic base by a strictly positive roof: a
// point is a base orbit plus a height below the roof, and the flow
// advances the height, wrapping onto the shifted orbit each time the
// roof is reached. Heights and step sizes live on the roof's rational
// lattice, so wraps, return times, and the semigroup law are exact
// integer arithmetic. Dimension quantities of the flow are reduced to
// the base: observables integrate fiberwise to base potentials,
// invariant measures divide by the mean roof, flow balls embed into
// base ball products, and the flow dimension is certified from below
// by the root of t -> mdim(-t rho).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdimlab/counting.hpp"
#include "mdimlab/levelsets.hpp"
#include "mdimlab/measures.hpp"
#include "mdimlab/symbolic.hpp"

namespace mdimlab {

// Roof over the base system. Values must be strictly positive and sit
// on a rational lattice; both are checked at construction. K1 bounds
// the spread of n-step roof sums between orbits that track each other
// for n+1 steps: |S_n rho(x) - S_n rho(y)| <= K1 * d(f^n x, f^n y)
// whenever d_{n+1}(x, y) is below the metric's top separation scale.
struct RoofFunction {
  ResolvedPotential rho;
  double inf_rho = 1.0;
  double sup_rho = 1.0;
  double K1 = 1.0;
};

struct SuspensionFlow {
  SymbolicSystem base;
  RoofFunction roof;
};

SuspensionFlow make_suspension(SymbolicSystem base, const Potential& roof);

// Roof value at the orbit's current window, as exact numerator over
// the lattice denominator and as a double.
std::int64_t roof_num(const SuspensionFlow& susp, const Point& x);
double roof_value(const SuspensionFlow& susp, const Point& x);

// Point of the quotient space: 0 <= height < roof(base), the height
// stored as a numerator over the roof's lattice denominator.
struct SuspensionPoint {
  Point base;
  std::int64_t height_num = 0;
};

double height_of(const SuspensionFlow& susp, const SuspensionPoint& p);

// Wraps any nonnegative height into [0, roof(base)), shifting the
// base once per wrap; idempotent on already-normalized points.
SuspensionPoint normalize(const SuspensionFlow& susp, SuspensionPoint p);
SuspensionPoint make_suspension_point(const SuspensionFlow& susp, Point base,
                                      std::int64_t height_num);

// Advances the point by flow time t >= 0. t must land on the roof's
// height lattice, which keeps the semigroup law exact; times off the
// lattice are refused rather than rounded.
SuspensionPoint flow_step(const SuspensionFlow& susp, const SuspensionPoint& p, double t);

// Equality of normalized points through the first `depth` base
// coordinates; heights compare exactly.
bool same_suspension_point(const SuspensionFlow& susp, const SuspensionPoint& a,
                           const SuspensionPoint& b, int depth = 64);

// Sampled audit of the roof's K1 bound: pairs (x, y) with y tracking
// x for n+1 steps at scale epsilon, worst observed ratio
// |S_n rho(x) - S_n rho(y)| / (K1 * d(f^n x, f^n y)). pass means no
// sampled pair exceeded 1.
struct RegularityCheck {
  double epsilon = 0.25;
  int n = 1;
  long long pairs = 0;
  double worst_ratio = 0.0;
  bool pass = false;
};

RegularityCheck verify_roof_regularity(const SuspensionFlow& susp, double epsilon, int n,
                                       long long pairs, std::uint64_t seed);

// Ball of the flow: points whose forward flow stays epsilon-close to
// the center's in the fiberwise chart up to time T.
struct FlowBall {
  SuspensionPoint center;
  double T = 1.0;
  double epsilon = 0.25;
};

// Membership sampled over a time grid (plus both orbits' wrap times):
// at each sampled time the moved point must lie in the center's
// fiber-chart neighborhood, the height matched through the roof ratio
// and the base distance blended between the window's two ends.
bool flow_ball_contains(const SuspensionFlow& susp, const FlowBall& ball,
                        const SuspensionPoint& q, int time_samples = 64);

// Product-set audit for flow balls: with K = 4 sup rho / inf rho and
// n the last return count fitting below T, every sampled member of
// the ball must have its base in the (n, K eps) ball of the center's
// base and its height within K eps of the zero section (on either
// side, read through the wrap). Requires K eps < inf rho and a center
// height below eps.
struct InclusionCheck {
  int n = 0;
  double K = 1.0;
  double eps = 0.25;
  long long attempts = 0;
  long long members = 0;
  long long violations = 0;
  double worst_base = 0.0;    // largest sampled d_n to the center base
  double worst_height = 0.0;  // largest sampled |height chart value|
  bool pass = false;
};

InclusionCheck check_flow_ball_inclusion(const SuspensionFlow& susp, const FlowBall& ball,
                                         long long target_members, std::uint64_t seed);

// Observable on the quotient space in separated form: a sum of terms
// base(x) * height^degree, which integrates over fibers in closed
// form. Degrees are small nonnegative integers.
struct FlowPotential {
  struct Term {
    Potential base = Potential::constant(1.0);
    int height_degree = 0;
  };
  std::vector<Term> terms;

  static FlowPotential constant(double c);
  static FlowPotential base_only(Potential p);
  static FlowPotential height_power(int degree, double coeff = 1.0);
  FlowPotential& add_term(Potential base, int degree);

  void validate() const;
};

// Fiber integral int_0^{roof(x)} Phi(x, t) dt as a base potential;
// exact on the lattice (each term contributes base * roof^(d+1)/(d+1)).
Potential associated_potential(const SuspensionFlow& susp, const FlowPotential& Phi);

// int pot dmu over exact cylinder masses at the potential's depth.
double measure_integral(const SymbolicSystem& sys, const MeasureModel& mu,
                        const ResolvedPotential& pot);

// Integral of Phi against the measure the base measure induces on the
// quotient: fiber integral over mean roof.
double induced_measure_integral(const MeasureModel& mu, const SuspensionFlow& susp,
                                const FlowPotential& Phi);

// Entropy of the induced measure under the time-one map: base entropy
// rate over mean roof.
double abramov_entropy(const SuspensionFlow& susp, const MeasureModel& mu);

// Scale-normalized entropy of the induced measure, measured on the
// time-one map by direct counting: cylinder-by-interval partitions
// whose cells the unit step permutes deterministically in the height
// direction while the base refines once per wrap, the entropy rate
// read off as an exact difference across one full wrap period. The
// roof must be constant (rational); the model must assign exact
// cylinder masses with entropy affine in the depth (bernoulli or
// markov). Ladder protocol matches H_of_mu: per-scale rate over
// |log eps|, tail-window max.
double flow_H_of_mu(const SystemFamily& systems, const PotentialRule& roof,
                    const MeasureModel& mu, std::span<const double> epsilon_ladder,
                    const MeasureFamily& family);

// Root certificate for the scaling time of the roof: beta is the
// bisection midpoint of t -> upper_mdim(-t rho) crossing zero, and a
// certified lower bound for the dimension of the flow over any set
// carrying that dimension curve. The probe curve comes along for
// plotting and audit.
struct BetaCertificate {
  double beta = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double value_lo = 0.0;  // extrapolated mdim at the bracket ends
  double value_hi = 0.0;
  double tol = 1e-3;
  bool bracketed = false;
  std::vector<double> curve_t;      // every probed t, increasing
  std::vector<double> curve_value;  // extrapolated mdim at each probe

  double value() const { return beta; }
  std::string certificate_json() const;
};

BetaCertificate beta_root(const SystemFamily& family, const PotentialRule& roof,
                          const SubsetSpec& within, std::span<const MdimRungSpec> ladder,
                          double tol = 1e-3);

// Ratio analogue of the level window: a cylinder qualifies when some
// point of it has S_L phi / S_L rho within delta of alpha.
struct RatioWindow {
  double alpha = 0.5;
  double delta = 0.05;

  void validate() const;
};

// Partition function restricted to the ratio window, same bracket and
// weight conventions as level_restricted_P. Qualification enumerates
// the window's cylinders outright (with their extensions), so horizons
// are bounded by the alphabet budget; empty windows report -inf.
LogBracket ratio_restricted_P(const SymbolicSystem& sys, const ResolvedPotential& phi,
                              const ResolvedPotential& rho, const ResolvedPotential& psi,
                              const RatioWindow& window, int n, double eps);

// Lower bound for the dimension of the flow over the ratio level set
// S_n phi / S_n rho -> alpha: the unique beta at which the
// ratio-constrained variational value sup{ H(mu) - beta int rho :
// int phi = alpha int rho } crosses zero, found by bisection over
// closed-form rung optimizers. Reported strictly as a lower bound;
// alphas no product measure attains, or whose ratio window is empty
// at the probe depth, come back infeasible with value -inf.
struct FlowLevelBound {
  double alpha = 0.5;
  bool feasible = false;
  double beta = kNegInf;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> rung_epsilons;
  std::vector<char> rung_feasible;
  std::string note;

  double value() const { return beta; }
};

struct FlowLevelOptions {
  double delta = 0.05;   // ratio window half-width for the emptiness probe
  int probe_depth = 10;  // probe word depth, clamped to the alphabet budget
  double root_tol = 1e-6;
};

FlowLevelBound flow_level_mdim_lower_bound(const SystemFamily& family, const PotentialRule& roof,
                                           const FlowPotential& Phi, double alpha,
                                           std::span<const double> epsilon_ladder,
                                           const FlowLevelOptions& options = {});

}  // namespace mdimlab
