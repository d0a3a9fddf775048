#pragma once
// Shift-invariant measure models with exact cylinder masses, their
// entropies, and the covering-number entropy at a fixed scale: the
// minimal number of length-n cylinder families needed to capture all
// but delta of the mass, estimated from samples but counted exactly.
//
// Scale-normalized aggregates divide by |log eps| along a ladder, with
// the sequence of measures supplied by a declared constructive family.
// The abstract quantity takes a sup over all weak*-convergent sequences,
// which no finite procedure can search; everything returned here is a
// certified lower bound realized by the named family.

#include <cstdint>
#include <span>
#include <vector>

#include "mdimlab/symbolic.hpp"
#include "mdimlab/util.hpp"

namespace mdimlab {

struct MeasureModel {
  enum class Kind { Bernoulli, Markov, Mixture, Empirical };
  Kind kind = Kind::Bernoulli;

  std::vector<double> p;  // bernoulli symbol masses

  std::vector<std::vector<double>> rows;  // markov transition rows
  std::vector<double> pi;                 // markov stationary vector

  std::vector<double> weights;           // mixture
  std::vector<MeasureModel> components;  // mixture, ergodic pieces

  std::vector<Point> sample;  // empirical
  int sample_len = 0;         // usable prefix length per sampled point

  static MeasureModel bernoulli(std::vector<double> p);
  static MeasureModel markov(std::vector<std::vector<double>> rows, std::vector<double> pi);
  static MeasureModel mixture(std::vector<double> weights, std::vector<MeasureModel> components);
  static MeasureModel empirical(std::vector<Point> sample, int sample_len);

  int alphabet_size() const;

  // Probabilities sum to 1 within 1e-12, the stationary vector is
  // stationary, mixture weights are positive and the components are
  // ergodic kinds (no nested mixtures).
  void validate() const;

  // log mu([w]); -inf for null cylinders.
  double log_cylinder_mass(const Word& w) const;
};

// Cylinder partition of the symbolic space. Every depth-r cell has
// diameter 2^-r, which must sit below the declared bound.
struct PartitionSpec {
  int cylinder_depth = 1;
  double diameter_bound = 1.0;

  static PartitionSpec cylinders(int depth, double diameter_bound);
};

// -sum mu(C) log mu(C) over the cells, exact from cylinder masses.
// Empirical models do not assign exact masses and are rejected.
double partition_entropy(const MeasureModel& mu, const PartitionSpec& xi);

// Entropy rate against the iterated partition. Closed form for
// bernoulli and markov (independent of the cylinder depth), affine over
// mixtures; empirical models get a conditional plug-in estimate at the
// partition depth.
double dynamical_entropy(const MeasureModel& mu, const PartitionSpec& xi);

// log of the number of depth-r cylinders whose model mass reaches the
// threshold; -inf when none does. Exact count: single level for uniform
// models, binomial levels for two symbols, exact frequency levels for
// empirical samples, otherwise a sparse histogram walk over per-step
// log-probabilities quantized to a 1e-3 grid (the count is exact for
// the quantized masses, so a true mass can be misclassified only within
// depth * 5e-4 of the threshold). Mixtures are rejected; their counts
// are only ever estimated per component.
double log_covering_count(const MeasureModel& mu, int depth, double log_mass_threshold);

// log of the size of the smallest set of depth-r cylinders whose union
// mass reaches the target: cylinders taken in decreasing mass order,
// the boundary mass stratum entering only as far as the residual needs.
// Same exactness and quantization caveats as log_covering_count.
double log_minimal_covering_count(const MeasureModel& mu, int depth, double target_mass);

struct KatokEstimate {
  double epsilon = 0.5;
  double delta = 0.1;
  std::vector<int> n_ladder;
  std::vector<double> log_counts;  // log minimal covering count per horizon
  double rate = 0.0;               // slope of the debiased counts over the ladder
  int sample_size = 0;
  std::uint64_t seed = 0;
};

// Covering-number entropy at scale eps and mass defect delta. For each
// horizon n the minimal family of depth n + offset(eps) cylinders
// covering 1 - delta of the measure is counted exactly (greedy by mass
// is optimal for cylinder covers). Modeling word log-masses as Gaussian
// with dispersion sigma_n estimated from the sample, the count equals
// exp(n h + sigma_n^2 / 2) times the normal upper tail beyond
// sigma_n - Phi^-1(1-delta); subtracting both factors leaves a line of
// slope h, exactly so when the dispersion degenerates (uniform and
// point masses). The rate is the least-squares slope over the whole
// ladder; dense ladders average out the wobble of exact counts across
// discrete mass strata. Mixtures are estimated per ergodic component
// and averaged. Refuses sample sizes below 10/delta.
KatokEstimate katok_entropy(const MeasureModel& mu, double epsilon, double delta,
                            std::span<const int> n_ladder, int sample_size, std::uint64_t seed);

// Declared constructive family (mu_eps) converging to the limit model.
struct MeasureFamily {
  enum class Kind { Constant, RefinedGridUniform };
  Kind kind = Kind::Constant;

  static MeasureFamily constant();
  static MeasureFamily refined_grid_uniform();

  // Constant: the limit itself. RefinedGridUniform: the uniform
  // bernoulli model on the scale's refined alphabet (the limit model is
  // not consulted).
  MeasureModel at(double eps, const MeasureModel& limit) const;
};

// Tail-window max over the ladder of katok rate / |log eps| with the
// family's measure at each scale. A lower bound for the sup over all
// admissible sequences; the shipped families attain it on the uniform
// refined-grid systems used by the acceptance runs.
double H_delta_K(const MeasureModel& mu, double delta, std::span<const double> epsilon_ladder,
                 const MeasureFamily& family, int sample_size = 8192, std::uint64_t seed = 1);

// Same ladder protocol with the partition-entropy route: the inf over
// partitions finer than eps is attained by cylinders at the resolution
// depth, where the entropy rate is closed-form. Lower bound as above.
double H_of_mu(const MeasureModel& mu, std::span<const double> epsilon_ladder,
               const MeasureFamily& family);

}  // namespace mdimlab
