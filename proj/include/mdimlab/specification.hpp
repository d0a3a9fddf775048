#pragma once

// Executable gluing: splice finite windows of orbits into one point,
// and build points whose Birkhoff averages are pinned near a target
// level, with a per-level certificate that an independent recomputation
// can check. Everything here works on the assembled symbols; there is
// no sampling error to hide, so certificates either hold exactly or the
// construction refuses.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdimlab/symbolic.hpp"

namespace mdimlab {

// One block to reproduce: the first `length` coordinates of `point`.
struct GluingSegment {
  Point point;
  int length = 1;
};

// Copy the segments in order with `gap` filler symbols between
// consecutive blocks. epsilon is the accuracy the caller intends to
// shadow at; it enters validation only.
struct GluingRequest {
  std::vector<GluingSegment> segments;
  int gap = 0;
  double epsilon = 0.5;

  void validate(const SymbolicSystem& sys) const;
};

// Where each copied block starts inside the glued point, plus the
// total assembled length.
struct GluingLayout {
  std::vector<long long> offsets;
  long long total = 0;
};

// Assemble the point. Fillers are the lexicographically smallest words
// that keep every window across a junction allowed; if no filler of
// exactly `gap` symbols works at some junction the request fails with
// the junction named (the declared gap is too small for this system).
// The tail beyond the last block continues the last segment's own
// orbit, so the final window is shadowed with Bowen distance zero.
Point glue(const SymbolicSystem& sys, const GluingRequest& req, GluingLayout* layout = nullptr);

// Distance between the window of x starting at `offset` and the first
// `length` coordinates of y, measured inside the window only. For both
// metrics here the sup over shifts is attained at a disagreeing
// coordinate, so this equals the largest single-coordinate distance;
// it is zero exactly when the window was copied verbatim, and it
// lower-bounds the Bowen distance of the shifted points.
double window_shadow_distance(const SymbolicSystem& sys, const Point& x, long long offset,
                              const Point& y, int length);

// Plan for a leveled build: level k concatenates block_counts[k-1]
// words of length word_lens[k-1], each with Birkhoff mean within
// deltas[k-1] of the target, and every junction (between blocks and
// between levels) carries the system's connector gap. Accuracy halves
// per level: level k works at epsilon / 2^(k-1).
struct GluingSchedule {
  double epsilon = 0.25;
  std::vector<int> word_lens;
  std::vector<int> block_counts;
  std::vector<double> deltas;

  int levels() const { return static_cast<int>(word_lens.size()); }
  void validate(const SymbolicSystem& sys) const;

  // Assembled prefix length after each level. Strictly increasing.
  std::vector<long long> times(const SymbolicSystem& sys) const;
};

// What one level of the build promises and what the emitted prefix
// actually does. envelope is the bound the construction's bookkeeping
// certifies for |S_t(phi)/t - alpha|: in-block windows contribute at
// most their qualification half-width, every other window start (gaps,
// junction straddles, the run-out past the last block) is charged the
// worst pointwise deviation the potential allows. mean_at_t and
// dev_at_t are recomputed from the emitted symbols, not carried over
// from the sampler.
struct LevelCertificate {
  int level = 0;
  int word_len = 0;
  int block_count = 0;
  int gap = 0;
  double delta = 0.0;
  double epsilon_k = 0.0;
  double worst_word_dev = 0.0;
  long long t = 0;
  double mean_at_t = 0.0;
  double dev_at_t = 0.0;
  double envelope = 0.0;
};

struct KAlphaPoint {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  Word prefix;   // the assembled symbols, length = last level time
  Point point;   // prefix extended to an orbit deterministically
  std::vector<LevelCertificate> levels;
  bool pass = false;  // every dev_at_t within its envelope

  std::string certificate_json() const;
};

// Draw the blocks uniformly from the qualifying words (exact counting
// over the potential's value lattice), splice them with deterministic
// seeded connectors, and certify the result level by level. Blocks are
// drawn from words all of whose grams sit on a two-sided run, so a
// connector of the declared gap always exists between consecutive
// blocks. Throws, naming the level, when no word of the requested
// length has mean within delta of alpha; requires a potential on a
// rational value lattice so the counting stays exact.
KAlphaPoint build_K_alpha_point(const SymbolicSystem& sys, const ResolvedPotential& phi,
                                double alpha, const GluingSchedule& schedule,
                                std::uint64_t seed);

// A family of such points whose first blocks are pairwise separated at
// the schedule's epsilon; the copied windows preserve that separation
// at every level time, which is what makes the family usable as a
// packing witness. Draws are rejected until separation holds; throws
// when the qualifying words cannot support `count` separated members.
std::vector<KAlphaPoint> build_K_alpha_family(const SymbolicSystem& sys,
                                              const ResolvedPotential& phi, double alpha,
                                              const GluingSchedule& schedule, std::uint64_t seed,
                                              int count);

struct MembershipCheck {
  long long m = 0;
  double mean = 0.0;
  double deviation = 0.0;
  double bound = 0.0;
  bool ok = false;
};

struct MembershipReport {
  std::vector<MembershipCheck> checks;
  bool pass = false;
  double worst_margin = 0.0;  // max over checks of deviation - bound
};

// Evaluate |S_m(phi)/m - alpha| at each checkpoint against the paired
// bound. Checkpoints must be positive and strictly increasing.
MembershipReport verify_membership_trend(const SymbolicSystem& sys, const ResolvedPotential& phi,
                                         double alpha, const Point& x,
                                         std::span<const long long> checkpoints,
                                         std::span<const double> bounds);

// Same check against a built point's own certificate: checkpoints are
// the level times, bounds the certified envelopes.
MembershipReport verify_membership_trend(const SymbolicSystem& sys, const ResolvedPotential& phi,
                                         const KAlphaPoint& built);

}  // namespace mdimlab
