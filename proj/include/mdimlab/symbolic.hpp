#pragma once

// One-sided symbolic systems over a finite alphabet, with the two shift
// metrics used throughout: the 2-adic ultrametric and the weighted sup
// metric over the embedded alphabet grid. Dynamical balls at scale eps
// are bracketed by cylinders; for the ultrametric the bracket collapses
// and the ball *is* a cylinder.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdimlab/util.hpp"

namespace mdimlab {

using Sym = std::uint8_t;
using Word = std::vector<Sym>;

std::string word_str(std::span<const Sym> w);
Word word_from_str(const std::string& s, int alphabet_size);

enum class MetricKind { Ultrametric2adic, SupWeightedGrid };

struct Point;

struct SymbolicSystem {
  int alphabet_size = 2;
  MetricKind metric_kind = MetricKind::Ultrametric2adic;
  std::vector<Word> forbidden_words;
  bool one_sided = true;

  static SymbolicSystem full_shift(int k, MetricKind m);
  static SymbolicSystem sft(int k, MetricKind m, std::vector<Word> forbidden);

  double embed(Sym s) const;  // s / (k-1), the alphabet grid in [0,1]
  double min_embedding_gap() const;

  // Largest distance between two points. 1 for both metrics when k >= 2.
  double diameter() const;

  // Number of leading coordinates per shift whose agreement is *implied*
  // by d < eps (any single disagreement there already costs >= eps).
  // Separated-set constructions live at cylinder depth n-1+this.
  int forced_agreement_len(double eps) const;

  // Number of leading coordinates per shift that *suffice* for d < eps
  // (everything beyond them cannot add up to eps). Spanning/covering
  // constructions live at cylinder depth n-1+this. Equal to
  // forced_agreement_len for the ultrametric.
  int ball_agreement_len(double eps) const;

  // Cylinder depth offsets over the time horizon n: realized cylinder
  // families sit at depth n + offset.
  int separation_offset(double eps) const { return forced_agreement_len(eps) - 1; }
  int covering_offset(double eps) const { return ball_agreement_len(eps) - 1; }

  // Smallest r with diam(depth-r cylinder) < eps; partitions into
  // depth-r cylinders have mesh below eps.
  int partition_depth(double eps) const { return ball_agreement_len(eps); }

  // True if w contains no forbidden factor.
  bool factor_allowed(std::span<const Sym> w) const;

  int max_forbidden_len() const;

  // Specification: full shifts glue with no gap; a subshift of finite
  // type glues when its transition structure is primitive.
  bool has_specification() const;
  int specification_gap() const;  // connector length in symbols

  // Deterministic eventually periodic point extending w, preferring
  // small symbols. Throws if w is not allowed or has no infinite
  // continuation.
  Point extend_word_to_point(const Word& w) const;

  void validate() const;
};

// Eventually periodic point: explicit prefix, then a periodic or
// constant tail. Everything downstream only ever reads finitely many
// coordinates, so this class is closed under all the operations here.
struct Point {
  Word prefix;
  enum class Tail { Constant, Periodic };
  Tail tail_kind = Tail::Constant;
  Word tail{0};  // constant: single symbol; periodic: repeated block

  static Point constant(Sym s);
  static Point periodic(Word block);
  static Point word_then_constant(Word prefix, Sym s);
  static Point word_then_periodic(Word prefix, Word block);

  Sym at(std::size_t i) const {
    if (i < prefix.size()) return prefix[i];
    std::size_t j = i - prefix.size();
    return tail_kind == Tail::Constant ? tail[0] : tail[j % tail.size()];
  }

  std::size_t eventual_period() const { return tail_kind == Tail::Constant ? 1 : tail.size(); }

  Point shifted(std::size_t j) const;

  Word first(std::size_t len) const;

  bool valid_for(const SymbolicSystem& sys) const;
};

// Potentials are functions of finitely many leading coordinates.
// coordinate_affine(a, b) reads a single symbol through the embedding;
// cylinder(depth, table) is an explicit table over depth-r words.
struct Potential {
  enum class Kind { Zero, Constant, CoordinateAffine, Cylinder };
  Kind kind = Kind::Zero;
  double c = 0.0;                // Constant
  double a = 1.0, b = 0.0;       // CoordinateAffine: a*embed(x0)+b
  int depth = 1;                 // Cylinder
  std::vector<double> table;     // size k^depth, index MSB-first

  static Potential zero();
  static Potential constant(double c);
  static Potential coordinate_affine(double a, double b);
  static Potential cylinder(int depth, std::vector<double> table);
};

// Potential bound to a concrete system: a flat table plus, when every
// value is rational, an integer lattice (num[i]/den) used for exact
// Birkhoff sums and exact level-set bucketing.
struct ResolvedPotential {
  int depth = 1;
  std::vector<double> table;
  bool has_lattice = false;
  std::vector<std::int64_t> lattice_num;
  std::int64_t lattice_den = 1;

  double value(std::uint32_t word_index) const { return table[word_index]; }
  double min_value() const;
  double max_value() const;
};

ResolvedPotential resolve(const Potential& p, const SymbolicSystem& sys);

// Pointwise multiple of a resolved potential. The integer lattice is
// dropped: scale factors are generally irrational.
ResolvedPotential scale_potential(const ResolvedPotential& pot, double factor);

// Distance between full orbits' i-th coordinates onward; exact for
// eventually periodic points.
double point_distance(const SymbolicSystem& sys, const Point& x, const Point& y);

// d_n(x,y) = max over the first n shifts.
double bowen_distance(const SymbolicSystem& sys, const Point& x, const Point& y, int n);

// Sum of pot over the first n shifts of x. Exact (integer lattice)
// whenever the potential table is rational, which makes the cocycle
// identity S_{n+m} = S_n + S_m(shift^n .) hold with no tolerance.
double birkhoff_sum(const SymbolicSystem& sys, const ResolvedPotential& pot, const Point& x,
                    int n);

// Integer numerator of the same sum over pot.lattice_den; the form the
// cocycle identity holds in exactly. Requires pot.has_lattice.
std::int64_t birkhoff_sum_num(const SymbolicSystem& sys, const ResolvedPotential& pot,
                              const Point& x, int n);

// sup{|pot(x)-pot(y)| : d(x,y) < eps}; exact for cylinder tables.
double variation_bound(const SymbolicSystem& sys, const ResolvedPotential& pot, double eps);

struct BowenBallSpec {
  Point center;
  int n = 1;
  double eps = 0.25;
};

struct DynamicalBallCylinder {
  bool whole_space = false;  // eps >= diameter
  Word word;                 // center's symbols to depth_inner
  int depth_inner = 0;       // [word] is contained in the ball
  int depth_forced = 0;      // the ball is contained in [word_0..word_{forced-1}]
  bool exact = false;        // bracket collapsed (ultrametric)
};

DynamicalBallCylinder dynamical_ball_cylinder(const SymbolicSystem& sys,
                                              const BowenBallSpec& spec);

// Subsets that counting and cover machinery understand natively.
// Birkhoff-window subsets are layered on top by the level-set module.
struct SubsetSpec {
  enum class Kind { WholeSpace, Cylinder, SinglePoint };
  Kind kind = Kind::WholeSpace;
  Word cylinder;
  Point point;

  static SubsetSpec whole();
  static SubsetSpec in_cylinder(Word w);
  static SubsetSpec single_point(Point p);
};

// Rung-indexed families: a fixed system for every scale, or the grid
// family whose alphabet refines as ceil(1/eps) so that counting at
// scale eps sees a matching symbol resolution.
struct PotentialRule {
  enum class Kind { Zero, Constant, CoordinateAffine, CylinderFixed };
  Kind kind = Kind::Zero;
  double c = 0.0;
  double a = 1.0, b = 0.0;
  Potential fixed;

  static PotentialRule zero();
  static PotentialRule constant(double c);
  static PotentialRule coordinate_affine(double a, double b);
  static PotentialRule cylinder_fixed(Potential p);

  Potential materialize(const SymbolicSystem& sys) const;
};

struct SystemFamily {
  enum class Kind { Fixed, RefinedGrid };
  Kind kind = Kind::Fixed;
  SymbolicSystem fixed_system;
  MetricKind refined_metric = MetricKind::SupWeightedGrid;

  static SystemFamily fixed(SymbolicSystem sys);
  static SystemFamily refined_grid(MetricKind m = MetricKind::SupWeightedGrid);

  SymbolicSystem at(double eps) const;
};

}  // namespace mdimlab
