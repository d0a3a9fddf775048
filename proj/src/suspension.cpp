#include "mdimlab/suspension.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "mdimlab/rng.hpp"

namespace mdimlab {

namespace {

std::uint32_t window_index(const SymbolicSystem& sys, const Point& x, long long shift, int depth) {
  std::uint32_t idx = 0;
  for (int d = 0; d < depth; ++d)
    idx = idx * static_cast<std::uint32_t>(sys.alphabet_size) +
          x.at(static_cast<std::size_t>(shift + d));
  return idx;
}

// Tracking pairs keep every length-(depth) roof window identical until
// the landing coordinate, so at most this many windows can differ once
// the distance at the landing coordinate is 2^-u; the worst ratio over
// u >= 1 is the K1 the metric needs.
double window_spread_factor(int depth) {
  double best = 0.0;
  for (int u = 1; u <= depth - 2; ++u)
    best = std::max(best, static_cast<double>(depth - 1 - u) * std::ldexp(1.0, u));
  return best;
}

std::int64_t lattice_time(const SuspensionFlow& susp, double t, const char* what) {
  double scaled = t * static_cast<double>(susp.roof.rho.lattice_den);
  double rounded = std::nearbyint(scaled);
  if (std::abs(scaled - rounded) > 1e-9 * std::max(1.0, std::abs(scaled)) ||
      std::abs(rounded) > 9e15)
    throw std::invalid_argument(std::string(what) +
                                " must land on the roof's height lattice");
  return static_cast<std::int64_t>(rounded);
}

SuspensionPoint advance_num(const SuspensionFlow& susp, SuspensionPoint p, std::int64_t t_num) {
  p.height_num += t_num;
  return normalize(susp, p);
}

// Uniform draw of an allowed continuation, one symbol at a time; the
// prefix is assumed allowed. Returns nothing when a dead end blocks
// every symbol.
std::optional<Word> random_allowed_extension(const SymbolicSystem& sys, const Word& prefix,
                                             int extra, const CounterRng& rng,
                                             std::uint64_t& ctr) {
  Word w = prefix;
  const std::size_t q = static_cast<std::size_t>(std::max(1, sys.max_forbidden_len()));
  for (int i = 0; i < extra; ++i) {
    Word ok;
    for (int s = 0; s < sys.alphabet_size; ++s) {
      w.push_back(static_cast<Sym>(s));
      std::size_t win = std::min(q, w.size());
      if (sys.factor_allowed(std::span<const Sym>(w.data() + (w.size() - win), win)))
        ok.push_back(static_cast<Sym>(s));
      w.pop_back();
    }
    if (ok.empty()) return std::nullopt;
    w.push_back(ok[rng.below(ctr++, ok.size())]);
  }
  return w;
}

PotentialRule scale_rule(const PotentialRule& rule, double factor) {
  PotentialRule s = rule;
  switch (s.kind) {
    case PotentialRule::Kind::Zero:
      break;
    case PotentialRule::Kind::Constant:
      s.c *= factor;
      break;
    case PotentialRule::Kind::CoordinateAffine:
      s.a *= factor;
      s.b *= factor;
      break;
    case PotentialRule::Kind::CylinderFixed:
      switch (s.fixed.kind) {
        case Potential::Kind::Zero:
          break;
        case Potential::Kind::Constant:
          s.fixed.c *= factor;
          break;
        case Potential::Kind::CoordinateAffine:
          s.fixed.a *= factor;
          s.fixed.b *= factor;
          break;
        case Potential::Kind::Cylinder:
          for (double& v : s.fixed.table) v *= factor;
          break;
      }
      break;
  }
  return s;
}

void check_ladder(std::span<const double> eps_ladder, const char* who) {
  if (eps_ladder.empty()) throw std::invalid_argument(std::string(who) + ": empty scale ladder");
  for (std::size_t r = 0; r < eps_ladder.size(); ++r) {
    if (!(eps_ladder[r] > 0.0 && eps_ladder[r] < 1.0))
      throw std::invalid_argument(std::string(who) + ": scales must lie in (0,1)");
    if (r > 0 && eps_ladder[r] >= eps_ladder[r - 1])
      throw std::invalid_argument(std::string(who) + ": scale ladder must decrease strictly");
  }
}

}  // namespace

SuspensionFlow make_suspension(SymbolicSystem base, const Potential& roof) {
  base.validate();
  SuspensionFlow susp;
  RoofFunction& rf = susp.roof;
  rf.rho = resolve(roof, base);
  if (!(rf.rho.min_value() > 0.0))
    throw std::invalid_argument("make_suspension: the roof must be strictly positive");
  if (!rf.rho.has_lattice)
    throw std::invalid_argument(
        "make_suspension: roof heights must sit on a rational lattice for exact flow "
        "arithmetic");
  rf.inf_rho = rf.rho.min_value();
  rf.sup_rho = rf.rho.max_value();
  double osc = rf.sup_rho - rf.inf_rho;
  double spread = window_spread_factor(rf.rho.depth);
  double unit_cost =
      base.metric_kind == MetricKind::Ultrametric2adic ? 1.0 : base.min_embedding_gap();
  rf.K1 = std::max(1.0, osc * spread / unit_cost);
  susp.base = std::move(base);
  return susp;
}

std::int64_t roof_num(const SuspensionFlow& susp, const Point& x) {
  return susp.roof.rho.lattice_num[window_index(susp.base, x, 0, susp.roof.rho.depth)];
}

double roof_value(const SuspensionFlow& susp, const Point& x) {
  return static_cast<double>(roof_num(susp, x)) /
         static_cast<double>(susp.roof.rho.lattice_den);
}

double height_of(const SuspensionFlow& susp, const SuspensionPoint& p) {
  return static_cast<double>(p.height_num) / static_cast<double>(susp.roof.rho.lattice_den);
}

SuspensionPoint normalize(const SuspensionFlow& susp, SuspensionPoint p) {
  if (p.height_num < 0)
    throw std::invalid_argument("normalize: heights are nonnegative on a forward flow");
  long long guard = 0;
  std::int64_t r = roof_num(susp, p.base);
  while (p.height_num >= r) {
    p.height_num -= r;
    p.base = p.base.shifted(1);
    r = roof_num(susp, p.base);
    if (++guard > (1ll << 22))
      throw std::invalid_argument("normalize: flow time exceeds the wrap budget");
  }
  return p;
}

SuspensionPoint make_suspension_point(const SuspensionFlow& susp, Point base,
                                      std::int64_t height_num) {
  if (!base.valid_for(susp.base))
    throw std::invalid_argument("make_suspension_point: base point leaves the subshift");
  return normalize(susp, SuspensionPoint{std::move(base), height_num});
}

SuspensionPoint flow_step(const SuspensionFlow& susp, const SuspensionPoint& p, double t) {
  if (t < 0.0)
    throw std::invalid_argument("flow_step: the flow only advances over a one-sided base");
  return advance_num(susp, p, lattice_time(susp, t, "flow_step: times"));
}

bool same_suspension_point(const SuspensionFlow& susp, const SuspensionPoint& a,
                           const SuspensionPoint& b, int depth) {
  (void)susp;
  if (a.height_num != b.height_num) return false;
  return a.base.first(static_cast<std::size_t>(depth)) ==
         b.base.first(static_cast<std::size_t>(depth));
}

RegularityCheck verify_roof_regularity(const SuspensionFlow& susp, double epsilon, int n,
                                       long long pairs, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("verify_roof_regularity: n must be >= 1");
  double eps_top = susp.base.metric_kind == MetricKind::Ultrametric2adic
                       ? 1.0
                       : susp.base.min_embedding_gap();
  if (!(epsilon > 0.0 && epsilon <= eps_top))
    throw std::invalid_argument(
        "verify_roof_regularity: the scale must not exceed the top separation scale");
  RegularityCheck out;
  out.epsilon = epsilon;
  out.n = n;
  const SymbolicSystem& sys = susp.base;
  const int depth = susp.roof.rho.depth;
  CounterRng rng(seed, 0);
  std::uint64_t ctr = 0;
  const int body = n + depth + 24;
  long long attempts = 0;
  bool ok = true;
  while (out.pairs < pairs && attempts < 64 * std::max<long long>(pairs, 1)) {
    ++attempts;
    auto xw = random_allowed_extension(sys, {}, body, rng, ctr);
    if (!xw) continue;
    // y copies x past the landing coordinate, then continues freely
    int agree = n + 1 + static_cast<int>(rng.below(ctr++, 17));
    auto yw = random_allowed_extension(
        sys, Word(xw->begin(), xw->begin() + std::min<std::ptrdiff_t>(agree, body)),
        std::max(0, body - agree), rng, ctr);
    if (!yw) continue;
    Point x, y;
    try {
      x = sys.extend_word_to_point(*xw);
      y = sys.extend_word_to_point(*yw);
    } catch (const std::exception&) {
      continue;
    }
    if (!(bowen_distance(sys, x, y, n + 1) < epsilon)) continue;
    ++out.pairs;
    double lhs = std::abs(birkhoff_sum(sys, susp.roof.rho, x, n) -
                          birkhoff_sum(sys, susp.roof.rho, y, n));
    double d_land = point_distance(sys, x.shifted(static_cast<std::size_t>(n)),
                                   y.shifted(static_cast<std::size_t>(n)));
    if (d_land == 0.0) {
      if (lhs > 0.0) {
        ok = false;
        out.worst_ratio = std::numeric_limits<double>::infinity();
      }
      continue;
    }
    double ratio = lhs / (susp.roof.K1 * d_land);
    out.worst_ratio = std::max(out.worst_ratio, ratio);
    if (ratio > 1.0 + 1e-12) ok = false;
  }
  out.pass = ok && out.pairs == pairs;
  return out;
}

bool flow_ball_contains(const SuspensionFlow& susp, const FlowBall& ball,
                        const SuspensionPoint& q, int time_samples) {
  if (time_samples < 2) throw std::invalid_argument("flow_ball_contains: need two time samples");
  if (!(ball.epsilon > 0.0)) throw std::domain_error("flow_ball_contains: eps must be positive");
  const std::int64_t T_num = lattice_time(susp, ball.T, "flow_ball_contains: horizons");
  if (T_num < 0) throw std::invalid_argument("flow_ball_contains: horizons are nonnegative");
  SuspensionPoint c0 = normalize(susp, ball.center);
  SuspensionPoint q0 = normalize(susp, q);

  std::set<std::int64_t> ts;
  for (int i = 0; i < time_samples; ++i)
    ts.insert(T_num * static_cast<std::int64_t>(i) / (time_samples - 1));
  auto add_wraps = [&](const SuspensionPoint& p) {
    Point b = p.base;
    std::int64_t acc = roof_num(susp, b) - p.height_num;
    int guard = 0;
    while (acc <= T_num && guard < 4096) {
      ts.insert(acc);
      if (acc > 0) ts.insert(acc - 1);
      b = b.shifted(1);
      acc += roof_num(susp, b);
      ++guard;
    }
  };
  add_wraps(c0);
  add_wraps(q0);

  const double den = static_cast<double>(susp.roof.rho.lattice_den);
  for (std::int64_t t : ts) {
    SuspensionPoint ct = advance_num(susp, c0, t);
    SuspensionPoint qt = advance_num(susp, q0, t);
    std::int64_t rx = roof_num(susp, ct.base);
    std::int64_t ry = roof_num(susp, qt.base);
    // height match through the roof ratio: the candidate's horizontal
    // segment passes the center's fiber at t* = u * rho(x)/rho(y)
    double gap = std::abs(static_cast<double>(ct.height_num) * static_cast<double>(ry) -
                          static_cast<double>(qt.height_num) * static_cast<double>(rx));
    if (!(gap < ball.epsilon * den * static_cast<double>(ry))) return false;
    double w = static_cast<double>(qt.height_num) / static_cast<double>(ry);
    double blend = (1.0 - w) * point_distance(susp.base, ct.base, qt.base) +
                   w * point_distance(susp.base, ct.base.shifted(1), qt.base.shifted(1));
    if (!(blend < ball.epsilon)) return false;
  }
  return true;
}

InclusionCheck check_flow_ball_inclusion(const SuspensionFlow& susp, const FlowBall& ball,
                                         long long target_members, std::uint64_t seed) {
  if (target_members < 1)
    throw std::invalid_argument("check_flow_ball_inclusion: need a positive member target");
  InclusionCheck out;
  out.eps = ball.epsilon;
  out.K = 4.0 * susp.roof.sup_rho / susp.roof.inf_rho;
  if (!(out.K * ball.epsilon < susp.roof.inf_rho))
    throw std::invalid_argument(
        "check_flow_ball_inclusion: the scale must satisfy K eps < inf rho");
  SuspensionPoint center = normalize(susp, ball.center);
  if (!(height_of(susp, center) < ball.epsilon))
    throw std::invalid_argument(
        "check_flow_ball_inclusion: the center must sit within eps of the zero section");
  const std::int64_t T_num = lattice_time(susp, ball.T, "check_flow_ball_inclusion: horizons");

  // last full return below the horizon
  const SymbolicSystem& sys = susp.base;
  std::int64_t acc = 0;
  int n = 0;
  Point b = center.base;
  while (true) {
    std::int64_t next = acc + roof_num(susp, b);
    if (next > T_num) break;
    acc = next;
    b = b.shifted(1);
    if (++n > (1 << 20))
      throw std::invalid_argument("check_flow_ball_inclusion: horizon exceeds the wrap budget");
  }
  if (n < 1)
    throw std::invalid_argument(
        "check_flow_ball_inclusion: the horizon must cover at least one return");
  out.n = n;

  const double den = static_cast<double>(susp.roof.rho.lattice_den);
  const double Keps = out.K * ball.epsilon;
  const int agree_base = n + std::max(1, sys.ball_agreement_len(ball.epsilon));
  const int body = agree_base + 24;
  CounterRng rng(seed, 0);
  std::uint64_t ctr = 0;
  Word cw = center.base.first(static_cast<std::size_t>(body));

  while (out.members < target_members && out.attempts < 64 * target_members) {
    ++out.attempts;
    bool wrap_probe = rng.below(ctr++, 8) == 0;
    Word prefix;
    if (wrap_probe) {
      // one symbol ahead of the center's orbit, exercising the chart
      // just below the zero section
      prefix.push_back(static_cast<Sym>(rng.below(ctr++, sys.alphabet_size)));
      prefix.insert(prefix.end(), cw.begin(), cw.end() - 1);
      std::size_t win = std::min<std::size_t>(prefix.size(),
                                              std::max(1, sys.max_forbidden_len()));
      if (!sys.factor_allowed(std::span<const Sym>(prefix.data(), win))) continue;
      if (!sys.factor_allowed(prefix)) continue;
    } else {
      int agree = agree_base + static_cast<int>(rng.below(ctr++, 9));
      prefix.assign(cw.begin(), cw.begin() + std::min<std::ptrdiff_t>(agree, body));
    }
    auto full = random_allowed_extension(sys, prefix, 16, rng, ctr);
    if (!full) continue;
    Point y;
    try {
      y = sys.extend_word_to_point(*full);
    } catch (const std::exception&) {
      continue;
    }
    std::int64_t ry = roof_num(susp, y);
    std::int64_t u;
    if (wrap_probe) {
      std::int64_t span = std::max<std::int64_t>(1, llround(2.0 * ball.epsilon * den));
      u = ry - 1 - static_cast<std::int64_t>(rng.below(ctr++, span));
      if (u < 0) continue;
    } else {
      std::int64_t hi = std::min<std::int64_t>(
          ry, center.height_num + std::max<std::int64_t>(1, llround(1.5 * ball.epsilon * den)));
      u = static_cast<std::int64_t>(rng.below(ctr++, static_cast<std::uint64_t>(hi)));
    }
    SuspensionPoint q{y, u};
    if (!flow_ball_contains(susp, ball, q, 64)) continue;
    ++out.members;

    // the product set reads the height through the chart nearest the
    // zero section: nonnegative via the member's own base, negative
    // via its shift (one-sided bases only realize the first branch)
    double eta_pos = static_cast<double>(u) / den;
    double eta_neg = static_cast<double>(u - ry) / den;
    double d_pos = bowen_distance(sys, center.base, y, n);
    double d_neg = bowen_distance(sys, center.base, y.shifted(1), n);
    bool ok_pos = eta_pos < Keps && d_pos < Keps;
    bool ok_neg = -eta_neg < Keps && d_neg < Keps;
    if (ok_pos || ok_neg) {
      double eta = ok_pos ? eta_pos : -eta_neg;
      double d = ok_pos ? d_pos : d_neg;
      out.worst_base = std::max(out.worst_base, d);
      out.worst_height = std::max(out.worst_height, eta);
    } else {
      ++out.violations;
      out.worst_base = std::max(out.worst_base, std::min(d_pos, d_neg));
      out.worst_height = std::max(out.worst_height, std::min(eta_pos, -eta_neg));
    }
  }
  out.pass = out.violations == 0 && out.members >= target_members;
  return out;
}

FlowPotential FlowPotential::constant(double c) {
  FlowPotential p;
  p.terms.push_back({Potential::constant(c), 0});
  return p;
}

FlowPotential FlowPotential::base_only(Potential p) {
  FlowPotential f;
  f.terms.push_back({std::move(p), 0});
  return f;
}

FlowPotential FlowPotential::height_power(int degree, double coeff) {
  FlowPotential f;
  f.terms.push_back({Potential::constant(coeff), degree});
  return f;
}

FlowPotential& FlowPotential::add_term(Potential base, int degree) {
  terms.push_back({std::move(base), degree});
  return *this;
}

void FlowPotential::validate() const {
  if (terms.empty()) throw std::invalid_argument("flow potentials need at least one term");
  for (const Term& t : terms)
    if (t.height_degree < 0 || t.height_degree > 6)
      throw std::invalid_argument("flow potential height degrees must lie in 0..6");
}

Potential associated_potential(const SuspensionFlow& susp, const FlowPotential& Phi) {
  Phi.validate();
  const SymbolicSystem& sys = susp.base;
  const int k = sys.alphabet_size;
  std::vector<ResolvedPotential> bases;
  int D = susp.roof.rho.depth;
  for (const FlowPotential::Term& t : Phi.terms) {
    bases.push_back(resolve(t.base, sys));
    D = std::max(D, bases.back().depth);
  }
  std::size_t size = 1;
  for (int i = 0; i < D; ++i) size *= static_cast<std::size_t>(k);
  std::vector<double> table(size, 0.0);
  std::size_t stride_rho = size;
  for (int i = 0; i < susp.roof.rho.depth; ++i) stride_rho /= static_cast<std::size_t>(k);
  for (std::size_t w = 0; w < size; ++w) {
    double r = susp.roof.rho.table[w / stride_rho];
    for (std::size_t j = 0; j < Phi.terms.size(); ++j) {
      std::size_t stride = size;
      for (int i = 0; i < bases[j].depth; ++i) stride /= static_cast<std::size_t>(k);
      int m = Phi.terms[j].height_degree + 1;
      table[w] += bases[j].table[w / stride] * std::pow(r, m) / static_cast<double>(m);
    }
  }
  return Potential::cylinder(D, std::move(table));
}

double measure_integral(const SymbolicSystem& sys, const MeasureModel& mu,
                        const ResolvedPotential& pot) {
  mu.validate();
  if (mu.alphabet_size() != sys.alphabet_size)
    throw std::invalid_argument("measure_integral: the measure does not match the alphabet");
  std::size_t size = 1;
  for (int i = 0; i < pot.depth; ++i) {
    size *= static_cast<std::size_t>(sys.alphabet_size);
    if (size > (1u << 22))
      throw std::invalid_argument("measure_integral: potential too deep to enumerate");
  }
  if (pot.table.size() != size)
    throw std::invalid_argument("measure_integral: potential does not match the alphabet");
  double acc = 0.0;
  Word w(static_cast<std::size_t>(pot.depth), 0);
  for (std::size_t idx = 0; idx < size; ++idx) {
    std::size_t rem = idx;
    for (int d = pot.depth - 1; d >= 0; --d) {
      w[static_cast<std::size_t>(d)] = static_cast<Sym>(rem % sys.alphabet_size);
      rem /= static_cast<std::size_t>(sys.alphabet_size);
    }
    double lm = mu.log_cylinder_mass(w);
    if (lm == kNegInf) continue;
    acc += std::exp(lm) * pot.table[idx];
  }
  return acc;
}

double induced_measure_integral(const MeasureModel& mu, const SuspensionFlow& susp,
                                const FlowPotential& Phi) {
  ResolvedPotential phi = resolve(associated_potential(susp, Phi), susp.base);
  double top = measure_integral(susp.base, mu, phi);
  double bottom = measure_integral(susp.base, mu, susp.roof.rho);
  return top / bottom;
}

double abramov_entropy(const SuspensionFlow& susp, const MeasureModel& mu) {
  double h = dynamical_entropy(mu, PartitionSpec::cylinders(1, 1.0));
  return h / measure_integral(susp.base, mu, susp.roof.rho);
}

double flow_H_of_mu(const SystemFamily& systems, const PotentialRule& roof,
                    const MeasureModel& mu, std::span<const double> epsilon_ladder,
                    const MeasureFamily& family) {
  check_ladder(epsilon_ladder, "flow_H_of_mu");
  std::vector<double> vals(epsilon_ladder.size());
  for (std::size_t r = 0; r < epsilon_ladder.size(); ++r) {
    double eps = epsilon_ladder[r];
    SymbolicSystem sys = systems.at(eps);
    MeasureModel m = family.at(eps, mu);
    if (m.alphabet_size() != sys.alphabet_size)
      throw std::invalid_argument("flow_H_of_mu: the measure does not match the alphabet");
    if (m.kind != MeasureModel::Kind::Bernoulli && m.kind != MeasureModel::Kind::Markov)
      throw std::invalid_argument(
          "flow_H_of_mu: exact joint counting needs cylinder entropies affine in the depth");
    ResolvedPotential rho = resolve(roof.materialize(sys), sys);
    if (!(rho.min_value() > 0.0))
      throw std::invalid_argument("flow_H_of_mu: the roof must be strictly positive");
    if (!rho.has_lattice || rho.min_value() != rho.max_value())
      throw std::invalid_argument("flow_H_of_mu: the time-one counter needs a constant "
                                  "rational roof");
    std::int64_t c_num = rho.lattice_num[0];
    std::int64_t c_den = rho.lattice_den;
    std::int64_t g = std::gcd(c_num, c_den);
    c_num /= g;
    c_den /= g;
    double c = static_cast<double>(c_num) / static_cast<double>(c_den);

    // height cells aligned with the wrap offsets: width 1/(c_den L),
    // so unit steps permute cells and every cell wraps c_den times per
    // c_num steps; that count is what divides the base rate by c
    std::int64_t L = static_cast<std::int64_t>(std::ceil(1.0 / (static_cast<double>(c_den) * eps) - 1e-12));
    L = std::max<std::int64_t>(L, 1);
    std::int64_t M = c_num * L;
    if (M > (1ll << 20)) throw std::invalid_argument("flow_H_of_mu: height cell budget exceeded");

    double H1 = partition_entropy(m, PartitionSpec::cylinders(1, 1.0));
    double H2 = partition_entropy(m, PartitionSpec::cylinders(2, 1.0));
    double rate = H2 - H1;

    auto wrap_sum = [&](std::int64_t steps) {
      std::int64_t acc = 0;
      for (std::int64_t j = 0; j < M; ++j) acc += (j + steps * c_den * L) / (c_num * L);
      return acc;
    };
    double slope = 0.0;
    for (std::int64_t n0 : {std::int64_t{0}, std::int64_t{1}}) {
      double s = rate * static_cast<double>(wrap_sum(n0 + c_num) - wrap_sum(n0)) /
                 (static_cast<double>(c_num) * static_cast<double>(M));
      if (n0 == 0)
        slope = s;
      else if (std::abs(s - slope) > 1e-9 * std::max(1.0, std::abs(slope)))
        throw std::logic_error("flow_H_of_mu: wrap counting drifted across periods");
    }
    if (std::abs(slope * c - rate) > 1e-6 * std::max(1.0, rate))
      throw std::logic_error("flow_H_of_mu: wrap counting disagrees with the mean return");
    vals[r] = slope / std::abs(std::log(eps));
  }
  std::size_t window = std::min(vals.size(), std::max<std::size_t>(2, (vals.size() + 2) / 3));
  return *std::max_element(vals.end() - static_cast<std::ptrdiff_t>(window), vals.end());
}

std::string BetaCertificate::certificate_json() const {
  nlohmann::json j;
  j["beta"] = beta;
  j["tolerance"] = tol;
  j["bracketed"] = bracketed;
  j["bracket"] = {lo, hi};
  j["mdim_at_bracket"] = {value_lo, value_hi};
  nlohmann::json curve = nlohmann::json::array();
  for (std::size_t i = 0; i < curve_t.size(); ++i)
    curve.push_back({{"t", curve_t[i]}, {"mdim", curve_value[i]}});
  j["curve"] = curve;
  return j.dump(2);
}

BetaCertificate beta_root(const SystemFamily& family, const PotentialRule& roof,
                          const SubsetSpec& within, std::span<const MdimRungSpec> ladder,
                          double tol) {
  if (ladder.empty()) throw std::invalid_argument("beta_root: empty scale ladder");
  if (!(tol > 0.0)) throw std::invalid_argument("beta_root: tolerance must be positive");
  for (const MdimRungSpec& rung : ladder) {
    SymbolicSystem sys = family.at(rung.eps);
    if (!(resolve(roof.materialize(sys), sys).min_value() > 0.0))
      throw std::invalid_argument("beta_root: the roof must be strictly positive on every rung");
  }

  BetaCertificate cert;
  cert.tol = tol;
  std::map<double, double> probes;
  auto g = [&](double t) {
    auto it = probes.find(t);
    if (it != probes.end()) return it->second;
    double v = upper_mdim(family, scale_rule(roof, -t), within, ladder).fit_value;
    probes.emplace(t, v);
    return v;
  };

  double g0 = g(0.0);
  if (g0 <= 0.0) {
    // nothing to scale away: the curve starts at or below zero
    cert.beta = 0.0;
    cert.lo = cert.hi = 0.0;
    cert.value_lo = cert.value_hi = g0;
    cert.bracketed = true;
  } else {
    double lo = 0.0, hi = std::max(tol, 1.0);
    int guard = 0;
    while (g(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (++guard > 60) throw std::runtime_error("beta_root: the curve never crossed zero");
    }
    while (hi - lo > tol) {
      double mid = 0.5 * (lo + hi);
      if (g(mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    cert.beta = 0.5 * (lo + hi);
    cert.lo = lo;
    cert.hi = hi;
    cert.value_lo = g(lo);
    cert.value_hi = g(hi);
    cert.bracketed = true;
  }
  for (const auto& [t, v] : probes) {
    cert.curve_t.push_back(t);
    cert.curve_value.push_back(v);
  }
  return cert;
}

void RatioWindow::validate() const {
  if (!std::isfinite(alpha)) throw std::invalid_argument("ratio window level must be finite");
  if (!(delta >= 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("ratio window half-width must be nonnegative");
}

namespace {

// Enumerates the window outright: every allowed word long enough to
// close the qualification and weight sums, grouped by its depth-L
// prefix, with the ratio interval and the sup weight per group.
double ratio_window_partition(const SymbolicSystem& sys, const ResolvedPotential& phi,
                              const ResolvedPotential& rho, const ResolvedPotential& psi,
                              const RatioWindow& window, int n, int L, bool log_sum_mode) {
  const int k = sys.alphabet_size;
  const int dq = std::max(phi.depth, rho.depth);
  const int M = std::max(L + dq - 1, n + psi.depth - 1);
  if (M * std::log2(static_cast<double>(k)) > 24.0)
    throw std::invalid_argument("ratio constraint too deep for this horizon");
  const std::size_t q = static_cast<std::size_t>(std::max(1, sys.max_forbidden_len()));

  struct Group {
    double r_lo = std::numeric_limits<double>::infinity();
    double r_hi = -std::numeric_limits<double>::infinity();
    double psi_sup = kNegInf;
  };
  std::map<Word, Group> groups;
  Word w;
  std::function<void()> dfs = [&]() {
    if (static_cast<int>(w.size()) == M) {
      double sp = 0.0, sr = 0.0;
      for (int j = 0; j < L; ++j) {
        std::uint32_t ip = 0, ir = 0;
        for (int d = 0; d < phi.depth; ++d)
          ip = ip * static_cast<std::uint32_t>(k) + w[static_cast<std::size_t>(j + d)];
        for (int d = 0; d < rho.depth; ++d)
          ir = ir * static_cast<std::uint32_t>(k) + w[static_cast<std::size_t>(j + d)];
        sp += phi.table[ip];
        sr += rho.table[ir];
      }
      double wt = 0.0;
      for (int j = 0; j < n; ++j) {
        std::uint32_t is = 0;
        for (int d = 0; d < psi.depth; ++d)
          is = is * static_cast<std::uint32_t>(k) + w[static_cast<std::size_t>(j + d)];
        wt += psi.table[is];
      }
      Group& grp = groups[Word(w.begin(), w.begin() + L)];
      double ratio = sp / sr;
      grp.r_lo = std::min(grp.r_lo, ratio);
      grp.r_hi = std::max(grp.r_hi, ratio);
      grp.psi_sup = std::max(grp.psi_sup, wt);
      return;
    }
    for (int s = 0; s < k; ++s) {
      w.push_back(static_cast<Sym>(s));
      std::size_t win = std::min(q, w.size());
      if (sys.factor_allowed(std::span<const Sym>(w.data() + (w.size() - win), win))) dfs();
      w.pop_back();
    }
  };
  dfs();

  const double slack = 1e-12 * std::max(1.0, std::abs(window.alpha) + window.delta);
  double acc = kNegInf;
  for (const auto& [key, grp] : groups) {
    if (grp.r_hi < window.alpha - window.delta - slack) continue;
    if (grp.r_lo > window.alpha + window.delta + slack) continue;
    acc = log_sum_mode ? log_add(acc, grp.psi_sup) : std::max(acc, grp.psi_sup);
  }
  return acc;
}

}  // namespace

LogBracket ratio_restricted_P(const SymbolicSystem& sys, const ResolvedPotential& phi,
                              const ResolvedPotential& rho, const ResolvedPotential& psi,
                              const RatioWindow& window, int n, double eps) {
  if (n < 1) throw std::invalid_argument("ratio_restricted_P: n must be >= 1");
  if (!(eps > 0.0)) throw std::domain_error("ratio_restricted_P: eps must be positive");
  window.validate();
  if (!(rho.min_value() > 0.0))
    throw std::invalid_argument("ratio_restricted_P: the denominator must be strictly positive");

  int F = sys.forced_agreement_len(eps);
  int A = sys.ball_agreement_len(eps);
  if (A == 0) {
    double v = ratio_window_partition(sys, phi, rho, psi, window, n, n, false);
    return LogBracket{v, v, CountProvenance::Exact, n, n};
  }
  int Lq = n - 1 + A;
  double hi = ratio_window_partition(sys, phi, rho, psi, window, n, Lq, true);
  if (F == A) return LogBracket{hi, hi, CountProvenance::Exact, Lq, Lq};
  if (F == 0) {
    double lo = ratio_window_partition(sys, phi, rho, psi, window, n, Lq, false);
    return LogBracket{lo, hi, CountProvenance::Bracket, Lq, Lq};
  }
  int Lp = n - 1 + F;
  double lo = ratio_window_partition(sys, phi, rho, psi, window, n, Lp, true);
  return LogBracket{lo, hi, CountProvenance::Bracket, Lp, Lq};
}

FlowLevelBound flow_level_mdim_lower_bound(const SystemFamily& family, const PotentialRule& roof,
                                           const FlowPotential& Phi, double alpha,
                                           std::span<const double> epsilon_ladder,
                                           const FlowLevelOptions& options) {
  check_ladder(epsilon_ladder, "flow level bound");
  if (!(options.root_tol > 0.0))
    throw std::invalid_argument("flow level bound: root tolerance must be positive");
  if (!(options.delta >= 0.0))
    throw std::invalid_argument("flow level bound: probe half-width must be nonnegative");

  FlowLevelBound out;
  out.alpha = alpha;

  struct Rung {
    double lambda = 1.0;
    std::vector<double> v;    // phi - alpha rho per symbol
    std::vector<double> rho;  // roof per symbol
    bool feasible = false;
  };
  std::vector<Rung> rungs(epsilon_ladder.size());
  for (std::size_t i = 0; i < epsilon_ladder.size(); ++i) {
    double eps = epsilon_ladder[i];
    SymbolicSystem sys = family.at(eps);
    if (!sys.forbidden_words.empty())
      throw std::invalid_argument(
          "flow level bound: product-measure optimizers need an unconstrained shift");
    SuspensionFlow susp = make_suspension(sys, roof.materialize(sys));
    ResolvedPotential phi = resolve(associated_potential(susp, Phi), sys);
    const ResolvedPotential& rho = susp.roof.rho;
    if (phi.depth != 1 || rho.depth != 1)
      throw std::invalid_argument(
          "flow level bound: the ratio tilt solver covers single-coordinate data");
    Rung& r = rungs[i];
    r.lambda = std::abs(std::log(eps));
    r.v.resize(phi.table.size());
    r.rho.assign(rho.table.begin(), rho.table.end());
    for (std::size_t s = 0; s < phi.table.size(); ++s)
      r.v[s] = phi.table[s] - alpha * rho.table[s];
    double vmin = *std::min_element(r.v.begin(), r.v.end());
    double vmax = *std::max_element(r.v.begin(), r.v.end());
    r.feasible = vmin <= 0.0 && 0.0 <= vmax;
    out.rung_epsilons.push_back(eps);
    out.rung_feasible.push_back(r.feasible ? 1 : 0);
  }

  bool any = std::any_of(rungs.begin(), rungs.end(), [](const Rung& r) { return r.feasible; });
  if (!any) {
    out.note = "no product measure attains the ratio level";
    return out;
  }

  {
    // emptiness probe on the coarsest rung: the window must hold at
    // least one cylinder or the level set is declared empty
    double eps = epsilon_ladder.front();
    SymbolicSystem sys = family.at(eps);
    SuspensionFlow susp = make_suspension(sys, roof.materialize(sys));
    ResolvedPotential phi = resolve(associated_potential(susp, Phi), sys);
    ResolvedPotential zero = resolve(Potential::zero(), sys);
    double budget = 20.0 / std::log2(static_cast<double>(sys.alphabet_size));
    int probe_n = std::max(1, std::min(options.probe_depth, static_cast<int>(budget) - 1));
    RatioWindow window{alpha, options.delta};
    LogBracket probe =
        ratio_restricted_P(sys, phi, susp.roof.rho, zero, window, probe_n, eps);
    if (probe.value() == kNegInf) {
      out.note = "ratio window empty at the probe depth";
      return out;
    }
  }

  auto F = [&](double beta) {
    std::vector<double> xs, ys;
    for (const Rung& r : rungs) {
      if (!r.feasible) continue;
      std::vector<double> psi_scaled(r.rho.size());
      for (std::size_t s = 0; s < r.rho.size(); ++s) psi_scaled[s] = -beta * r.lambda * r.rho[s];
      GibbsOptimizer opt = solve_gibbs(1.0, r.lambda, r.v, psi_scaled, 0.0);
      if (!opt.feasible) continue;
      xs.push_back(1.0 / r.lambda);
      ys.push_back(opt.entropy / r.lambda + opt.psi_integral);
    }
    if (ys.empty()) throw std::logic_error("flow level bound: feasibility drifted under tilt");
    if (ys.size() == 1) return ys[0];
    return fit_line(xs, ys).intercept;
  };

  out.feasible = true;
  double f0 = F(0.0);
  if (f0 <= 0.0) {
    out.beta = 0.0;
    out.lo = out.hi = 0.0;
    return out;
  }
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (F(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 60)
      throw std::runtime_error("flow level bound: the tilt never crossed zero");
  }
  while (hi - lo > options.root_tol) {
    double mid = 0.5 * (lo + hi);
    if (F(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  out.beta = 0.5 * (lo + hi);
  out.lo = lo;
  out.hi = hi;
  return out;
}

}  // namespace mdimlab
