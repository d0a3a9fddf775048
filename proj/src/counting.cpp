#include "mdimlab/counting.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mdimlab {

std::string provenance_str(CountProvenance p) {
  switch (p) {
    case CountProvenance::Exact:
      return "exact";
    case CountProvenance::Bracket:
      return "bracket";
    case CountProvenance::GreedyLowerBound:
      return "greedy-lower-bound";
    case CountProvenance::Sampled:
      return "sampled";
  }
  return "unknown";
}

namespace {

// Dense transition table over length-c contexts. c is small for every
// system we run (max of forbidden-word and potential read lengths,
// minus one), while the alphabet may be wide.
struct Transfer {
  int k = 2;
  int c = 0;
  std::uint32_t nstates = 1;
  std::uint32_t pow_r1 = 1;                // k^(r-1), weight index helper
  std::vector<std::uint32_t> next;         // nstates*k, UINT32_MAX = blocked
  std::vector<bool> alive;                 // has an infinite continuation

  static constexpr std::uint32_t kBlocked = 0xffffffffu;

  static Transfer build(const SymbolicSystem& sys, int pot_depth) {
    Transfer t;
    t.k = sys.alphabet_size;
    int q = sys.max_forbidden_len();
    t.c = std::max({q - 1, pot_depth - 1, 0});
    double states_est = std::pow(static_cast<double>(t.k), t.c);
    if (states_est > double(1 << 22))
      throw std::invalid_argument("context state space too large for transfer iteration");
    t.nstates = 1;
    for (int i = 0; i < t.c; ++i) t.nstates *= static_cast<std::uint32_t>(t.k);
    t.pow_r1 = 1;
    for (int i = 0; i < pot_depth - 1; ++i) t.pow_r1 *= static_cast<std::uint32_t>(t.k);

    std::uint32_t mod = t.nstates;
    t.next.assign(static_cast<std::size_t>(t.nstates) * static_cast<std::size_t>(t.k), kBlocked);
    Word buf(static_cast<std::size_t>(t.c) + 1);
    for (std::uint32_t s = 0; s < t.nstates; ++s) {
      std::uint32_t rest = s;
      for (int i = t.c - 1; i >= 0; --i) {
        buf[static_cast<std::size_t>(i)] = static_cast<Sym>(rest % static_cast<std::uint32_t>(t.k));
        rest /= static_cast<std::uint32_t>(t.k);
      }
      if (!sys.factor_allowed(std::span<const Sym>(buf.data(), static_cast<std::size_t>(t.c))))
        continue;
      for (int sym = 0; sym < t.k; ++sym) {
        buf[static_cast<std::size_t>(t.c)] = static_cast<Sym>(sym);
        if (!sys.factor_allowed(buf)) continue;
        t.next[static_cast<std::size_t>(s) * static_cast<std::size_t>(t.k) +
               static_cast<std::size_t>(sym)] =
            (s * static_cast<std::uint32_t>(t.k) + static_cast<std::uint32_t>(sym)) % mod;
      }
    }

    t.alive.assign(t.nstates, true);
    for (bool changed = true; changed;) {
      changed = false;
      for (std::uint32_t s = 0; s < t.nstates; ++s) {
        if (!t.alive[s]) continue;
        bool out = false;
        for (int sym = 0; sym < t.k && !out; ++sym) {
          std::uint32_t to = t.next[static_cast<std::size_t>(s) * static_cast<std::size_t>(t.k) +
                                    static_cast<std::size_t>(sym)];
          if (to != kBlocked && t.alive[to]) out = true;
        }
        if (!out) {
          t.alive[s] = false;
          changed = true;
        }
      }
    }
    return t;
  }

  std::uint32_t step(std::uint32_t s, int sym) const {
    return next[static_cast<std::size_t>(s) * static_cast<std::size_t>(k) +
                static_cast<std::size_t>(sym)];
  }
};

// Enumerates allowed words of the given length that extend `u`,
// invoking fn(word) in lexicographic order.
void for_each_allowed(const SymbolicSystem& sys, const Word& u, int len,
                      const std::function<void(const Word&)>& fn) {
  Word w = u;
  if (static_cast<int>(w.size()) > len)
    throw std::logic_error("for_each_allowed: prefix longer than target");
  if (!sys.factor_allowed(w)) return;
  std::function<void()> rec = [&]() {
    if (static_cast<int>(w.size()) == len) {
      fn(w);
      return;
    }
    w.push_back(0);
    for (int s = 0; s < sys.alphabet_size; ++s) {
      w.back() = static_cast<Sym>(s);
      std::size_t tail = std::min(w.size(), static_cast<std::size_t>(sys.max_forbidden_len()));
      if (sys.factor_allowed(std::span<const Sym>(w.data() + (w.size() - tail), tail))) rec();
    }
    w.pop_back();
  };
  rec();
}

double word_weight(const SymbolicSystem& sys, const ResolvedPotential& pot, const Word& w, int n) {
  int k = sys.alphabet_size;
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    std::uint32_t idx = 0;
    for (int t = 0; t < pot.depth; ++t)
      idx = idx * static_cast<std::uint32_t>(k) + w[static_cast<std::size_t>(j + t)];
    acc += pot.table[idx];
  }
  return acc;
}

}  // namespace

// The engine behind both P and Q; also reused by the cover machinery.
double log_cylinder_partition(const SymbolicSystem& sys, const ResolvedPotential& pot,
                              const Word& u, int n, int L, bool sup_mode) {
  if (n < 1) throw std::invalid_argument("log_cylinder_partition: horizon must be positive");
  if (L < 0) throw std::invalid_argument("log_cylinder_partition: negative depth");
  const int k = sys.alphabet_size;
  const int r = pot.depth;
  const int D = n + r - 1;
  Transfer tr = Transfer::build(sys, r);
  const int c = tr.c;
  const int c0 = std::max(c, static_cast<int>(u.size()));

  if (L < c0) {
    // short counting depth relative to the context: enumerate outright
    int M = std::max({D, c0, L});
    if (M * std::log2(double(k)) > 22.0)
      throw std::invalid_argument("cylinder constraint too deep for this horizon");
    std::map<Word, double> groups;
    for_each_allowed(sys, u, M, [&](const Word& w) {
      std::uint32_t st = 0;
      for (int i = M - c; i < M; ++i)
        st = st * static_cast<std::uint32_t>(k) + w[static_cast<std::size_t>(i)];
      if (!tr.alive[st]) return;
      double wt = word_weight(sys, pot, w, n);
      Word key(w.begin(), w.begin() + L);
      auto [it, fresh] = groups.emplace(std::move(key), wt);
      if (!fresh) it->second = sup_mode ? std::max(it->second, wt) : std::min(it->second, wt);
    });
    std::vector<double> vals;
    vals.reserve(groups.size());
    for (const auto& [key, v] : groups) vals.push_back(v);
    return log_sum_exp(vals);
  }

  // forward phase: log-sum over allowed prefixes, per context
  std::vector<double> f(tr.nstates, kNegInf);
  for_each_allowed(sys, u, c0, [&](const Word& w) {
    double wt = 0.0;
    for (int j = 0; j + r <= c0 && j < n; ++j) {
      std::uint32_t idx = 0;
      for (int t = 0; t < r; ++t)
        idx = idx * static_cast<std::uint32_t>(k) + w[static_cast<std::size_t>(j + t)];
      wt += pot.table[idx];
    }
    std::uint32_t st = 0;
    for (int i = c0 - c; i < c0; ++i)
      st = st * static_cast<std::uint32_t>(k) + w[static_cast<std::size_t>(i)];
    f[st] = log_add(f[st], wt);
  });
  std::vector<double> f2(tr.nstates);
  for (int t = c0; t < L; ++t) {
    std::fill(f2.begin(), f2.end(), kNegInf);
    bool weighted = t >= r - 1 && t <= n + r - 2;
    for (std::uint32_t s = 0; s < tr.nstates; ++s) {
      if (f[s] == kNegInf) continue;
      for (int sym = 0; sym < k; ++sym) {
        std::uint32_t to = tr.step(s, sym);
        if (to == Transfer::kBlocked) continue;
        double w = weighted ? pot.table[(s % tr.pow_r1) * static_cast<std::uint32_t>(k) +
                                        static_cast<std::uint32_t>(sym)]
                            : 0.0;
        f2[to] = log_add(f2[to], f[s] + w);
      }
    }
    f.swap(f2);
  }

  if (L >= D) {
    std::vector<double> vals(tr.nstates, kNegInf);
    for (std::uint32_t s = 0; s < tr.nstates; ++s)
      if (tr.alive[s]) vals[s] = f[s];
    return log_sum_exp(vals);
  }

  // extremal completion phase: per-context best (or worst) suffix sum
  const double dead = sup_mode ? kNegInf : kPosInf;
  std::vector<double> h(tr.nstates), h2(tr.nstates);
  for (std::uint32_t s = 0; s < tr.nstates; ++s) h[s] = tr.alive[s] ? 0.0 : dead;
  for (int t = D - 1; t >= L; --t) {
    bool weighted = t >= r - 1 && t <= n + r - 2;
    for (std::uint32_t s = 0; s < tr.nstates; ++s) {
      double best = dead;
      for (int sym = 0; sym < k; ++sym) {
        std::uint32_t to = tr.step(s, sym);
        if (to == Transfer::kBlocked || h[to] == dead) continue;
        double w = weighted ? pot.table[(s % tr.pow_r1) * static_cast<std::uint32_t>(k) +
                                        static_cast<std::uint32_t>(sym)]
                            : 0.0;
        double cand = h[to] + w;
        best = sup_mode ? std::max(best, cand) : std::min(best, cand);
      }
      h2[s] = best;
    }
    h.swap(h2);
  }
  std::vector<double> vals(tr.nstates, kNegInf);
  for (std::uint32_t s = 0; s < tr.nstates; ++s)
    if (f[s] != kNegInf && h[s] != dead) vals[s] = f[s] + h[s];
  return log_sum_exp(vals);
}

// Min/max-plus analogue of the engine above, used where a scale
// degenerates to single-point bounds.
double extremal_birkhoff_over_cylinder(const SymbolicSystem& sys, const ResolvedPotential& pot,
                                       const Word& u, int n, bool sup_mode) {
  if (n < 1) throw std::invalid_argument("extremal_birkhoff_over_cylinder: horizon must be positive");
  const int k = sys.alphabet_size;
  const int r = pot.depth;
  const int D = n + r - 1;
  Transfer tr = Transfer::build(sys, r);
  const int c = tr.c;
  const int c0 = std::max(c, static_cast<int>(u.size()));
  const double dead = sup_mode ? kNegInf : kPosInf;
  const int init_len = c0;

  std::vector<double> g(tr.nstates, dead);
  for_each_allowed(sys, u, init_len, [&](const Word& w) {
    double wt = 0.0;
    for (int j = 0; j + r <= init_len && j < n; ++j) {
      std::uint32_t idx = 0;
      for (int t = 0; t < r; ++t)
        idx = idx * static_cast<std::uint32_t>(k) + w[static_cast<std::size_t>(j + t)];
      wt += pot.table[idx];
    }
    std::uint32_t st = 0;
    for (int i = init_len - c; i < init_len; ++i)
      st = st * static_cast<std::uint32_t>(k) + w[static_cast<std::size_t>(i)];
    if (g[st] == dead)
      g[st] = wt;
    else
      g[st] = sup_mode ? std::max(g[st], wt) : std::min(g[st], wt);
  });
  std::vector<double> g2(tr.nstates);
  for (int t = init_len; t < D; ++t) {
    std::fill(g2.begin(), g2.end(), dead);
    bool weighted = t >= r - 1 && t <= n + r - 2;
    for (std::uint32_t s = 0; s < tr.nstates; ++s) {
      if (g[s] == dead) continue;
      for (int sym = 0; sym < k; ++sym) {
        std::uint32_t to = tr.step(s, sym);
        if (to == Transfer::kBlocked) continue;
        double w = weighted ? pot.table[(s % tr.pow_r1) * static_cast<std::uint32_t>(k) +
                                        static_cast<std::uint32_t>(sym)]
                            : 0.0;
        double cand = g[s] + w;
        if (g2[to] == dead)
          g2[to] = cand;
        else
          g2[to] = sup_mode ? std::max(g2[to], cand) : std::min(g2[to], cand);
      }
    }
    g.swap(g2);
  }
  double best = dead;
  for (std::uint32_t s = 0; s < tr.nstates; ++s) {
    if (g[s] == dead || !tr.alive[s]) continue;
    if (best == dead)
      best = g[s];
    else
      best = sup_mode ? std::max(best, g[s]) : std::min(best, g[s]);
  }
  if (best == dead)
    throw std::invalid_argument("no point of the system satisfies the cylinder constraint");
  return best;
}

namespace {

const Word& subset_prefix(const SubsetSpec& within) {
  static const Word empty;
  return within.kind == SubsetSpec::Kind::Cylinder ? within.cylinder : empty;
}

}  // namespace

double log_allowed_word_count(const SymbolicSystem& sys, int depth) {
  if (depth < 0) throw std::invalid_argument("log_allowed_word_count: negative depth");
  auto zero = resolve(Potential::zero(), sys);
  return log_cylinder_partition(sys, zero, {}, 1, depth, true);
}

LogBracket partition_function_P(const SymbolicSystem& sys, const ResolvedPotential& pot,
                                const SubsetSpec& within, int n, double eps) {
  if (n < 1) throw std::invalid_argument("partition_function_P: n must be >= 1");
  if (!(eps > 0.0)) throw std::domain_error("partition_function_P: eps must be positive");
  if (within.kind == SubsetSpec::Kind::SinglePoint) {
    if (!within.point.valid_for(sys))
      throw std::invalid_argument("partition_function_P: point not in the system");
    double v = birkhoff_sum(sys, pot, within.point, n);
    return LogBracket{v, v, CountProvenance::Exact, 0, 0};
  }
  const Word& u = subset_prefix(within);
  if (!sys.factor_allowed(u))
    throw std::invalid_argument("partition_function_P: cylinder word not allowed: " + word_str(u));
  int F = sys.forced_agreement_len(eps);
  int A = sys.ball_agreement_len(eps);
  if (A == 0) {
    // scale exceeds the diameter: separated families are singletons
    double v = extremal_birkhoff_over_cylinder(sys, pot, u, n, true);
    return LogBracket{v, v, CountProvenance::Exact, 0, 0};
  }
  int Lq = n - 1 + A;
  if (F == 0) {
    double lo = extremal_birkhoff_over_cylinder(sys, pot, u, n, true);
    double hi = log_cylinder_partition(sys, pot, u, n, Lq, true);
    return LogBracket{lo, hi, CountProvenance::Bracket, 0, Lq};
  }
  int Lp = n - 1 + F;
  double lo = log_cylinder_partition(sys, pot, u, n, Lp, true);
  if (F == A) return LogBracket{lo, lo, CountProvenance::Exact, Lp, Lp};
  double hi = log_cylinder_partition(sys, pot, u, n, Lq, true);
  return LogBracket{lo, hi, CountProvenance::Bracket, Lp, Lq};
}

LogBracket minimal_spanning_Q(const SymbolicSystem& sys, const ResolvedPotential& pot,
                              const SubsetSpec& within, int n, double eps) {
  if (n < 1) throw std::invalid_argument("minimal_spanning_Q: n must be >= 1");
  if (!(eps > 0.0)) throw std::domain_error("minimal_spanning_Q: eps must be positive");
  if (within.kind == SubsetSpec::Kind::SinglePoint) {
    if (!within.point.valid_for(sys))
      throw std::invalid_argument("minimal_spanning_Q: point not in the system");
    double v = birkhoff_sum(sys, pot, within.point, n);
    return LogBracket{v, v, CountProvenance::Exact, 0, 0};
  }
  const Word& u = subset_prefix(within);
  if (!sys.factor_allowed(u))
    throw std::invalid_argument("minimal_spanning_Q: cylinder word not allowed: " + word_str(u));
  int F = sys.forced_agreement_len(eps);
  int A = sys.ball_agreement_len(eps);
  if (A == 0) {
    // one ball covers everything; the best center is the cheapest point
    double v = extremal_birkhoff_over_cylinder(sys, pot, u, n, false);
    return LogBracket{v, v, CountProvenance::Exact, 0, 0};
  }
  int Lq = n - 1 + A;
  double hi = log_cylinder_partition(sys, pot, u, n, Lq, false);
  if (F == A) return LogBracket{hi, hi, CountProvenance::Exact, Lq, Lq};
  if (F == 0) {
    double lo = extremal_birkhoff_over_cylinder(sys, pot, u, n, false);
    return LogBracket{lo, hi, CountProvenance::Bracket, 0, Lq};
  }
  int Lp = n - 1 + F;
  double lo = log_cylinder_partition(sys, pot, u, n, Lp, false);
  return LogBracket{lo, hi, CountProvenance::Bracket, Lp, Lq};
}

SeparatedFamily max_separated_family(const SymbolicSystem& sys, int n, double eps,
                                     std::size_t size_limit) {
  if (n < 1) throw std::invalid_argument("max_separated_family: n must be >= 1");
  SeparatedFamily fam;
  fam.n = n;
  fam.eps = eps;
  int F = sys.forced_agreement_len(eps);
  if (F == 0) {
    fam.points.push_back(sys.extend_word_to_point({}));
    fam.transversal = false;
    return fam;
  }
  int L = n - 1 + F;
  fam.transversal = true;
  for_each_allowed(sys, {}, L, [&](const Word& w) {
    Point p;
    try {
      p = sys.extend_word_to_point(w);
    } catch (const std::invalid_argument&) {
      return;  // dead-end word, no point carries it
    }
    if (fam.points.size() >= size_limit)
      throw std::length_error("max_separated_family: family exceeds size limit");
    fam.points.push_back(std::move(p));
  });
  return fam;
}

SeparatedFamily greedy_separated_family(const SymbolicSystem& sys, int n, double eps,
                                        int candidate_depth, std::size_t size_limit) {
  if (n < 1) throw std::invalid_argument("greedy_separated_family: n must be >= 1");
  SeparatedFamily fam;
  fam.n = n;
  fam.eps = eps;
  fam.transversal = false;
  for_each_allowed(sys, {}, candidate_depth, [&](const Word& w) {
    if (fam.points.size() >= size_limit) return;
    Point p;
    try {
      p = sys.extend_word_to_point(w);
    } catch (const std::invalid_argument&) {
      return;
    }
    for (const Point& chosen : fam.points)
      if (bowen_distance(sys, chosen, p, n) < eps) return;
    fam.points.push_back(std::move(p));
  });
  return fam;
}

bool pairwise_separated(const SymbolicSystem& sys, const SeparatedFamily& fam) {
  for (std::size_t i = 0; i < fam.points.size(); ++i)
    for (std::size_t j = i + 1; j < fam.points.size(); ++j)
      if (bowen_distance(sys, fam.points[i], fam.points[j], fam.n) < fam.eps) return false;
  return true;
}

void PressureSeries::append(PressurePoint p) {
  if (p.n < 1) throw std::invalid_argument("pressure series: n must be >= 1");
  if (!points.empty() && p.n <= points.back().n)
    throw std::invalid_argument("pressure series: horizons must increase");
  points.push_back(std::move(p));
}

RateEstimate pressure_rate(const PressureSeries& series) {
  std::size_t N = series.points.size();
  if (N == 0) throw std::invalid_argument("pressure_rate: empty series");
  std::size_t wlen = std::min(N, std::max<std::size_t>(2, (N + 2) / 3));
  RateEstimate est;
  est.window_len = static_cast<int>(wlen);
  est.window_first_n = series.points[N - wlen].n;
  for (std::size_t i = N - wlen; i < N; ++i) {
    const PressurePoint& p = series.points[i];
    est.lo = std::max(est.lo, p.log_value.lo / p.n);
    est.hi = std::max(est.hi, p.log_value.hi / p.n);
  }
  return est;
}

MdimEstimate upper_mdim(const SystemFamily& family, const PotentialRule& rule,
                        const SubsetSpec& within, std::span<const MdimRungSpec> ladder) {
  if (ladder.empty()) throw std::invalid_argument("upper_mdim: empty scale ladder");
  for (std::size_t i = 0; i + 1 < ladder.size(); ++i)
    if (!(ladder[i].eps > ladder[i + 1].eps))
      throw std::invalid_argument("upper_mdim: scales must strictly decrease");
  MdimEstimate est;
  est.rungs.resize(ladder.size());
  parallel_for_index(ladder.size(), [&](std::size_t i) {
    const MdimRungSpec& spec = ladder[i];
    if (spec.ns.empty()) throw std::invalid_argument("upper_mdim: rung without horizons");
    SymbolicSystem sys = family.at(spec.eps);
    double log_scale = std::abs(std::log(spec.eps));
    ResolvedPotential pot = scale_potential(resolve(rule.materialize(sys), sys), log_scale);
    MdimRung rung;
    rung.eps = spec.eps;
    for (int n : spec.ns) {
      rung.p_series.append({n, partition_function_P(sys, pot, within, n, spec.eps)});
      rung.q_series.append({n, minimal_spanning_Q(sys, pot, within, n, spec.eps)});
    }
    rung.p_rate = pressure_rate(rung.p_series);
    rung.q_rate = pressure_rate(rung.q_series);
    rung.dim_point = rung.p_rate.value() / log_scale;
    rung.pq_rate_gap = std::abs(rung.p_rate.value() - rung.q_rate.value());
    est.rungs[i] = std::move(rung);
  });
  est.last_point = est.rungs.back().dim_point;
  if (est.rungs.size() >= 2) {
    std::vector<double> xs, ys;
    for (const MdimRung& r : est.rungs) {
      xs.push_back(1.0 / std::abs(std::log(r.eps)));
      ys.push_back(r.dim_point);
    }
    LinearFit fit = fit_line(xs, ys);
    est.fit_value = fit.intercept;
    est.fit_residual = fit.max_residual;
  } else {
    est.fit_value = est.last_point;
    est.fit_residual = 0.0;
  }
  return est;
}

}  // namespace mdimlab
