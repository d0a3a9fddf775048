#include "mdimlab/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace mdimlab {

namespace {

// count of j >= 0 with gap * 2^-j >= eps
int weighted_agreement_count(double gap, double eps) {
  if (eps <= 0.0) throw std::domain_error("scale eps must be positive");
  int count = 0;
  for (int j = 0; j < 1024; ++j) {
    if (std::ldexp(gap, -j) >= eps)
      ++count;
    else
      break;
  }
  return count;
}

}  // namespace

std::string word_str(std::span<const Sym> w) {
  static const char* digits = "0123456789abcdefghijklmnopqrstuvwxyz";
  std::string out;
  bool compact = true;
  for (Sym s : w)
    if (s >= 36) compact = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (compact) {
      out.push_back(digits[w[i]]);
    } else {
      if (i) out.push_back('.');
      out += std::to_string(static_cast<int>(w[i]));
    }
  }
  return out;
}

Word word_from_str(const std::string& s, int alphabet_size) {
  Word w;
  for (char ch : s) {
    int v;
    if (ch >= '0' && ch <= '9')
      v = ch - '0';
    else if (ch >= 'a' && ch <= 'z')
      v = 10 + (ch - 'a');
    else
      throw std::invalid_argument(std::string("bad symbol character '") + ch + "'");
    if (v >= alphabet_size)
      throw std::invalid_argument("symbol " + std::to_string(v) + " outside alphabet of size " +
                                  std::to_string(alphabet_size));
    w.push_back(static_cast<Sym>(v));
  }
  return w;
}

SymbolicSystem SymbolicSystem::full_shift(int k, MetricKind m) {
  SymbolicSystem sys;
  sys.alphabet_size = k;
  sys.metric_kind = m;
  sys.validate();
  return sys;
}

SymbolicSystem SymbolicSystem::sft(int k, MetricKind m, std::vector<Word> forbidden) {
  SymbolicSystem sys;
  sys.alphabet_size = k;
  sys.metric_kind = m;
  sys.forbidden_words = std::move(forbidden);
  sys.validate();
  return sys;
}

void SymbolicSystem::validate() const {
  if (alphabet_size < 2 || alphabet_size > 255)
    throw std::invalid_argument("alphabet_size must be in [2,255]");
  for (const Word& f : forbidden_words) {
    if (f.empty()) throw std::invalid_argument("forbidden word must be nonempty");
    for (Sym s : f)
      if (s >= alphabet_size)
        throw std::invalid_argument("forbidden word uses symbol outside alphabet: " + word_str(f));
  }
}

double SymbolicSystem::embed(Sym s) const {
  return static_cast<double>(s) / static_cast<double>(alphabet_size - 1);
}

double SymbolicSystem::min_embedding_gap() const {
  return 1.0 / static_cast<double>(alphabet_size - 1);
}

double SymbolicSystem::diameter() const { return 1.0; }

int SymbolicSystem::forced_agreement_len(double eps) const {
  double gap = metric_kind == MetricKind::Ultrametric2adic ? 1.0 : min_embedding_gap();
  return weighted_agreement_count(gap, eps);
}

int SymbolicSystem::ball_agreement_len(double eps) const {
  return weighted_agreement_count(1.0, eps);
}

bool SymbolicSystem::factor_allowed(std::span<const Sym> w) const {
  for (const Word& f : forbidden_words) {
    if (f.size() > w.size()) continue;
    auto it = std::search(w.begin(), w.end(), f.begin(), f.end());
    if (it != w.end()) return false;
  }
  return true;
}

int SymbolicSystem::max_forbidden_len() const {
  std::size_t q = 0;
  for (const Word& f : forbidden_words) q = std::max(q, f.size());
  return static_cast<int>(q);
}

namespace {

// Transition structure on (q-1)-grams of an SFT. Used for the
// specification gap and for connector existence checks.
struct GramGraph {
  int gram_len = 0;
  std::vector<Word> states;                 // allowed grams, sorted
  std::vector<std::vector<int>> next;       // next[state][symbol] -> state or -1

  static GramGraph build(const SymbolicSystem& sys) {
    GramGraph g;
    int q = sys.max_forbidden_len();
    g.gram_len = std::max(0, q - 1);
    int k = sys.alphabet_size;
    std::vector<Word> all;
    Word cur(static_cast<std::size_t>(g.gram_len), 0);
    // enumerate grams lexicographically
    std::size_t total = 1;
    for (int i = 0; i < g.gram_len; ++i) total *= static_cast<std::size_t>(k);
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rest = idx;
      for (int i = g.gram_len - 1; i >= 0; --i) {
        cur[static_cast<std::size_t>(i)] = static_cast<Sym>(rest % static_cast<std::size_t>(k));
        rest /= static_cast<std::size_t>(k);
      }
      if (sys.factor_allowed(cur)) all.push_back(cur);
    }
    g.states = std::move(all);
    auto index_of = [&](const Word& w) {
      auto it = std::lower_bound(g.states.begin(), g.states.end(), w);
      if (it == g.states.end() || *it != w) return -1;
      return static_cast<int>(it - g.states.begin());
    };
    g.next.assign(g.states.size(), std::vector<int>(static_cast<std::size_t>(k), -1));
    for (std::size_t si = 0; si < g.states.size(); ++si) {
      Word ext = g.states[si];
      ext.push_back(0);
      for (int s = 0; s < k; ++s) {
        ext.back() = static_cast<Sym>(s);
        if (!sys.factor_allowed(ext)) continue;
        Word nxt(ext.begin() + 1, ext.end());
        g.next[si][static_cast<std::size_t>(s)] = index_of(nxt);
      }
    }
    return g;
  }

  // Drop grams that cannot sit inside a two-sided-infinite run of
  // allowed symbols; they never occur in points of the subshift.
  void prune() {
    bool changed = true;
    while (changed && !states.empty()) {
      changed = false;
      std::size_t s = states.size();
      std::vector<bool> has_out(s, false), has_in(s, false);
      for (std::size_t i = 0; i < s; ++i)
        for (int to : next[i])
          if (to >= 0) {
            has_out[i] = true;
            has_in[static_cast<std::size_t>(to)] = true;
          }
      std::vector<int> remap(s, -1);
      std::vector<Word> kept_states;
      std::vector<std::vector<int>> kept_next;
      for (std::size_t i = 0; i < s; ++i) {
        if (has_out[i] && has_in[i]) {
          remap[i] = static_cast<int>(kept_states.size());
          kept_states.push_back(states[i]);
          kept_next.push_back(next[i]);
        } else {
          changed = true;
        }
      }
      if (!changed) break;
      for (auto& row : kept_next)
        for (int& to : row) to = to >= 0 ? remap[static_cast<std::size_t>(to)] : -1;
      states = std::move(kept_states);
      next = std::move(kept_next);
    }
  }

  // Minimal t <= cap with a length-t path between every ordered state
  // pair, or -1. Degenerate states (no successors) poison primitivity,
  // which is the conservative answer for gluing.
  int all_pairs_exponent(int cap) const {
    std::size_t s = states.size();
    if (s == 0) return -1;
    std::vector<std::vector<bool>> reach(s, std::vector<bool>(s, false));
    for (std::size_t i = 0; i < s; ++i) reach[i][i] = true;
    for (int t = 1; t <= cap; ++t) {
      std::vector<std::vector<bool>> nr(s, std::vector<bool>(s, false));
      for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) {
          if (!reach[i][j]) continue;
          for (int sym = 0; sym < static_cast<int>(next[j].size()); ++sym) {
            int to = next[j][static_cast<std::size_t>(sym)];
            if (to >= 0) nr[i][static_cast<std::size_t>(to)] = true;
          }
        }
      reach = std::move(nr);
      bool full = true;
      for (std::size_t i = 0; i < s && full; ++i)
        for (std::size_t j = 0; j < s && full; ++j)
          if (!reach[i][j]) full = false;
      if (full) return t;
    }
    return -1;
  }
};

}  // namespace

bool SymbolicSystem::has_specification() const {
  if (forbidden_words.empty()) return true;
  int q = max_forbidden_len();
  if (q == 1) {
    // single forbidden symbols just shrink the alphabet
    int usable = 0;
    for (int s = 0; s < alphabet_size; ++s) {
      Word w{static_cast<Sym>(s)};
      if (factor_allowed(w)) ++usable;
    }
    return usable >= 1;
  }
  GramGraph g = GramGraph::build(*this);
  g.prune();
  int cap = static_cast<int>(g.states.size() * g.states.size()) + 2;
  return g.all_pairs_exponent(std::min(cap, 64)) > 0;
}

int SymbolicSystem::specification_gap() const {
  if (forbidden_words.empty()) return 0;
  int q = max_forbidden_len();
  if (q == 1) return 0;
  GramGraph g = GramGraph::build(*this);
  g.prune();
  int cap = static_cast<int>(g.states.size() * g.states.size()) + 2;
  int t = g.all_pairs_exponent(std::min(cap, 64));
  if (t < 0) throw std::runtime_error("system does not satisfy specification; no uniform gap");
  return std::max(0, t - (q - 1));
}

Point SymbolicSystem::extend_word_to_point(const Word& w) const {
  if (!factor_allowed(w))
    throw std::invalid_argument("extend_word_to_point: word not allowed: " + word_str(w));
  if (forbidden_words.empty()) return Point::word_then_constant(w, 0);
  int q = max_forbidden_len();
  int ctx = q - 1;

  // symbols whose one-window extension stays allowed, smallest first
  auto step_options = [&](const Word& word) {
    std::vector<Sym> opts;
    Word probe(word.end() - std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(word.size()), ctx),
               word.end());
    probe.push_back(0);
    for (int s = 0; s < alphabet_size; ++s) {
      probe.back() = static_cast<Sym>(s);
      if (factor_allowed(probe)) opts.push_back(static_cast<Sym>(s));
    }
    return opts;
  };

  // out-alive grams: those an infinite continuation can pass through
  GramGraph g = GramGraph::build(*this);
  std::vector<bool> alive(g.states.size(), true);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < g.states.size(); ++i) {
      if (!alive[i]) continue;
      bool out = false;
      for (int to : g.next[i])
        if (to >= 0 && alive[static_cast<std::size_t>(to)]) out = true;
      if (!out) {
        alive[i] = false;
        changed = true;
      }
    }
  }
  auto gram_index = [&](const Word& word) {
    Word gram(word.end() - ctx, word.end());
    auto it = std::lower_bound(g.states.begin(), g.states.end(), gram);
    if (it == g.states.end() || *it != gram) return -1;
    return static_cast<int>(it - g.states.begin());
  };

  // grow to context length with an exhaustive search (the greedy rule
  // below can only be trusted once aliveness is checkable)
  Word cur = w;
  if (static_cast<int>(cur.size()) < ctx) {
    std::function<bool(Word&)> grow = [&](Word& word) -> bool {
      if (static_cast<int>(word.size()) == ctx) {
        int gi = gram_index(word);
        return gi >= 0 && alive[static_cast<std::size_t>(gi)];
      }
      for (Sym s : step_options(word)) {
        word.push_back(s);
        if (grow(word)) return true;
        word.pop_back();
      }
      return false;
    };
    if (!grow(cur))
      throw std::invalid_argument("extend_word_to_point: no infinite continuation of " +
                                  word_str(w));
  } else {
    int gi = gram_index(cur);
    if (gi < 0 || !alive[static_cast<std::size_t>(gi)])
      throw std::invalid_argument("extend_word_to_point: no infinite continuation of " +
                                  word_str(w));
  }

  // walk smallest alive successors until a gram repeats
  std::vector<int> seen_at(g.states.size(), -1);
  Word emitted = cur;
  int pos = static_cast<int>(cur.size());
  int gi = gram_index(cur);
  seen_at[static_cast<std::size_t>(gi)] = pos;
  for (;;) {
    int chosen = -1;
    for (int s = 0; s < alphabet_size; ++s) {
      int to = g.next[static_cast<std::size_t>(gi)][static_cast<std::size_t>(s)];
      if (to >= 0 && alive[static_cast<std::size_t>(to)]) {
        chosen = s;
        gi = to;
        break;
      }
    }
    if (chosen < 0)
      throw std::logic_error("extend_word_to_point: alive gram lost its successors");
    emitted.push_back(static_cast<Sym>(chosen));
    ++pos;
    if (seen_at[static_cast<std::size_t>(gi)] >= 0) {
      int start = seen_at[static_cast<std::size_t>(gi)];
      Word prefix(emitted.begin(), emitted.begin() + start);
      Word block(emitted.begin() + start, emitted.end());
      return Point::word_then_periodic(std::move(prefix), std::move(block));
    }
    seen_at[static_cast<std::size_t>(gi)] = pos;
  }
}

Point Point::constant(Sym s) {
  Point p;
  p.tail_kind = Tail::Constant;
  p.tail = {s};
  return p;
}

Point Point::periodic(Word block) {
  if (block.empty()) throw std::invalid_argument("periodic block must be nonempty");
  Point p;
  p.tail_kind = Tail::Periodic;
  p.tail = std::move(block);
  return p;
}

Point Point::word_then_constant(Word prefix, Sym s) {
  Point p = constant(s);
  p.prefix = std::move(prefix);
  return p;
}

Point Point::word_then_periodic(Word prefix, Word block) {
  Point p = periodic(std::move(block));
  p.prefix = std::move(prefix);
  return p;
}

Point Point::shifted(std::size_t j) const {
  Point p = *this;
  if (j <= prefix.size()) {
    p.prefix.erase(p.prefix.begin(), p.prefix.begin() + static_cast<std::ptrdiff_t>(j));
    return p;
  }
  std::size_t into = j - prefix.size();
  p.prefix.clear();
  if (tail_kind == Tail::Constant) return p;
  std::size_t r = into % tail.size();
  Word rot(tail.begin() + static_cast<std::ptrdiff_t>(r), tail.end());
  rot.insert(rot.end(), tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(r));
  p.tail = std::move(rot);
  return p;
}

Word Point::first(std::size_t len) const {
  Word w(len);
  for (std::size_t i = 0; i < len; ++i) w[i] = at(i);
  return w;
}

bool Point::valid_for(const SymbolicSystem& sys) const {
  for (Sym s : prefix)
    if (s >= sys.alphabet_size) return false;
  for (Sym s : tail)
    if (s >= sys.alphabet_size) return false;
  int q = sys.max_forbidden_len();
  if (q == 0) return true;
  std::size_t span = prefix.size() + 2 * eventual_period() + static_cast<std::size_t>(q);
  return sys.factor_allowed(first(span));
}

Potential Potential::zero() { return Potential{}; }

Potential Potential::constant(double c) {
  Potential p;
  p.kind = Kind::Constant;
  p.c = c;
  return p;
}

Potential Potential::coordinate_affine(double a, double b) {
  Potential p;
  p.kind = Kind::CoordinateAffine;
  p.a = a;
  p.b = b;
  return p;
}

Potential Potential::cylinder(int depth, std::vector<double> table) {
  Potential p;
  p.kind = Kind::Cylinder;
  p.depth = depth;
  p.table = std::move(table);
  return p;
}

double ResolvedPotential::min_value() const {
  return *std::min_element(table.begin(), table.end());
}

double ResolvedPotential::max_value() const {
  return *std::max_element(table.begin(), table.end());
}

ResolvedPotential resolve(const Potential& p, const SymbolicSystem& sys) {
  ResolvedPotential r;
  int k = sys.alphabet_size;
  switch (p.kind) {
    case Potential::Kind::Zero:
      r.depth = 1;
      r.table.assign(static_cast<std::size_t>(k), 0.0);
      break;
    case Potential::Kind::Constant:
      r.depth = 1;
      r.table.assign(static_cast<std::size_t>(k), p.c);
      break;
    case Potential::Kind::CoordinateAffine:
      r.depth = 1;
      r.table.resize(static_cast<std::size_t>(k));
      for (int s = 0; s < k; ++s) r.table[static_cast<std::size_t>(s)] = p.a * sys.embed(static_cast<Sym>(s)) + p.b;
      break;
    case Potential::Kind::Cylinder: {
      if (p.depth < 1 || p.depth > 4) throw std::invalid_argument("cylinder potential depth must be 1..4");
      std::size_t expect = 1;
      for (int i = 0; i < p.depth; ++i) expect *= static_cast<std::size_t>(k);
      if (p.table.size() != expect)
        throw std::invalid_argument("cylinder potential table has wrong size (expected " +
                                    std::to_string(expect) + ")");
      r.depth = p.depth;
      r.table = p.table;
      break;
    }
  }
  // Integer lattice when every entry is a modest rational. All shipped
  // potentials land here; irrational tables just lose the exact path.
  std::vector<std::int64_t> nums(r.table.size());
  std::int64_t common = 1;
  bool ok = true;
  std::vector<std::pair<std::int64_t, std::int64_t>> fracs(r.table.size());
  for (std::size_t i = 0; i < r.table.size() && ok; ++i) {
    std::int64_t nu, de;
    if (!rationalize(r.table[i], 1000000, 1e-9, nu, de)) {
      ok = false;
      break;
    }
    fracs[i] = {nu, de};
    std::int64_t g = std::gcd(common, de);
    double lcm_est = static_cast<double>(common) * static_cast<double>(de / g);
    if (lcm_est > 1e15) {
      ok = false;
      break;
    }
    common = common / g * de;
  }
  if (ok) {
    for (std::size_t i = 0; i < r.table.size(); ++i)
      nums[i] = fracs[i].first * (common / fracs[i].second);
    r.has_lattice = true;
    r.lattice_num = std::move(nums);
    r.lattice_den = common;
  }
  return r;
}

ResolvedPotential scale_potential(const ResolvedPotential& pot, double factor) {
  ResolvedPotential out = pot;
  for (double& v : out.table) v *= factor;
  out.has_lattice = false;
  out.lattice_num.clear();
  out.lattice_den = 1;
  return out;
}

namespace {

std::size_t lcm_sz(std::size_t a, std::size_t b) { return a / std::gcd(a, b) * b; }

// Index range that certifies agreement for eventually periodic points:
// if two orbits agree on [i, i+bound) they agree on [i, inf).
std::size_t agreement_bound(const Point& x, const Point& y, std::size_t i) {
  std::size_t px = x.prefix.size() > i ? x.prefix.size() - i : 0;
  std::size_t py = y.prefix.size() > i ? y.prefix.size() - i : 0;
  return std::max(px, py) + lcm_sz(x.eventual_period(), y.eventual_period());
}

double shift_distance(const SymbolicSystem& sys, const Point& x, const Point& y, std::size_t i) {
  std::size_t bound = agreement_bound(x, y, i);
  if (sys.metric_kind == MetricKind::Ultrametric2adic) {
    for (std::size_t j = 0; j < bound; ++j)
      if (x.at(i + j) != y.at(i + j)) return std::ldexp(1.0, -static_cast<int>(j));
    return 0.0;
  }
  double best = 0.0;
  for (std::size_t j = 0; j < bound; ++j) {
    double diff = std::abs(sys.embed(x.at(i + j)) - sys.embed(y.at(i + j)));
    if (diff > 0.0) best = std::max(best, std::ldexp(diff, -static_cast<int>(j)));
  }
  return best;
}

}  // namespace

double point_distance(const SymbolicSystem& sys, const Point& x, const Point& y) {
  return shift_distance(sys, x, y, 0);
}

double bowen_distance(const SymbolicSystem& sys, const Point& x, const Point& y, int n) {
  if (n < 1) throw std::invalid_argument("bowen_distance: n must be >= 1");
  double best = 0.0;
  for (int i = 0; i < n; ++i)
    best = std::max(best, shift_distance(sys, x, y, static_cast<std::size_t>(i)));
  return best;
}

std::int64_t birkhoff_sum_num(const SymbolicSystem& sys, const ResolvedPotential& pot,
                              const Point& x, int n) {
  if (n < 0) throw std::invalid_argument("birkhoff_sum: n must be >= 0");
  if (!pot.has_lattice) throw std::logic_error("birkhoff_sum_num: potential has no lattice");
  int k = sys.alphabet_size;
  std::int64_t acc = 0;
  for (int j = 0; j < n; ++j) {
    std::uint32_t idx = 0;
    for (int t = 0; t < pot.depth; ++t)
      idx = idx * static_cast<std::uint32_t>(k) + x.at(static_cast<std::size_t>(j + t));
    if (__builtin_add_overflow(acc, pot.lattice_num[idx], &acc))
      throw std::overflow_error("birkhoff_sum: lattice accumulator overflow");
  }
  return acc;
}

double birkhoff_sum(const SymbolicSystem& sys, const ResolvedPotential& pot, const Point& x,
                    int n) {
  if (n < 0) throw std::invalid_argument("birkhoff_sum: n must be >= 0");
  if (pot.has_lattice)
    return static_cast<double>(birkhoff_sum_num(sys, pot, x, n)) /
           static_cast<double>(pot.lattice_den);
  int k = sys.alphabet_size;
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    std::uint32_t idx = 0;
    for (int t = 0; t < pot.depth; ++t)
      idx = idx * static_cast<std::uint32_t>(k) + x.at(static_cast<std::size_t>(j + t));
    acc += pot.table[idx];
  }
  return acc;
}

double variation_bound(const SymbolicSystem& sys, const ResolvedPotential& pot, double eps) {
  int r = pot.depth;
  int k = sys.alphabet_size;
  std::size_t total = pot.table.size();
  std::vector<Word> words(total);
  {
    Word w(static_cast<std::size_t>(r));
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rest = idx;
      for (int i = r - 1; i >= 0; --i) {
        w[static_cast<std::size_t>(i)] = static_cast<Sym>(rest % static_cast<std::size_t>(k));
        rest /= static_cast<std::size_t>(k);
      }
      words[idx] = w;
    }
  }
  if (sys.metric_kind == MetricKind::Ultrametric2adic) {
    int agree = sys.ball_agreement_len(eps);
    if (agree >= r) return 0.0;
    // words sharing the first `agree` symbols form contiguous index
    // blocks (indices are MSB-first); take max oscillation per block
    std::size_t block = 1;
    for (int t = 0; t < r - agree; ++t) block *= static_cast<std::size_t>(k);
    double best = 0.0;
    for (std::size_t base = 0; base < total; base += block) {
      double lo = kPosInf, hi = kNegInf;
      for (std::size_t i = base; i < base + block; ++i) {
        if (!sys.factor_allowed(words[i])) continue;
        lo = std::min(lo, pot.table[i]);
        hi = std::max(hi, pot.table[i]);
      }
      if (hi > lo) best = std::max(best, hi - lo);
    }
    return best;
  }
  if (total > (1u << 16))
    throw std::invalid_argument("variation_bound: table too large for pairwise scan");
  double best = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    if (!sys.factor_allowed(words[i])) continue;
    for (std::size_t j = i + 1; j < total; ++j) {
      if (!sys.factor_allowed(words[j])) continue;
      bool compatible = true;
      for (int t = 0; t < r && compatible; ++t) {
        double diff = std::abs(sys.embed(words[i][static_cast<std::size_t>(t)]) -
                               sys.embed(words[j][static_cast<std::size_t>(t)]));
        if (!(diff < std::ldexp(eps, t))) compatible = false;
      }
      if (compatible) best = std::max(best, std::abs(pot.table[i] - pot.table[j]));
    }
  }
  return best;
}

DynamicalBallCylinder dynamical_ball_cylinder(const SymbolicSystem& sys,
                                              const BowenBallSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("dynamical ball: n must be >= 1");
  if (!(spec.eps > 0.0)) throw std::domain_error("dynamical ball: eps must be positive");
  if (!spec.center.valid_for(sys))
    throw std::invalid_argument("dynamical ball: center not in the subshift (forbidden factor in " +
                                word_str(spec.center.first(
                                    spec.center.prefix.size() + 2 * spec.center.eventual_period() +
                                    static_cast<std::size_t>(std::max(1, sys.max_forbidden_len())))) +
                                ")");
  DynamicalBallCylinder out;
  if (spec.eps >= sys.diameter()) {
    out.whole_space = true;
    return out;
  }
  int inner = spec.n - 1 + sys.ball_agreement_len(spec.eps);
  int forced_len = sys.forced_agreement_len(spec.eps);
  out.depth_inner = inner;
  out.depth_forced = forced_len >= 1 ? spec.n - 1 + forced_len : 0;
  out.word = spec.center.first(static_cast<std::size_t>(inner));
  out.exact = out.depth_inner == out.depth_forced;
  return out;
}

SubsetSpec SubsetSpec::whole() { return SubsetSpec{}; }

SubsetSpec SubsetSpec::in_cylinder(Word w) {
  SubsetSpec z;
  z.kind = Kind::Cylinder;
  z.cylinder = std::move(w);
  return z;
}

SubsetSpec SubsetSpec::single_point(Point p) {
  SubsetSpec z;
  z.kind = Kind::SinglePoint;
  z.point = std::move(p);
  return z;
}

PotentialRule PotentialRule::zero() { return PotentialRule{}; }

PotentialRule PotentialRule::constant(double c) {
  PotentialRule r;
  r.kind = Kind::Constant;
  r.c = c;
  return r;
}

PotentialRule PotentialRule::coordinate_affine(double a, double b) {
  PotentialRule r;
  r.kind = Kind::CoordinateAffine;
  r.a = a;
  r.b = b;
  return r;
}

PotentialRule PotentialRule::cylinder_fixed(Potential p) {
  PotentialRule r;
  r.kind = Kind::CylinderFixed;
  r.fixed = std::move(p);
  return r;
}

Potential PotentialRule::materialize(const SymbolicSystem&) const {
  switch (kind) {
    case Kind::Zero:
      return Potential::zero();
    case Kind::Constant:
      return Potential::constant(c);
    case Kind::CoordinateAffine:
      return Potential::coordinate_affine(a, b);
    case Kind::CylinderFixed:
      return fixed;
  }
  return Potential::zero();
}

SystemFamily SystemFamily::fixed(SymbolicSystem sys) {
  SystemFamily f;
  f.kind = Kind::Fixed;
  f.fixed_system = std::move(sys);
  return f;
}

SystemFamily SystemFamily::refined_grid(MetricKind m) {
  SystemFamily f;
  f.kind = Kind::RefinedGrid;
  f.refined_metric = m;
  return f;
}

SymbolicSystem SystemFamily::at(double eps) const {
  if (kind == Kind::Fixed) return fixed_system;
  if (!(eps > 0.0) || eps >= 1.0) throw std::domain_error("refined family needs eps in (0,1)");
  int k = static_cast<int>(std::ceil(1.0 / eps - 1e-12));
  k = std::max(k, 2);
  return SymbolicSystem::full_shift(k, refined_metric);
}

}  // namespace mdimlab
