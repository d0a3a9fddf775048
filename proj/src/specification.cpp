#include "mdimlab/specification.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "mdimlab/rng.hpp"

namespace mdimlab {

namespace {

// Largest single-coordinate contribution to any Bowen distance. For the
// ultrametric a disagreement costs the full diameter once it is shifted
// to the front; on the grid the front weight is 1.
double symbol_distance(const SymbolicSystem& sys, Sym a, Sym b) {
  if (a == b) return 0.0;
  if (sys.metric_kind == MetricKind::Ultrametric2adic) return 1.0;
  return std::abs(sys.embed(a) - sys.embed(b));
}

// x with its first n coordinates dropped.
Point shift_point(const Point& x, long long n) {
  long long plen = static_cast<long long>(x.prefix.size());
  if (n <= plen) {
    Word rest(x.prefix.begin() + static_cast<std::ptrdiff_t>(n), x.prefix.end());
    if (x.tail_kind == Point::Tail::Constant)
      return rest.empty() ? Point::constant(x.tail[0])
                          : Point::word_then_constant(std::move(rest), x.tail[0]);
    return rest.empty() ? Point::periodic(x.tail)
                        : Point::word_then_periodic(std::move(rest), x.tail);
  }
  if (x.tail_kind == Point::Tail::Constant) return Point::constant(x.tail[0]);
  std::size_t r = static_cast<std::size_t>(n - plen) % x.tail.size();
  Word rot(x.tail.begin() + static_cast<std::ptrdiff_t>(r), x.tail.end());
  rot.insert(rot.end(), x.tail.begin(), x.tail.begin() + static_cast<std::ptrdiff_t>(r));
  return Point::periodic(std::move(rot));
}

// Lexicographically smallest filler of exactly `gap` symbols keeping
// every window across the junction allowed. left and right carry up to
// q-1 context symbols each, which covers every window that touches the
// filler.
bool find_filler(const SymbolicSystem& sys, const Word& left, const Word& right, int gap,
                 Word& out) {
  int q = sys.max_forbidden_len();
  Word buf = left;
  std::function<bool(int)> dfs = [&](int depth) -> bool {
    if (depth == gap) {
      Word probe = buf;
      probe.insert(probe.end(), right.begin(), right.end());
      return sys.factor_allowed(probe);
    }
    for (int s = 0; s < sys.alphabet_size; ++s) {
      buf.push_back(static_cast<Sym>(s));
      std::size_t t = std::min(buf.size(), static_cast<std::size_t>(std::max(q, 1)));
      bool ok = q == 0 || sys.factor_allowed(std::span<const Sym>(buf.data() + buf.size() - t, t));
      if (ok && dfs(depth + 1)) return true;
      buf.pop_back();
    }
    return false;
  };
  if (!dfs(0)) return false;
  out.assign(buf.begin() + static_cast<std::ptrdiff_t>(left.size()), buf.end());
  return true;
}

// Transition table on the (q-1)-grams that sit inside two-sided runs.
// Blocks sampled along these states always admit a connector of the
// system's declared gap, which is what the leveled splicing relies on.
struct GramTable {
  int k = 2;
  int len = 0;
  std::vector<Word> words;
  std::vector<std::vector<int>> next;
  std::map<Word, int> id;

  static GramTable build(const SymbolicSystem& sys) {
    GramTable g;
    g.k = sys.alphabet_size;
    g.len = sys.max_forbidden_len() - 1;
    std::size_t total = 1;
    for (int i = 0; i < g.len; ++i) {
      total *= static_cast<std::size_t>(g.k);
      if (total > (1u << 18))
        throw std::invalid_argument("gram table: forbidden words too deep to enumerate");
    }
    Word cur(static_cast<std::size_t>(g.len), 0);
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rest = idx;
      for (int i = g.len - 1; i >= 0; --i) {
        cur[static_cast<std::size_t>(i)] = static_cast<Sym>(rest % static_cast<std::size_t>(g.k));
        rest /= static_cast<std::size_t>(g.k);
      }
      if (sys.factor_allowed(cur)) g.words.push_back(cur);
    }
    g.next.assign(g.words.size(), std::vector<int>(static_cast<std::size_t>(g.k), -1));
    auto raw_id = [&](const Word& w) {
      auto it = std::lower_bound(g.words.begin(), g.words.end(), w);
      if (it == g.words.end() || *it != w) return -1;
      return static_cast<int>(it - g.words.begin());
    };
    for (std::size_t i = 0; i < g.words.size(); ++i) {
      Word ext = g.words[i];
      ext.push_back(0);
      for (int s = 0; s < g.k; ++s) {
        ext.back() = static_cast<Sym>(s);
        if (!sys.factor_allowed(ext)) continue;
        Word nxt(ext.begin() + 1, ext.end());
        g.next[i][static_cast<std::size_t>(s)] = raw_id(nxt);
      }
    }

    // keep only grams with both an incoming and an outgoing edge, to a
    // fixed point; what survives is the part every block must live in
    bool changed = true;
    while (changed && !g.words.empty()) {
      changed = false;
      std::size_t s = g.words.size();
      std::vector<bool> has_in(s, false), has_out(s, false);
      for (std::size_t i = 0; i < s; ++i)
        for (int to : g.next[i])
          if (to >= 0) {
            has_out[i] = true;
            has_in[static_cast<std::size_t>(to)] = true;
          }
      std::vector<int> remap(s, -1);
      std::vector<Word> kept;
      std::vector<std::vector<int>> kept_next;
      for (std::size_t i = 0; i < s; ++i) {
        if (has_in[i] && has_out[i]) {
          remap[i] = static_cast<int>(kept.size());
          kept.push_back(g.words[i]);
          kept_next.push_back(g.next[i]);
        } else {
          changed = true;
        }
      }
      if (!changed) break;
      for (auto& row : kept_next)
        for (int& to : row) to = to >= 0 ? remap[static_cast<std::size_t>(to)] : -1;
      g.words = std::move(kept);
      g.next = std::move(kept_next);
    }
    for (std::size_t i = 0; i < g.words.size(); ++i) g.id[g.words[i]] = static_cast<int>(i);
    return g;
  }

  int state_of(std::span<const Sym> gram) const {
    auto it = id.find(Word(gram.begin(), gram.end()));
    return it == id.end() ? -1 : it->second;
  }

  int walk(int s, std::span<const Sym> w) const {
    for (Sym c : w) {
      if (s < 0) return -1;
      s = next[static_cast<std::size_t>(s)][c];
    }
    return s;
  }
};

// Every filler of exactly `gap` symbols running from `from` through the
// table and then admitting `right` (the next block's first gram). The
// cap only bounds how much variety the seeded pick can draw from.
std::vector<Word> collect_fillers(const GramTable& g, int from, std::span<const Sym> right,
                                  int gap, std::size_t cap) {
  std::vector<Word> out;
  Word f;
  std::function<void(int)> dfs = [&](int s) {
    if (out.size() >= cap) return;
    if (static_cast<int>(f.size()) == gap) {
      if (g.walk(s, right) >= 0) out.push_back(f);
      return;
    }
    for (int sym = 0; sym < g.k; ++sym) {
      int to = g.next[static_cast<std::size_t>(s)][static_cast<std::size_t>(sym)];
      if (to < 0) continue;
      f.push_back(static_cast<Sym>(sym));
      dfs(to);
      f.pop_back();
    }
  };
  if (from >= 0) dfs(from);
  return out;
}

// Exact mean of the potential over the fully contained windows of w.
double word_mean(const SymbolicSystem& sys, const ResolvedPotential& phi,
                 std::span<const Sym> w) {
  int k = sys.alphabet_size;
  int windows = static_cast<int>(w.size()) - phi.depth + 1;
  std::int64_t sum = 0;
  for (int j = 0; j < windows; ++j) {
    std::uint32_t idx = 0;
    for (int t = 0; t < phi.depth; ++t)
      idx = idx * static_cast<std::uint32_t>(k) + w[static_cast<std::size_t>(j + t)];
    sum += phi.lattice_num[idx];
  }
  return static_cast<double>(sum) /
         (static_cast<double>(windows) * static_cast<double>(phi.lattice_den));
}

// Counts of allowed words of one length grouped by (context, shifted
// window sum), so qualifying words can be drawn uniformly and replayed
// from a counter. Contexts cover both the forbidden-word memory and the
// potential window; keys are lattice numerators shifted to start at 0.
struct LevelSampler {
  const SymbolicSystem& sys;
  const ResolvedPotential& phi;
  const GramTable* grams;
  double alpha = 0.0, delta = 0.0;
  int n = 0, q = 0, ctx_cap = 0, windows = 0;
  std::int64_t num_min = 0;

  using State = std::pair<std::uint64_t, std::int64_t>;
  std::vector<std::map<State, double>> fwd, bwd;
  double total = 0.0;

  LevelSampler(const SymbolicSystem& s, const ResolvedPotential& p, const GramTable* g,
               double a, double d, int len)
      : sys(s), phi(p), grams(g), alpha(a), delta(d), n(len) {
    q = sys.max_forbidden_len();
    ctx_cap = std::max({q - 1, phi.depth - 1, 0});
    windows = n - phi.depth + 1;
    num_min = *std::min_element(phi.lattice_num.begin(), phi.lattice_num.end());
    build();
  }

  Word decode(std::uint64_t code) const {
    Word w;
    while (code > 1) {
      w.push_back(static_cast<Sym>(code % static_cast<std::uint64_t>(sys.alphabet_size)));
      code /= static_cast<std::uint64_t>(sys.alphabet_size);
    }
    std::reverse(w.begin(), w.end());
    return w;
  }

  double mean_of(std::int64_t key) const {
    return static_cast<double>(key + static_cast<std::int64_t>(windows) * num_min) /
           (static_cast<double>(windows) * static_cast<double>(phi.lattice_den));
  }
  bool qualifies(std::int64_t key) const { return std::abs(mean_of(key) - alpha) <= delta; }

  // legal continuations of a state after i symbols
  template <class Fn>
  void transitions(int i, const Word& ctx, std::int64_t key, Fn&& fn) const {
    int k = sys.alphabet_size;
    Word w = ctx;
    w.push_back(0);
    for (int s = 0; s < k; ++s) {
      w.back() = static_cast<Sym>(s);
      if (q > 0) {
        std::size_t t = std::min(w.size(), static_cast<std::size_t>(q));
        if (!sys.factor_allowed(std::span<const Sym>(w.data() + w.size() - t, t))) continue;
      }
      if (grams && i + 1 >= q - 1) {
        std::span<const Sym> gram(w.data() + w.size() - static_cast<std::size_t>(q - 1),
                                  static_cast<std::size_t>(q - 1));
        if (grams->state_of(gram) < 0) continue;
      }
      std::int64_t nk = key;
      if (i + 1 >= phi.depth) {
        std::uint32_t idx = 0;
        for (std::size_t j = w.size() - static_cast<std::size_t>(phi.depth); j < w.size(); ++j)
          idx = idx * static_cast<std::uint32_t>(k) + w[j];
        nk += phi.lattice_num[idx] - num_min;
      }
      std::uint64_t ncode = 1;
      std::size_t keep = std::min(w.size(), static_cast<std::size_t>(ctx_cap));
      for (std::size_t j = w.size() - keep; j < w.size(); ++j)
        ncode = ncode * static_cast<std::uint64_t>(k) + w[j];
      fn(s, ncode, nk);
    }
  }

  void build() {
    fwd.assign(static_cast<std::size_t>(n) + 1, {});
    fwd[0][{1ull, 0}] = 1.0;
    for (int i = 0; i < n; ++i) {
      for (const auto& [st, cnt] : fwd[static_cast<std::size_t>(i)]) {
        Word ctx = decode(st.first);
        transitions(i, ctx, st.second, [&](int, std::uint64_t nc, std::int64_t nk) {
          fwd[static_cast<std::size_t>(i) + 1][{nc, nk}] += cnt;
        });
      }
      if (fwd[static_cast<std::size_t>(i) + 1].size() > (1u << 20))
        throw std::invalid_argument("word sampler: value lattice too fine to count exactly");
    }
    bwd.assign(static_cast<std::size_t>(n) + 1, {});
    total = 0.0;
    for (const auto& [st, cnt] : fwd[static_cast<std::size_t>(n)])
      if (qualifies(st.second)) {
        bwd[static_cast<std::size_t>(n)][st] = 1.0;
        total += cnt;
      }
    for (int i = n - 1; i >= 0; --i)
      for (const auto& [st, cnt] : fwd[static_cast<std::size_t>(i)]) {
        double acc = 0.0;
        Word ctx = decode(st.first);
        transitions(i, ctx, st.second, [&](int, std::uint64_t nc, std::int64_t nk) {
          auto it = bwd[static_cast<std::size_t>(i) + 1].find({nc, nk});
          if (it != bwd[static_cast<std::size_t>(i) + 1].end()) acc += it->second;
        });
        if (acc > 0.0) bwd[static_cast<std::size_t>(i)][st] = acc;
      }
  }

  // one qualifying word, uniform over the exact counts
  Word draw(const CounterRng& rng, std::uint64_t& ctr) const {
    Word w;
    std::uint64_t code = 1;
    std::int64_t key = 0;
    for (int i = 0; i < n; ++i) {
      struct Opt {
        int s;
        std::uint64_t code;
        std::int64_t key;
        double weight;
      };
      std::vector<Opt> opts;
      Word ctx = decode(code);
      transitions(i, ctx, key, [&](int s, std::uint64_t nc, std::int64_t nk) {
        auto it = bwd[static_cast<std::size_t>(i) + 1].find({nc, nk});
        if (it != bwd[static_cast<std::size_t>(i) + 1].end())
          opts.push_back({s, nc, nk, it->second});
      });
      if (opts.empty()) throw std::logic_error("word sampler: dead end in a counted path");
      double tot = 0.0;
      for (const Opt& o : opts) tot += o.weight;
      double u = rng.uniform(ctr++) * tot;
      const Opt* pick = &opts.back();
      double acc = 0.0;
      for (const Opt& o : opts)
        if ((acc += o.weight) > u) {
          pick = &o;
          break;
        }
      w.push_back(static_cast<Sym>(pick->s));
      code = pick->code;
      key = pick->key;
    }
    return w;
  }
};

}  // namespace

void GluingRequest::validate(const SymbolicSystem& sys) const {
  if (segments.empty()) throw std::invalid_argument("gluing: no segments");
  if (gap < 0) throw std::invalid_argument("gluing: negative gap");
  if (!(epsilon > 0.0) || epsilon > sys.diameter())
    throw std::invalid_argument("gluing: epsilon must lie in (0, diameter]");
  long long total = 0;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    const GluingSegment& seg = segments[j];
    if (seg.length < 1)
      throw std::invalid_argument("gluing: segment windows need at least one symbol");
    Word w;
    w.reserve(static_cast<std::size_t>(seg.length));
    for (int i = 0; i < seg.length; ++i) w.push_back(seg.point.at(static_cast<std::size_t>(i)));
    if (!sys.factor_allowed(w))
      throw std::invalid_argument("gluing: segment " + std::to_string(j + 1) +
                                  " window leaves the subshift");
    total += seg.length + gap;
  }
  if (total > (1ll << 22)) throw std::invalid_argument("gluing: assembled prefix too long");
}

Point glue(const SymbolicSystem& sys, const GluingRequest& req, GluingLayout* layout) {
  req.validate(sys);
  int q = sys.max_forbidden_len();
  std::size_t ctx = static_cast<std::size_t>(std::max(q - 1, 0));
  Word assembled;
  std::vector<long long> offsets;
  for (std::size_t j = 0; j < req.segments.size(); ++j) {
    const GluingSegment& seg = req.segments[j];
    Word block;
    block.reserve(static_cast<std::size_t>(seg.length));
    for (int i = 0; i < seg.length; ++i)
      block.push_back(seg.point.at(static_cast<std::size_t>(i)));
    if (j > 0) {
      Word left(assembled.end() -
                    static_cast<std::ptrdiff_t>(std::min(assembled.size(), ctx)),
                assembled.end());
      Word right(block.begin(),
                 block.begin() + static_cast<std::ptrdiff_t>(std::min(block.size(), ctx)));
      Word filler;
      if (!find_filler(sys, left, right, req.gap, filler))
        throw std::invalid_argument("gluing: no connector of " + std::to_string(req.gap) +
                                    " symbols fits before segment " + std::to_string(j + 1) +
                                    "; the declared gap is too small for this system");
      assembled.insert(assembled.end(), filler.begin(), filler.end());
    }
    offsets.push_back(static_cast<long long>(assembled.size()));
    assembled.insert(assembled.end(), block.begin(), block.end());
  }
  long long total = static_cast<long long>(assembled.size());

  // continue with the last segment's own orbit, so its window is
  // shadowed with genuinely zero Bowen distance
  const GluingSegment& last = req.segments.back();
  Point rest = shift_point(last.point, last.length);
  Word prefix = std::move(assembled);
  prefix.insert(prefix.end(), rest.prefix.begin(), rest.prefix.end());
  Point out = rest.tail_kind == Point::Tail::Constant
                  ? Point::word_then_constant(std::move(prefix), rest.tail[0])
                  : Point::word_then_periodic(std::move(prefix), rest.tail);

  if (q > 0) {
    // blocks and junctions are individually allowed; this catches
    // blocks shorter than the memory interacting across a filler
    std::size_t look =
        out.prefix.size() + 2 * (static_cast<std::size_t>(q) + out.tail.size());
    Word chk;
    chk.reserve(look);
    for (std::size_t i = 0; i < look; ++i) chk.push_back(out.at(i));
    if (!sys.factor_allowed(chk))
      throw std::invalid_argument(
          "gluing: assembled point leaves the subshift; use a larger gap or longer "
          "segment windows");
  }
  if (layout) {
    layout->offsets = std::move(offsets);
    layout->total = total;
  }
  return out;
}

double window_shadow_distance(const SymbolicSystem& sys, const Point& x, long long offset,
                              const Point& y, int length) {
  if (offset < 0 || length < 1)
    throw std::invalid_argument("window_shadow_distance: bad window");
  double best = 0.0;
  for (int p = 0; p < length; ++p)
    best = std::max(best, symbol_distance(sys, x.at(static_cast<std::size_t>(offset + p)),
                                          y.at(static_cast<std::size_t>(p))));
  return best;
}

std::vector<long long> GluingSchedule::times(const SymbolicSystem& sys) const {
  if (word_lens.empty() || block_counts.size() != word_lens.size())
    throw std::invalid_argument("schedule: word_lens and block_counts must align");
  int m = sys.specification_gap();
  std::vector<long long> ts;
  long long t = 0;
  for (std::size_t i = 0; i < word_lens.size(); ++i) {
    long long c = static_cast<long long>(block_counts[i]) * word_lens[i] +
                  static_cast<long long>(block_counts[i] - 1) * m;
    t = ts.empty() ? c : t + m + c;
    ts.push_back(t);
  }
  return ts;
}

void GluingSchedule::validate(const SymbolicSystem& sys) const {
  std::size_t k = word_lens.size();
  if (k == 0 || block_counts.size() != k || deltas.size() != k)
    throw std::invalid_argument("schedule: word_lens, block_counts and deltas must align");
  if (k > 16) throw std::invalid_argument("schedule: too many levels");
  if (!(epsilon > 0.0) || epsilon > sys.diameter())
    throw std::invalid_argument("schedule: epsilon must lie in (0, diameter]");
  int q = sys.max_forbidden_len();
  for (std::size_t i = 0; i < k; ++i) {
    if (word_lens[i] < std::max(1, q - 1))
      throw std::invalid_argument("schedule: words must cover the forbidden-word memory");
    if (i > 0 && word_lens[i] < word_lens[i - 1])
      throw std::invalid_argument("schedule: word lengths must not shrink");
    if (block_counts[i] < 1)
      throw std::invalid_argument("schedule: block counts must be positive");
    if (!(deltas[i] > 0.0)) throw std::invalid_argument("schedule: deltas must be positive");
    if (i > 0 && deltas[i] > deltas[i - 1])
      throw std::invalid_argument("schedule: deltas must not grow");
  }
  if (times(sys).back() > (1ll << 20))
    throw std::invalid_argument("schedule: assembled prefix too long");
}

KAlphaPoint build_K_alpha_point(const SymbolicSystem& sys, const ResolvedPotential& phi,
                                double alpha, const GluingSchedule& schedule,
                                std::uint64_t seed) {
  schedule.validate(sys);
  if (!phi.has_lattice)
    throw std::invalid_argument(
        "build: exact word counting needs a potential on a rational value lattice");
  for (std::size_t i = 0; i < schedule.word_lens.size(); ++i)
    if (schedule.word_lens[i] < phi.depth)
      throw std::invalid_argument("build: level " + std::to_string(i + 1) +
                                  " words cannot hold one potential window");
  int q = sys.max_forbidden_len();
  int ctx_cap = std::max({q - 1, phi.depth - 1, 0});
  if (static_cast<double>(ctx_cap) * std::log2(static_cast<double>(sys.alphabet_size)) > 40.0)
    throw std::invalid_argument("build: context too deep for exact counting");

  int m = sys.specification_gap();
  std::vector<long long> ts = schedule.times(sys);
  GramTable grams;
  bool track_grams = q >= 2;
  if (track_grams) {
    grams = GramTable::build(sys);
    if (grams.words.empty())
      throw std::runtime_error("build: the system has no two-sided runs");
  }

  KAlphaPoint out;
  out.alpha = alpha;
  out.seed = seed;

  Word prefix;
  prefix.reserve(static_cast<std::size_t>(ts.back()));
  double qual_sum = 0.0;       // per-window qualification budget so far
  long long qual_windows = 0;  // fully contained windows so far
  double dev_max = std::max({phi.max_value() - alpha, alpha - phi.min_value(), 0.0});

  for (int level = 1; level <= schedule.levels(); ++level) {
    int n = schedule.word_lens[static_cast<std::size_t>(level - 1)];
    int blocks = schedule.block_counts[static_cast<std::size_t>(level - 1)];
    double delta = schedule.deltas[static_cast<std::size_t>(level - 1)];
    LevelSampler sampler(sys, phi, track_grams ? &grams : nullptr, alpha, delta, n);
    if (!(sampler.total > 0.0))
      throw std::invalid_argument("build: level " + std::to_string(level) +
                                  ": no allowed words of length " + std::to_string(n) +
                                  " with mean within " + std::to_string(delta) + " of alpha");

    // one stream per level, so truncating the schedule preserves the
    // symbols already built (the realized cylinders are nested)
    CounterRng rng(seed, static_cast<std::uint64_t>(level));
    std::uint64_t ctr = 0;
    double worst = 0.0;
    for (int b = 0; b < blocks; ++b) {
      Word w = sampler.draw(rng, ctr);
      worst = std::max(worst, std::abs(word_mean(sys, phi, w) - alpha));
      if (!prefix.empty() && track_grams) {
        std::span<const Sym> left(prefix.data() + prefix.size() - static_cast<std::size_t>(q - 1),
                                  static_cast<std::size_t>(q - 1));
        std::span<const Sym> right(w.data(), static_cast<std::size_t>(q - 1));
        std::vector<Word> fillers =
            collect_fillers(grams, grams.state_of(left), right, m, 4096);
        if (fillers.empty()) throw std::logic_error("build: junction admitted no connector");
        const Word& f = fillers[rng.below(ctr++, fillers.size())];
        prefix.insert(prefix.end(), f.begin(), f.end());
      }
      prefix.insert(prefix.end(), w.begin(), w.end());
    }
    if (static_cast<long long>(prefix.size()) != ts[static_cast<std::size_t>(level - 1)])
      throw std::logic_error("build: assembled length drifted from the schedule");

    LevelCertificate cert;
    cert.level = level;
    cert.word_len = n;
    cert.block_count = blocks;
    cert.gap = m;
    cert.delta = delta;
    cert.epsilon_k = std::ldexp(schedule.epsilon, -(level - 1));
    cert.worst_word_dev = worst;
    cert.t = ts[static_cast<std::size_t>(level - 1)];
    qual_windows += static_cast<long long>(blocks) * sampler.windows;
    qual_sum += static_cast<double>(blocks) * sampler.windows * delta;
    cert.envelope = (qual_sum + static_cast<double>(cert.t - qual_windows) * dev_max) /
                    static_cast<double>(cert.t);
    out.levels.push_back(cert);
  }

  out.prefix = prefix;
  out.point = sys.extend_word_to_point(prefix);
  out.pass = true;
  for (LevelCertificate& cert : out.levels) {
    // recomputed from the emitted symbols, not from the sampler
    cert.mean_at_t =
        birkhoff_sum(sys, phi, out.point, static_cast<int>(cert.t)) / static_cast<double>(cert.t);
    cert.dev_at_t = std::abs(cert.mean_at_t - alpha);
    if (cert.dev_at_t > cert.envelope + 1e-12) out.pass = false;  // slack for rounding only
  }
  return out;
}

std::vector<KAlphaPoint> build_K_alpha_family(const SymbolicSystem& sys,
                                              const ResolvedPotential& phi, double alpha,
                                              const GluingSchedule& schedule, std::uint64_t seed,
                                              int count) {
  if (count < 1 || count > 4096)
    throw std::invalid_argument("family: count must be in [1, 4096]");
  schedule.validate(sys);
  int n1 = schedule.word_lens.front();
  CounterRng derive(seed, 0);
  std::uint64_t ctr = 0;
  std::vector<KAlphaPoint> fam;
  fam.reserve(static_cast<std::size_t>(count));
  std::vector<Word> firsts;
  while (static_cast<int>(fam.size()) < count) {
    int attempts = 0;
    for (;; ++attempts) {
      if (attempts >= 200)
        throw std::runtime_error("family: the qualifying words cannot support " +
                                 std::to_string(count) + " separated members");
      KAlphaPoint cand = build_K_alpha_point(sys, phi, alpha, schedule, derive.bits(ctr++));
      Word first(cand.prefix.begin(), cand.prefix.begin() + n1);
      bool separated = true;
      for (const Word& f : firsts) {
        double sep = 0.0;
        for (int p = 0; p < n1; ++p)
          sep = std::max(sep, symbol_distance(sys, first[static_cast<std::size_t>(p)],
                                              f[static_cast<std::size_t>(p)]));
        if (sep < schedule.epsilon) {
          separated = false;
          break;
        }
      }
      if (separated) {
        firsts.push_back(std::move(first));
        fam.push_back(std::move(cand));
        break;
      }
    }
  }
  return fam;
}

std::string KAlphaPoint::certificate_json() const {
  nlohmann::json j;
  j["alpha"] = alpha;
  j["seed"] = seed;
  j["pass"] = pass;
  j["levels"] = nlohmann::json::array();
  for (const LevelCertificate& c : levels)
    j["levels"].push_back({{"level", c.level},
                           {"word_len", c.word_len},
                           {"block_count", c.block_count},
                           {"gap", c.gap},
                           {"delta", c.delta},
                           {"epsilon", c.epsilon_k},
                           {"worst_word_dev", c.worst_word_dev},
                           {"t", c.t},
                           {"mean_at_t", c.mean_at_t},
                           {"dev_at_t", c.dev_at_t},
                           {"envelope", c.envelope}});
  return j.dump(2);
}

MembershipReport verify_membership_trend(const SymbolicSystem& sys, const ResolvedPotential& phi,
                                         double alpha, const Point& x,
                                         std::span<const long long> checkpoints,
                                         std::span<const double> bounds) {
  if (checkpoints.empty() || checkpoints.size() != bounds.size())
    throw std::invalid_argument("membership: checkpoints and bounds must align and be nonempty");
  MembershipReport rep;
  rep.pass = true;
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  long long prev = 0;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    long long at = checkpoints[i];
    if (at <= prev) throw std::invalid_argument("membership: checkpoints must increase");
    if (at > (1ll << 26)) throw std::invalid_argument("membership: checkpoint too large");
    prev = at;
    MembershipCheck c;
    c.m = at;
    c.bound = bounds[i];
    c.mean = birkhoff_sum(sys, phi, x, static_cast<int>(at)) / static_cast<double>(at);
    c.deviation = std::abs(c.mean - alpha);
    c.ok = c.deviation <= c.bound;
    rep.pass = rep.pass && c.ok;
    rep.worst_margin = std::max(rep.worst_margin, c.deviation - c.bound);
    rep.checks.push_back(c);
  }
  return rep;
}

MembershipReport verify_membership_trend(const SymbolicSystem& sys, const ResolvedPotential& phi,
                                         const KAlphaPoint& built) {
  std::vector<long long> cps;
  std::vector<double> bds;
  for (const LevelCertificate& c : built.levels) {
    cps.push_back(c.t);
    bds.push_back(c.envelope);
  }
  return verify_membership_trend(sys, phi, built.alpha, built.point, cps, bds);
}

}  // namespace mdimlab
