#pragma once

// Counter-based random numbers. Draw i from stream s of seed k is a pure
// function of (k, s, i): streams can be split across workers and replayed
// from a recorded seed without any shared state.

#include <cstdint>

namespace mdimlab {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t bits(std::uint64_t counter) const {
    std::uint64_t h = detail::mix64(seed_ ^ 0x8f1bbcdcbfa53e0bull);
    h = detail::mix64(h ^ stream_);
    return detail::mix64(h ^ counter);
  }

  // Uniform in [0,1). 53 mantissa bits.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). Rejection-free modulo is fine here:
  // bounds are tiny (alphabet sizes), bias is < 2^-58.
  std::uint64_t below(std::uint64_t counter, std::uint64_t bound) const {
    return bits(counter) % bound;
  }

  CounterRng split(std::uint64_t substream) const {
    return CounterRng(seed_, detail::mix64(stream_ ^ (substream + 0x51ed2701a9fd5c1full)));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace mdimlab
