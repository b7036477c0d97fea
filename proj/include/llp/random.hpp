#pragma once

#include <cstdint>
#include <random>
#include <vector>

// Deterministic randomness helpers.
//
// std::mt19937_64 is fully specified by the standard, but the std::*_distribution
// adaptors are not (their output may differ between standard libraries).  Sweep
// and verify runs must be byte-identical across reruns and machines, so the
// distribution layer is pinned down here instead.

namespace llp {

// SplitMix64 step, used to mix seed components (Steele et al., "Fast splittable
// pseudorandom number generators").
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Collapses (base, stream ids...) into one 64-bit seed.  Used to give every
// (n, trial) cell of a sweep its own independent, reproducible stream.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> streams) {
  std::uint64_t s = base;
  splitmix64(s);
  for (std::uint64_t v : streams) {
    s ^= v + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    splitmix64(s);
  }
  std::uint64_t out = s;
  return splitmix64(out);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound).  Unbiased via rejection of the partial
  // final block.
  std::uint64_t uniform_below(std::uint64_t bound) {
    std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

  bool bernoulli(double prob) { return uniform01() < prob; }

  // Fisher-Yates.  std::shuffle is implementation-defined, this is not.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace llp
