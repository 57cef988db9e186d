// SPDX-License-Identifier: Apache-2.0
//
// Deterministic randomness and hashing. Standard-library distributions are
// implementation-defined, so everything that feeds persisted artifacts goes
// through these fixed-constant routines instead: SplitMix64 for random
// streams, FNV-1a for hashing. Output is identical across platforms and
// compilers.

#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace reflect {

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// SplitMix64 (Steele, Lea, Vigna). Small state, full 64-bit output, passes
// BigCrush; more than enough for sampling and shuffles.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_unit() < p; }

  // Unbiased uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // k distinct indices drawn uniformly from [0, pool), in selection order.
  std::vector<std::size_t> sample_without_replacement(std::size_t pool, std::size_t k) {
    std::vector<std::size_t> idx(pool);
    for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(idx[i], idx[i + below(pool - i)]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  std::uint64_t state_;
};

// Named sub-stream seeds. Every stage of the pipeline derives its own seed
// from the master seed this way, so stages stay independent and the whole
// run is a pure function of the master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = fnv1a64(tag);
  for (int i = 0; i < 8; ++i) {
    h ^= (master >> (8 * i)) & 0xff;
    h *= 0x100000001b3ull;
  }
  for (int i = 0; i < 8; ++i) {
    h ^= (index >> (8 * i)) & 0xff;
    h *= 0x100000001b3ull;
  }
  // One SplitMix64 scramble to decorrelate nearby tags/indices.
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

}  // namespace reflect
