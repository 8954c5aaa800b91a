#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace bread {

/// SplitMix64 generator. Used everywhere instead of <random> engines so that
/// sequences are identical across platforms and standard library versions.
class Rng {
public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound). bound must be > 0.
  uint64_t uniform_below(uint64_t bound) {
    // Rejection sampling keeps the draw exactly uniform.
    uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  /// Uniform real in [0, 1).
  double uniform_real() {
    return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
  }

  bool bernoulli(double p) { return uniform_real() < p; }

  /// Draws k distinct indices from [0, n) via partial Fisher-Yates.
  std::vector<size_t> sample_without_replacement(size_t n, size_t k) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + static_cast<size_t>(uniform_below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

  uint64_t state() const { return state_; }

private:
  uint64_t state_;
};

/// Mixes a base seed with a label and indices into a fresh stream seed.
/// Run-level randomness is always derived this way (never by advancing a
/// shared generator), so checkpoint-resume needs no RNG state.
uint64_t derive_seed(uint64_t base, std::string_view label, uint64_t a = 0,
                     uint64_t b = 0);

}  // namespace bread
