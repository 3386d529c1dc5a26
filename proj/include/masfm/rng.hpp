#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace masfm {

// Deterministic random source. std::mt19937_64 output is pinned by the
// standard, but the standard distributions are not, so the draw methods
// are implemented here to keep results identical across platforms and
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one cached value.
  double gaussian();

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  // First k entries of a random permutation of [0, n).
  template <typename IndexT>
  void sample_distinct(std::uint64_t n, int k, std::vector<IndexT>& out) {
    out.resize(static_cast<std::size_t>(n));
    for (std::uint64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = static_cast<IndexT>(i);
    for (int i = 0; i < k; ++i) {
      const std::uint64_t j = i + uniform_index(n - i);
      std::swap(out[i], out[static_cast<std::size_t>(j)]);
    }
    out.resize(k);
  }

 private:
  std::mt19937_64 engine_;
  bool have_cached_gaussian_ = false;
  double cached_gaussian_ = 0.0;
};

// Stable 64-bit string hash (FNV-1a) for deriving per-item sub-seeds.
std::uint64_t fnv1a64(const std::string& text);

// Combine a base seed with a salt into a derived seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace masfm
