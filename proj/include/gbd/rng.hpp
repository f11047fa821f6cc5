#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace gbd {

/// Seeded generator with platform-independent sampling helpers.
///
/// The standard distributions are implementation-defined, so every draw used
/// by the pipeline goes through the helpers here. Only the raw 64-bit engine
/// output is taken from the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Fisher-Yates shuffle driven by uniform_index.
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Seed for a named substream. Distinct (stream, index) pairs give
/// decorrelated seeds for the same master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t index = 0);

/// Round-half-up to the nearest integer, for non-negative inputs.
long round_half_up(double x);

}  // namespace gbd
