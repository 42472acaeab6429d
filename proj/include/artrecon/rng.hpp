#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace artrecon {

/// Seeded random source with platform-independent conversions.
///
/// std::mt19937_64 is fully specified by the standard, but the std
/// distributions are not, so the real-valued draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n);

  /// Standard normal via Box-Muller (one value per call).
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// Per-stage seed derivation: mixes a 64-bit FNV-1a hash of `stage` into `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage);

}  // namespace artrecon
