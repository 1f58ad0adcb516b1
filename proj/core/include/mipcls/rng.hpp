#pragma once

#include <cstdint>
#include <string_view>

namespace mipcls {

/// SplitMix64 finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// FNV-1a over the bytes of s.
std::uint64_t fnv1a64(std::string_view s) noexcept;

/// Counter-based generator: draw n of stream (seed, stream) is
/// splitmix64(key + n * 0x9E3779B97F4A7C15) with key = splitmix64(seed ^
/// splitmix64(stream)). Everything here uses integer arithmetic or
/// explicitly defined transforms, so streams reproduce across platforms
/// (unlike std::*_distribution).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller (cosine branch only).
  double normal() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Per-sample augmentation seed: hash(global_seed, patient, side, epoch).
std::uint64_t sample_seed(std::uint64_t global_seed, std::string_view patient, std::string_view side,
                          std::uint64_t epoch) noexcept;

}  // namespace mipcls
