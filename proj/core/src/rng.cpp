#include "mipcls/rng.hpp"

#include <cmath>
#include <numbers>

namespace mipcls {

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_(splitmix64(seed ^ splitmix64(stream))) {}

std::uint64_t CounterRng::next() noexcept {
  const std::uint64_t x = key_ + counter_ * 0x9E3779B97F4A7C15ull;
  ++counter_;
  return splitmix64(x);
}

double CounterRng::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
}

double CounterRng::normal() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t sample_seed(std::uint64_t global_seed, std::string_view patient, std::string_view side,
                          std::uint64_t epoch) noexcept {
  std::uint64_t h = splitmix64(global_seed);
  h = splitmix64(h ^ fnv1a64(patient));
  h = splitmix64(h ^ fnv1a64(side));
  return splitmix64(h ^ epoch);
}

}  // namespace mipcls
