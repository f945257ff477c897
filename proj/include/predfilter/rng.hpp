#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace predfilter {

// SplitMix64 finalizer; also used to derive independent streams from a seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Named RNG streams. Every consumer of randomness owns one stream id, so
/// adding a consumer never shifts the draws seen by the others.
enum class Stream : std::uint64_t {
  init = 1,
  shuffle = 2,
  dropout = 3,
  synthetic = 4,
  test = 5,
};

/// Counter-based generator: draw n of stream s is mix64(key(seed, s) + n).
/// Platform independent, unlike std:: distributions.
class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream, std::uint64_t substream = 0) noexcept
      : key_(mix64(mix64(seed ^ mix64(static_cast<std::uint64_t>(stream))) +
                   substream)) {}

  std::uint64_t next_u64() noexcept { return mix64(key_ + counter_++); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  /// Uniform integer on [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return r % n;
  }

  /// Standard normal via Box-Muller (one draw per call, second discarded).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace predfilter
