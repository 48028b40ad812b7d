#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace polsar {

/// SplitMix64 finalizer; bijective on 64-bit words.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based random stream: the output is a pure function of
/// (key, counter), so independent streams can be derived for each pixel and
/// results never depend on scheduling. Two mix rounds keyed by the stream id
/// give well-decorrelated streams for Monte Carlo use.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(mix64(key)) {}

  /// Stream for pixel (x, y) of a scene generated with `seed`.
  static CounterRng for_pixel(std::uint64_t seed, int x, int y) {
    const std::uint64_t cell =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(y)) << 32) |
        static_cast<std::uint64_t>(static_cast<std::uint32_t>(x));
    return CounterRng(mix64(seed) ^ mix64(cell ^ 0xA02BDBF7BB3C0A7ULL));
  }

  std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

  /// Uniform double in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard circular complex Gaussian, E{g conj(g)} = 1.
  /// |g|^2 ~ Exp(1) and the phase is uniform, sampled in polar form.
  std::complex<double> next_circular_gaussian() {
    const double u = 1.0 - next_unit();  // (0, 1]
    const double phi = 2.0 * std::numbers::pi * next_unit();
    const double r = std::sqrt(-std::log(u));
    return {r * std::cos(phi), r * std::sin(phi)};
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace polsar
