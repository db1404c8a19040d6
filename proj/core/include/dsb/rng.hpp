#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace dsb {

/// Philox4x32-10 block function. Stateless: output depends only on (key, counter).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for a derived experiment (sweep cell, sampler tag, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return splitmix64(base ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

enum class Substream : std::uint32_t {
  kIncrement = 0,  // (zeta1, zeta2) for dW and beta
  kInit = 1,       // initial-state normals
  kComponent = 2,  // mixture component selection
  kDirection = 3,  // perturbation directions
  kData = 4,       // reference/data draws
  kAux = 5,
};

/// Counter-based normal generator keyed by (seed, sample, step, coordinate,
/// substream). Every value is addressable, so parallel workers reproduce the
/// exact sequence of a serial run.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  /// Two independent uniforms in [0, 1) with 53-bit resolution.
  std::array<double, 2> uniform_pair(std::uint64_t sample, std::uint32_t step, std::uint32_t coordinate,
                                     Substream sub) const noexcept {
    const Philox4x32::Counter ctr{
        coordinate, step, static_cast<std::uint32_t>(sample),
        (static_cast<std::uint32_t>(sub) << 24) | (static_cast<std::uint32_t>(sample >> 32) & 0x00FFFFFFu)};
    const auto out = Philox4x32::generate(ctr, key_);
    return {to_unit(out[0], out[1]), to_unit(out[2], out[3])};
  }

  /// Two independent standard normals (Box-Muller on one Philox block).
  std::array<double, 2> normal_pair(std::uint64_t sample, std::uint32_t step, std::uint32_t coordinate,
                                    Substream sub) const noexcept {
    const auto u = uniform_pair(sample, step, coordinate, sub);
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u[0]));
    const double angle = 2.0 * std::numbers::pi * u[1];
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = (std::uint64_t{hi} << 32) | lo;
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  Philox4x32::Key key_;
};

}  // namespace dsb
