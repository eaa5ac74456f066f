#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bsq::rng {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent 64-bit seed for child `index` of `parent`.
inline std::uint64_t derive(std::uint64_t parent, std::uint64_t index) noexcept {
  return splitmix64(parent ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

/// Uniform in (0, 1], 53 bits.
inline double to_unit(std::uint64_t x) noexcept { return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53; }

/// Standard normal keyed by (key, a, b): a pure function of its arguments, so
/// draws can be produced in any order or in parallel.
inline double normal(std::uint64_t key, std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = splitmix64(key ^ (a * 0xD6E8FEB86659FD93ull));
  z = splitmix64(z ^ (b * 0xA0761D6478BD642Full));
  const double u1 = to_unit(z);
  const double u2 = to_unit(splitmix64(z ^ 0xE7037ED1A0B428DBull));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace bsq::rng
