#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>

namespace mlweaving {

// Signed fixed-point scalar with 24 fractional bits: value = raw * 2^-24.
//
// Model entries and labels are stored in 32 bits (|raw| < 2^31, i.e. sign + 7
// integer bits); intermediate sums use the full 64-bit range. All shifts are
// arithmetic, so x >> i rounds toward minus infinity exactly like the hardware.
struct Fixed {
  static constexpr int kFractionBits = 24;
  static constexpr std::int64_t kOne = std::int64_t{1} << kFractionBits;

  std::int64_t raw = 0;

  constexpr Fixed() = default;
  constexpr explicit Fixed(std::int64_t r) : raw(r) {}

  static constexpr Fixed from_raw(std::int64_t r) { return Fixed{r}; }

  // Round-half-away-from-zero conversion; callers check range with fits_storage().
  static Fixed from_double(double v) {
    return Fixed{static_cast<std::int64_t>(std::llround(v * static_cast<double>(kOne)))};
  }

  constexpr double to_double() const { return static_cast<double>(raw) / static_cast<double>(kOne); }

  // True when the value fits the 32-bit storage format used for models and labels.
  constexpr bool fits_storage() const {
    return raw >= std::numeric_limits<std::int32_t>::min() && raw <= std::numeric_limits<std::int32_t>::max();
  }

  constexpr Fixed operator+(Fixed o) const { return Fixed{raw + o.raw}; }
  constexpr Fixed operator-(Fixed o) const { return Fixed{raw - o.raw}; }
  constexpr Fixed operator-() const { return Fixed{-raw}; }
  constexpr Fixed& operator+=(Fixed o) {
    raw += o.raw;
    return *this;
  }
  constexpr Fixed& operator-=(Fixed o) {
    raw -= o.raw;
    return *this;
  }
  constexpr Fixed operator>>(int i) const { return Fixed{raw >> i}; }

  constexpr auto operator<=>(const Fixed&) const = default;
};

}  // namespace mlweaving
