#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>

#include "mlweaving/error.hpp"
#include "mlweaving/quantize.hpp"

namespace mlweaving {

struct PrecisionPolicy {
  enum class Kind { kFixed, kDynamic };

  Kind kind = Kind::kFixed;
  int bits = kMaxPrecision;      // used by kFixed
  int cap = kMaxPrecision;       // S; emitted precision never exceeds it

  static PrecisionPolicy fixed(int bits, int cap = kMaxPrecision) { return {Kind::kFixed, bits, cap}; }
  static PrecisionPolicy dynamic(int cap = kMaxPrecision) { return {Kind::kDynamic, 0, cap}; }
};

// Dynamic schedule: 2 bits for epochs 1-4, 3 for 5-8, 4 for 9-16, 5 for 17-32,
// each later level lasting twice as long as the previous one.
constexpr int dynamic_precision(std::uint64_t epoch) {
  if (epoch <= 4) return 2;
  return 3 + static_cast<int>(std::bit_width((epoch - 1) / 4)) - 1;
}

inline int precision_for_epoch(std::uint64_t epoch, const PrecisionPolicy& policy) {
  if (epoch < 1) throw InvalidArgument("epochs are numbered from 1");
  if (policy.cap < 1 || policy.cap > kMaxPrecision) throw InvalidArgument("precision cap must be in 1..32");
  if (policy.kind == PrecisionPolicy::Kind::kFixed) {
    if (policy.bits < 1 || policy.bits > policy.cap) throw InvalidArgument("fixed precision must satisfy 1 <= s <= S");
    return policy.bits;
  }
  return std::clamp(dynamic_precision(epoch), 1, policy.cap);
}

}  // namespace mlweaving
