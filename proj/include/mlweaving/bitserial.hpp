#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>

#include "mlweaving/error.hpp"
#include "mlweaving/fixed.hpp"
#include "mlweaving/quantize.hpp"
#include "mlweaving/weaving_store.hpp"

namespace mlweaving {

// x >>> i, the signed right shift applied once per set bit of the quantized operand.
constexpr Fixed shift_weight(Fixed x, int i) { return x >> i; }

// Q_s(a) * x as sum_{i=1..s} bit_i(a) * (x >>> i), bit_1 being the MSB of the s-bit code.
constexpr Fixed bitserial_mul(std::uint64_t code, Fixed x, int bits) {
  Fixed acc{};
  for (int i = 1; i <= bits; ++i)
    if ((code >> (bits - i)) & 1u) acc += shift_weight(x, i);
  return acc;
}

// The s plane words of one (sample, 64-feature chunk): planes[w] bit t is
// bit w (MSB first) of feature 64 * chunk + t.
struct BitPlaneSlice {
  std::size_t chunk = 0;
  int bits = 0;
  std::array<std::uint64_t, kMaxPrecision> planes{};
};

namespace detail {

// Adds (x[t] >>> (w + 1)) for every set bit t of each plane word. Traverses
// plane-major, the order the words stream out of memory.
inline Fixed accumulate_planes(std::span<const std::uint64_t> planes, std::span<const Fixed> model_chunk) {
  std::int64_t acc = 0;
  for (std::size_t w = 0; w < planes.size(); ++w) {
    std::uint64_t word = planes[w];
    const int shift = static_cast<int>(w) + 1;
    while (word) {
      const auto t = static_cast<std::size_t>(std::countr_zero(word));
      word &= word - 1;
      acc += model_chunk[t].raw >> shift;
    }
  }
  return Fixed{acc};
}

}  // namespace detail

inline BitPlaneSlice make_slice(const WeavingStore& store, std::size_t sample, std::size_t chunk, int bits) {
  check_precision(bits, store.max_bits());
  BitPlaneSlice slice;
  slice.chunk = chunk;
  slice.bits = bits;
  store.slice(sample, chunk, bits, std::span(slice.planes).first(static_cast<std::size_t>(bits)));
  return slice;
}

// Dot product of one sample's s-bit codes with the model, consuming the plane
// stream (c outer, w inner). `model` must cover the padded feature count.
inline Fixed bitserial_dot(std::span<const BitPlaneSlice> stream, std::span<const Fixed> model, std::size_t features,
                           int bits) {
  const std::size_t chunks = ceil_div(features, kBankBits);
  if (model.size() < chunks * kBankBits) throw InvalidArgument("model shorter than the padded feature count");
  std::size_t planes_seen = 0;
  for (const auto& slice : stream)
    if (slice.bits == bits) planes_seen += static_cast<std::size_t>(bits);
  if (stream.size() < chunks || planes_seen < chunks * static_cast<std::size_t>(bits))
    throw InvalidArgument("plane stream shorter than ceil(M/64) * s words");

  Fixed acc{};
  for (const auto& slice : stream) {
    if (slice.chunk >= chunks) throw InvalidArgument("slice chunk index out of range");
    acc += detail::accumulate_planes(std::span(slice.planes).first(static_cast<std::size_t>(bits)),
                                     model.subspan(slice.chunk * kBankBits, kBankBits));
  }
  return acc;
}

// Same result as bitserial_dot over the full stream of `sample`, reading the
// bank words in place.
inline Fixed dot_sample(const WeavingStore& store, std::size_t sample, std::span<const Fixed> model, int bits) {
  check_precision(bits, store.max_bits());
  std::array<std::uint64_t, kMaxPrecision> planes{};
  const auto used = std::span(planes).first(static_cast<std::size_t>(bits));
  Fixed acc{};
  for (std::size_t c = 0; c < store.chunks(); ++c) {
    store.slice(sample, c, bits, used);
    acc += detail::accumulate_planes(used, model.subspan(c * kBankBits, kBankBits));
  }
  return acc;
}

// grad[m] += Q_s(a_m) * scale for every feature of `sample`, using the same
// shift-add multiplier as the dot product.
inline void accumulate_gradient(const WeavingStore& store, std::size_t sample, Fixed scale, int bits,
                                std::span<Fixed> grad) {
  std::array<std::int64_t, kMaxPrecision> shifted{};
  for (int w = 0; w < bits; ++w) shifted[static_cast<std::size_t>(w)] = shift_weight(scale, w + 1).raw;
  for (std::size_t c = 0; c < store.chunks(); ++c) {
    for (int w = 0; w < bits; ++w) {
      std::uint64_t word = store.word(sample, c, w);
      const std::int64_t add = shifted[static_cast<std::size_t>(w)];
      while (word) {
        const auto t = static_cast<std::size_t>(std::countr_zero(word));
        word &= word - 1;
        grad[c * kBankBits + t].raw += add;
      }
    }
  }
}

}  // namespace mlweaving
