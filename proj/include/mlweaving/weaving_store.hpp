#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <span>
#include <vector>

#include "mlweaving/error.hpp"
#include "mlweaving/fixed.hpp"
#include "mlweaving/quantize.hpp"

namespace mlweaving {

inline constexpr std::size_t kBankCount = 8;
inline constexpr std::size_t kBankBits = 64;
inline constexpr std::size_t kLineBits = kBankCount * kBankBits;  // 512

// One 512-bit memory line. Word k is bank k and covers line bits [64k, 64k + 63].
using CacheLine = std::array<std::uint64_t, kBankCount>;

constexpr std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// Memory traffic per sample, in bits: s planes of ceil(M/64) padded
// 64-bit words, plus the 32-bit label.
constexpr std::uint64_t memory_traffic_bits(std::size_t features, int bits) {
  return static_cast<std::uint64_t>(bits) * ceil_div(features, kBankBits) * kBankBits + 32;
}

// Position of a line in the (group, chunk, plane) traversal.
struct PlaneCursor {
  std::size_t group = 0;  // sample group of 8
  std::size_t chunk = 0;  // 64-feature chunk
  int plane = 0;          // w, 0 = most significant bit
  int bits = 0;           // precision s the cursor was created for
  std::size_t line = 0;   // index into WeavingStore::lines()

  bool operator==(const PlaneCursor&) const = default;
};

// Bank-interleaved bit-plane layout: line (g, c, w) packs bit w of features
// 64c..64c+63 of samples 8g..8g+7, one sample per bank. Feature offset t
// within a chunk is bit t of its bank word. Samples and features beyond N, M
// are zero padding.
class WeavingStore {
 public:
  WeavingStore() = default;

  WeavingStore(std::size_t samples, std::size_t features, int max_bits, std::vector<CacheLine> lines,
               std::vector<std::int32_t> labels)
      : samples_(samples), features_(features), max_bits_(max_bits), lines_(std::move(lines)), labels_(std::move(labels)) {
    if (samples_ == 0 || features_ == 0) throw InvalidArgument("weaving store must be non-empty");
    if (max_bits_ < 1 || max_bits_ > kMaxPrecision) throw InvalidArgument("max precision must be in 1..32");
    if (lines_.size() != sample_groups() * chunks() * static_cast<std::size_t>(max_bits_))
      throw InvalidArgument("line count does not match ceil(N/8) * ceil(M/64) * S");
    if (labels_.size() != samples_) throw InvalidArgument("label count does not match N");
  }

  std::size_t samples() const noexcept { return samples_; }
  std::size_t features() const noexcept { return features_; }
  int max_bits() const noexcept { return max_bits_; }
  std::size_t sample_groups() const noexcept { return ceil_div(samples_, kBankCount); }
  std::size_t chunks() const noexcept { return ceil_div(features_, kBankBits); }
  std::size_t padded_features() const noexcept { return chunks() * kBankBits; }

  std::size_t line_index(std::size_t group, std::size_t chunk, int plane) const noexcept {
    return (group * chunks() + chunk) * static_cast<std::size_t>(max_bits_) + static_cast<std::size_t>(plane);
  }

  // Bank word holding plane w of chunk c for sample i.
  std::uint64_t word(std::size_t sample, std::size_t chunk, int plane) const {
    return lines_[line_index(sample / kBankCount, chunk, plane)][sample % kBankCount];
  }

  // The s plane words (w = 0..s-1) for one (sample, chunk) pair.
  void slice(std::size_t sample, std::size_t chunk, int bits, std::span<std::uint64_t> out) const {
    const std::size_t base = line_index(sample / kBankCount, chunk, 0);
    const std::size_t bank = sample % kBankCount;
    for (int w = 0; w < bits; ++w) out[static_cast<std::size_t>(w)] = lines_[base + static_cast<std::size_t>(w)][bank];
  }

  const std::vector<CacheLine>& lines() const noexcept { return lines_; }
  const std::vector<std::int32_t>& labels() const noexcept { return labels_; }
  Fixed label(std::size_t i) const { return Fixed{labels_[i]}; }

  // Tests use this to perturb individual planes.
  std::vector<CacheLine>& mutable_lines() noexcept { return lines_; }

  bool operator==(const WeavingStore&) const = default;

 private:
  std::size_t samples_ = 0;
  std::size_t features_ = 0;
  int max_bits_ = kMaxPrecision;
  std::vector<CacheLine> lines_;
  std::vector<std::int32_t> labels_;
};

inline WeavingStore build_mlweaving(const FixedPointTable& table) {
  const std::size_t n = table.rows();
  const std::size_t m_count = table.cols();
  const int s_max = table.max_bits();
  const std::size_t chunks = ceil_div(m_count, kBankBits);
  const std::size_t groups = ceil_div(n, kBankCount);
  std::vector<CacheLine> lines(groups * chunks * static_cast<std::size_t>(s_max), CacheLine{});

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = i / kBankCount;
    const std::size_t bank = i % kBankCount;
    for (std::size_t m = 0; m < m_count; ++m) {
      const std::uint32_t code = table.code(i, m);
      if (code == 0) continue;
      const std::size_t base = (g * chunks + m / kBankBits) * static_cast<std::size_t>(s_max);
      const std::uint64_t mask = std::uint64_t{1} << (m % kBankBits);
      for (int w = 0; w < s_max; ++w)
        if ((code >> (s_max - 1 - w)) & 1u) lines[base + static_cast<std::size_t>(w)][bank] |= mask;
    }
  }
  return WeavingStore(n, m_count, s_max, std::move(lines), table.labels());
}

inline void check_precision(int bits, int max_bits) {
  if (bits < 1 || bits > max_bits) throw InvalidArgument("precision must satisfy 1 <= s <= S");
}

// Codes of sample i truncated to s bits, reading only planes w < s.
inline std::vector<std::uint32_t> read_sample(const WeavingStore& store, std::size_t sample, int bits) {
  if (sample >= store.samples()) throw InvalidArgument("sample index out of range");
  check_precision(bits, store.max_bits());
  std::vector<std::uint32_t> codes(store.features(), 0);
  for (std::size_t c = 0; c < store.chunks(); ++c) {
    for (int w = 0; w < bits; ++w) {
      std::uint64_t word = store.word(sample, c, w);
      const std::uint32_t weight = std::uint32_t{1} << (bits - 1 - w);
      while (word) {
        const auto t = static_cast<std::size_t>(std::countr_zero(word));
        word &= word - 1;
        const std::size_t m = c * kBankBits + t;
        if (m < store.features()) codes[m] |= weight;
      }
    }
  }
  return codes;
}

// Inverse of build_mlweaving.
inline FixedPointTable unweave(const WeavingStore& store) {
  std::vector<std::uint32_t> codes;
  codes.reserve(store.samples() * store.features());
  for (std::size_t i = 0; i < store.samples(); ++i) {
    auto row = read_sample(store, i, store.max_bits());
    codes.insert(codes.end(), row.begin(), row.end());
  }
  return FixedPointTable(store.samples(), store.features(), store.max_bits(), std::move(codes), store.labels());
}

// Lines fetched at precision s, in (group, chunk, plane) order: s planes are
// read and the remaining S - s are skipped for every (group, chunk).
class PlaneRange {
 public:
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = PlaneCursor;
    using difference_type = std::ptrdiff_t;
    using pointer = const PlaneCursor*;
    using reference = const PlaneCursor&;

    iterator() = default;
    iterator(const WeavingStore* store, PlaneCursor cur) : store_(store), cur_(cur) {}

    reference operator*() const { return cur_; }
    pointer operator->() const { return &cur_; }

    iterator& operator++() {
      if (++cur_.plane == cur_.bits) {
        cur_.plane = 0;
        if (++cur_.chunk == store_->chunks()) {
          cur_.chunk = 0;
          ++cur_.group;
        }
      }
      cur_.line = store_->line_index(cur_.group, cur_.chunk, cur_.plane);
      return *this;
    }
    iterator operator++(int) {
      auto tmp = *this;
      ++*this;
      return tmp;
    }
    bool operator==(const iterator& o) const { return cur_.group == o.cur_.group && cur_.chunk == o.cur_.chunk && cur_.plane == o.cur_.plane; }

   private:
    const WeavingStore* store_ = nullptr;
    PlaneCursor cur_;
  };

  PlaneRange(const WeavingStore& store, int bits) : store_(&store), bits_(bits) {
    check_precision(bits, store.max_bits());
  }

  iterator begin() const { return iterator(store_, PlaneCursor{0, 0, 0, bits_, 0}); }
  iterator end() const { return iterator(store_, PlaneCursor{store_->sample_groups(), 0, 0, bits_, 0}); }
  std::size_t size() const { return store_->sample_groups() * store_->chunks() * static_cast<std::size_t>(bits_); }

 private:
  const WeavingStore* store_;
  int bits_;
};

inline PlaneRange plane_iter(const WeavingStore& store, int bits) { return PlaneRange(store, bits); }

// Per-sample bit-plane layout at 512-feature granularity: line (i, c, w)
// holds bit w of features 512c..512c+511 of sample i.
class BWeavingStore {
 public:
  BWeavingStore() = default;
  BWeavingStore(std::size_t samples, std::size_t features, int max_bits, std::vector<CacheLine> lines)
      : samples_(samples), features_(features), max_bits_(max_bits), lines_(std::move(lines)) {
    if (lines_.size() != samples_ * chunks() * static_cast<std::size_t>(max_bits_))
      throw InvalidArgument("line count does not match N * ceil(M/512) * S");
  }

  std::size_t samples() const noexcept { return samples_; }
  std::size_t features() const noexcept { return features_; }
  int max_bits() const noexcept { return max_bits_; }
  std::size_t chunks() const noexcept { return ceil_div(features_, kLineBits); }
  std::size_t line_index(std::size_t sample, std::size_t chunk, int plane) const noexcept {
    return sample * chunks() * static_cast<std::size_t>(max_bits_) + chunk * static_cast<std::size_t>(max_bits_) +
           static_cast<std::size_t>(plane);
  }
  const std::vector<CacheLine>& lines() const noexcept { return lines_; }

 private:
  std::size_t samples_ = 0;
  std::size_t features_ = 0;
  int max_bits_ = kMaxPrecision;
  std::vector<CacheLine> lines_;
};

inline BWeavingStore build_bweaving(const FixedPointTable& table) {
  const std::size_t chunks = ceil_div(table.cols(), kLineBits);
  const int s_max = table.max_bits();
  std::vector<CacheLine> lines(table.rows() * chunks * static_cast<std::size_t>(s_max), CacheLine{});
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t m = 0; m < table.cols(); ++m) {
      const std::uint32_t code = table.code(i, m);
      const std::size_t base = (i * chunks + m / kLineBits) * static_cast<std::size_t>(s_max);
      const std::size_t t = m % kLineBits;
      for (int w = 0; w < s_max; ++w)
        if ((code >> (s_max - 1 - w)) & 1u)
          lines[base + static_cast<std::size_t>(w)][t / kBankBits] |= std::uint64_t{1} << (t % kBankBits);
    }
  }
  return BWeavingStore(table.rows(), table.cols(), s_max, std::move(lines));
}

inline std::vector<std::uint32_t> read_sample(const BWeavingStore& store, std::size_t sample, int bits) {
  if (sample >= store.samples()) throw InvalidArgument("sample index out of range");
  check_precision(bits, store.max_bits());
  std::vector<std::uint32_t> codes(store.features(), 0);
  for (std::size_t m = 0; m < store.features(); ++m) {
    const std::size_t t = m % kLineBits;
    std::uint32_t code = 0;
    for (int w = 0; w < bits; ++w) {
      const auto& line = store.lines()[store.line_index(sample, m / kLineBits, w)];
      code = (code << 1) | static_cast<std::uint32_t>((line[t / kBankBits] >> (t % kBankBits)) & 1u);
    }
    codes[m] = code;
  }
  return codes;
}

}  // namespace mlweaving
