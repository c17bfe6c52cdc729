#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mlweaving/error.hpp"
#include "mlweaving/fixed.hpp"

namespace mlweaving {

inline constexpr int kMaxPrecision = 32;

// Dense row-major matrix of raw feature values with one label per row.
struct RawMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // rows * cols, row-major
  std::vector<double> labels;  // rows

  double at(std::size_t i, std::size_t m) const { return values[i * cols + m]; }
};

struct ColumnRange {
  double min = 0.0;
  double max = 0.0;
};

// Features scaled to [0, 1] per column; `ranges` reproduces the mapping.
struct NormalizedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<double> labels;
  std::vector<ColumnRange> ranges;

  double at(std::size_t i, std::size_t m) const { return values[i * cols + m]; }
};

// Maximum-precision table T_S: one unsigned S-bit code per (sample, feature).
// Every lower precision s is obtained by dropping the S - s low bits.
class FixedPointTable {
 public:
  FixedPointTable() = default;

  FixedPointTable(std::size_t rows, std::size_t cols, int max_bits, std::vector<std::uint32_t> codes,
                  std::vector<std::int32_t> labels)
      : rows_(rows), cols_(cols), max_bits_(max_bits), codes_(std::move(codes)), labels_(std::move(labels)) {
    if (rows_ == 0 || cols_ == 0) throw InvalidArgument("fixed-point table must be non-empty");
    if (max_bits_ < 1 || max_bits_ > kMaxPrecision) throw InvalidArgument("max precision must be in 1..32");
    if (codes_.size() != rows_ * cols_) throw InvalidArgument("code count does not match rows * cols");
    if (labels_.size() != rows_) throw InvalidArgument("label count does not match rows");
    if (max_bits_ < 32) {
      const std::uint64_t limit = std::uint64_t{1} << max_bits_;
      for (auto c : codes_)
        if (c >= limit) throw InvalidArgument("code exceeds 2^S - 1");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  int max_bits() const noexcept { return max_bits_; }

  std::uint32_t code(std::size_t i, std::size_t m) const { return codes_[i * cols_ + m]; }
  Fixed label(std::size_t i) const { return Fixed{labels_[i]}; }

  const std::vector<std::uint32_t>& codes() const noexcept { return codes_; }
  const std::vector<std::int32_t>& labels() const noexcept { return labels_; }

  bool operator==(const FixedPointTable&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  int max_bits_ = kMaxPrecision;
  std::vector<std::uint32_t> codes_;
  std::vector<std::int32_t> labels_;
};

// Min-max scaling per column. Constant columns map to 0. Labels pass through.
inline NormalizedMatrix normalize_dataset(const RawMatrix& raw) {
  if (raw.rows == 0 || raw.cols == 0) throw InvalidArgument("cannot normalize an empty matrix");
  if (raw.values.size() != raw.rows * raw.cols || raw.labels.size() != raw.rows)
    throw InvalidArgument("raw matrix shape does not match its storage");

  NormalizedMatrix out;
  out.rows = raw.rows;
  out.cols = raw.cols;
  out.labels = raw.labels;
  out.values.resize(raw.values.size());
  out.ranges.resize(raw.cols);

  for (std::size_t m = 0; m < raw.cols; ++m) {
    double lo = raw.at(0, m);
    double hi = lo;
    for (std::size_t i = 0; i < raw.rows; ++i) {
      const double v = raw.at(i, m);
      if (!std::isfinite(v)) throw InvalidArgument("non-finite value in column " + std::to_string(m));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out.ranges[m] = {lo, hi};
    const double span = hi - lo;
    for (std::size_t i = 0; i < raw.rows; ++i) {
      double v = span > 0.0 ? (raw.at(i, m) - lo) / span : 0.0;
      out.values[i * raw.cols + m] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

// Labels are stored as 32-bit Fixed; anything outside (-128, 128) is rejected.
inline std::int32_t label_to_fixed(double label) {
  if (!std::isfinite(label)) throw InvalidArgument("non-finite label");
  const Fixed f = Fixed::from_double(label);
  if (!f.fits_storage()) throw InvalidArgument("label out of the 32-bit fixed-point range");
  return static_cast<std::int32_t>(f.raw);
}

// code = round_half_up(v * (2^S - 1)).
inline std::uint32_t quantize_value(double v, int max_bits) {
  if (max_bits < 1 || max_bits > kMaxPrecision) throw InvalidArgument("max precision must be in 1..32");
  if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("normalized value outside [0, 1]");
  const double scale = static_cast<double>((std::uint64_t{1} << max_bits) - 1);
  return static_cast<std::uint32_t>(std::floor(v * scale + 0.5));
}

inline FixedPointTable quantize_full(const NormalizedMatrix& norm, int max_bits) {
  if (max_bits < 1 || max_bits > kMaxPrecision) throw InvalidArgument("max precision must be in 1..32");
  std::vector<std::uint32_t> codes(norm.values.size());
  for (std::size_t k = 0; k < codes.size(); ++k) codes[k] = quantize_value(norm.values[k], max_bits);
  std::vector<std::int32_t> labels(norm.rows);
  for (std::size_t i = 0; i < norm.rows; ++i) labels[i] = label_to_fixed(norm.labels[i]);
  return FixedPointTable(norm.rows, norm.cols, max_bits, std::move(codes), std::move(labels));
}

// Keep the `bits` most significant of `max_bits` bits.
inline std::uint32_t truncate_code(std::uint32_t code, int max_bits, int bits) {
  if (bits < 1 || bits > max_bits) throw InvalidArgument("precision must satisfy 1 <= s <= S");
  return code >> (max_bits - bits);
}

// Interprets an s-bit code as sum_i bit_i * 2^-i (bit_1 = MSB), i.e. code / 2^s.
inline double dequantize(std::uint64_t code, int bits) {
  if (bits < 1 || bits > kMaxPrecision) throw InvalidArgument("precision must be in 1..32");
  if (code >> bits) throw InvalidArgument("code does not fit in the given precision");
  return std::ldexp(static_cast<double>(code), -bits);
}

}  // namespace mlweaving
