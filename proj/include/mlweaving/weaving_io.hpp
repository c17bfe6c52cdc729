#pragma once

// .mlwv binary format, little-endian throughout:
//
//   offset  size  field
//        0     4  magic "MLWV"
//        4     2  version (1)
//        6     2  flags (must be 0)
//        8     8  N, samples
//       16     8  M, features
//       24     1  S, max precision
//       25     1  bank count (8)
//       26     2  reserved (0)
//       28     4  CRC-32 (zlib polynomial) of every byte from offset 32 to EOF
//       32  4*N   labels, int32 fixed-point with 24 fractional bits
//        .  64*L  lines, L = ceil(N/8) * ceil(M/64) * S; each line is 8 u64
//                 bank words, bank 0 first

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "mlweaving/error.hpp"
#include "mlweaving/weaving_store.hpp"

namespace mlweaving {

inline constexpr char kWeavingMagic[4] = {'M', 'L', 'W', 'V'};
inline constexpr std::uint16_t kWeavingVersion = 1;
inline constexpr std::size_t kWeavingHeaderSize = 32;

namespace detail {

inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int b = 0; b < bytes; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

inline std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int b = 0; b < bytes; ++b) v |= std::uint64_t{in[offset + static_cast<std::size_t>(b)]} << (8 * b);
  return v;
}

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded pieces.
  constexpr std::size_t kPiece = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kPiece) {
    const std::size_t len = std::min(kPiece, bytes.size() - off);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(len));
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> save(const WeavingStore& store) {
  std::vector<std::uint8_t> out;
  out.reserve(kWeavingHeaderSize + 4 * store.samples() + 64 * store.lines().size());
  out.insert(out.end(), std::begin(kWeavingMagic), std::end(kWeavingMagic));
  detail::put_le(out, kWeavingVersion, 2);
  detail::put_le(out, 0, 2);
  detail::put_le(out, store.samples(), 8);
  detail::put_le(out, store.features(), 8);
  detail::put_le(out, static_cast<std::uint64_t>(store.max_bits()), 1);
  detail::put_le(out, kBankCount, 1);
  detail::put_le(out, 0, 2);
  detail::put_le(out, 0, 4);  // CRC placeholder
  for (auto label : store.labels()) detail::put_le(out, static_cast<std::uint32_t>(label), 4);
  for (const auto& line : store.lines())
    for (auto word : line) detail::put_le(out, word, 8);

  const std::uint32_t crc = detail::crc32_of(std::span(out).subspan(kWeavingHeaderSize));
  for (int b = 0; b < 4; ++b) out[28 + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(crc >> (8 * b));
  return out;
}

inline WeavingStore load(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kWeavingHeaderSize) throw FormatError("truncated .mlwv header");
  for (std::size_t k = 0; k < 4; ++k)
    if (bytes[k] != static_cast<std::uint8_t>(kWeavingMagic[k])) throw FormatError("bad magic, not an .mlwv file");
  const auto version = detail::get_le(bytes, 4, 2);
  if (version != kWeavingVersion) throw FormatError("unsupported .mlwv version " + std::to_string(version));
  if (detail::get_le(bytes, 6, 2) != 0) throw FormatError("unknown .mlwv flags");

  const std::uint64_t n = detail::get_le(bytes, 8, 8);
  const std::uint64_t m = detail::get_le(bytes, 16, 8);
  const auto s_max = static_cast<int>(detail::get_le(bytes, 24, 1));
  const auto banks = detail::get_le(bytes, 25, 1);
  if (n == 0 || m == 0) throw FormatError("empty store in .mlwv header");
  if (s_max < 1 || s_max > kMaxPrecision) throw FormatError("precision out of range in .mlwv header");
  if (banks != kBankCount) throw FormatError("unsupported bank count in .mlwv header");
  if (detail::get_le(bytes, 26, 2) != 0) throw FormatError("reserved header bytes must be zero");

  // Guard the size arithmetic against absurd headers before multiplying.
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 40;
  if (n > kLimit || m > kLimit) throw FormatError("implausible dimensions in .mlwv header");
  const std::uint64_t line_count = ceil_div(n, kBankCount) * ceil_div(m, kBankBits) * static_cast<std::uint64_t>(s_max);
  const std::uint64_t expected = kWeavingHeaderSize + 4 * n + 64 * line_count;
  if (bytes.size() < expected) throw FormatError("truncated .mlwv payload");
  if (bytes.size() > expected) throw FormatError("trailing bytes after .mlwv payload");

  const auto stored_crc = static_cast<std::uint32_t>(detail::get_le(bytes, 28, 4));
  if (detail::crc32_of(bytes.subspan(kWeavingHeaderSize)) != stored_crc) throw FormatError("checksum mismatch in .mlwv file");

  std::size_t off = kWeavingHeaderSize;
  std::vector<std::int32_t> labels(n);
  for (auto& label : labels) {
    label = static_cast<std::int32_t>(static_cast<std::uint32_t>(detail::get_le(bytes, off, 4)));
    off += 4;
  }
  std::vector<CacheLine> lines(line_count);
  for (auto& line : lines)
    for (auto& word : line) {
      word = detail::get_le(bytes, off, 8);
      off += 8;
    }

  WeavingStore store(n, m, s_max, std::move(lines), std::move(labels));
  // Padding must be zero or the bijection with the code table breaks.
  const std::size_t tail = m % kBankBits;
  if (tail != 0) {
    const std::uint64_t pad_mask = ~((std::uint64_t{1} << tail) - 1);
    for (std::size_t g = 0; g < store.sample_groups(); ++g)
      for (int w = 0; w < s_max; ++w)
        for (auto word : store.lines()[store.line_index(g, store.chunks() - 1, w)])
          if (word & pad_mask) throw FormatError("nonzero feature padding in .mlwv file");
  }
  const std::size_t valid_banks = n % kBankCount;
  if (valid_banks != 0) {
    const std::size_t g = store.sample_groups() - 1;
    for (std::size_t c = 0; c < store.chunks(); ++c)
      for (int w = 0; w < s_max; ++w)
        for (std::size_t k = valid_banks; k < kBankCount; ++k)
          if (store.lines()[store.line_index(g, c, w)][k] != 0) throw FormatError("nonzero sample padding in .mlwv file");
  }
  return store;
}

inline void save_file(const WeavingStore& store, const std::string& path) {
  const auto bytes = save(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline WeavingStore load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load(bytes);
}

}  // namespace mlweaving
