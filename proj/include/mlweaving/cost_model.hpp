#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mlweaving/error.hpp"
#include "mlweaving/quantize.hpp"
#include "mlweaving/weaving_store.hpp"

namespace mlweaving {

// 512 bits per cycle at 400 MHz, in decimal GB/s.
inline constexpr double kClockHz = 400e6;
inline constexpr double kPeakGBps = kClockHz * 512.0 / 8.0 / 1e9;  // 25.6

// Pipeline latency between the dot-product and model-update stages.
constexpr std::uint64_t pipeline_latency(int bits) { return 40 + 2 * static_cast<std::uint64_t>(bits); }

inline void check_batch_size(std::size_t batch) {
  if (batch == 0 || batch % kBankCount != 0) throw InvalidArgument("batch size must be a multiple of 8");
  if ((batch & (batch - 1)) != 0) throw InvalidArgument("batch size must be a power of two");
}

// Memory throughput per precision level. th_mem(s) is the entry with the
// largest key <= s; keys below the smallest entry use the smallest entry.
struct PlatformProfile {
  std::map<int, double> memory_gbps{{1, 10.2}, {2, 13.3}, {3, 13.8}, {4, 14.8}};
  double peak_gbps = kPeakGBps;
  std::optional<std::uint64_t> latency_override;

  std::uint64_t latency(int bits) const { return latency_override ? *latency_override : pipeline_latency(bits); }
};

// Profile text: one "s value" or "s=value" pair per line, '#' starts a comment.
// Optional "peak=value" and "latency=cycles" lines override those constants.
inline PlatformProfile parse_profile(std::istream& in) {
  PlatformProfile profile;
  profile.memory_gbps.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), '=', ' ');
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::string key;
    double value = 0.0;
    if (!(fields >> key)) continue;
    if (!(fields >> value) || !std::isfinite(value) || value <= 0.0)
      throw FormatError("profile line " + std::to_string(lineno) + ": expected a positive value");
    std::string extra;
    if (fields >> extra) throw FormatError("profile line " + std::to_string(lineno) + ": trailing text");
    if (key == "peak") {
      profile.peak_gbps = value;
    } else if (key == "latency") {
      profile.latency_override = static_cast<std::uint64_t>(value);
    } else {
      int s = 0;
      try {
        std::size_t used = 0;
        s = std::stoi(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw FormatError("profile line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      }
      if (s < 1 || s > kMaxPrecision) throw FormatError("profile line " + std::to_string(lineno) + ": precision out of range");
      profile.memory_gbps[s] = value;
    }
  }
  if (profile.memory_gbps.empty()) throw FormatError("profile defines no memory throughput entries");
  return profile;
}

inline PlatformProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile " + path);
  return parse_profile(in);
}

inline double th_mem(int bits, const PlatformProfile& profile = {}) {
  if (bits < 1 || bits > kMaxPrecision) throw InvalidArgument("precision must be in 1..32");
  auto it = profile.memory_gbps.upper_bound(bits);
  if (it == profile.memory_gbps.begin()) return it->second;
  return std::prev(it)->second;
}

// Compute-side throughput. With chaining the model-update stream overlaps the
// next batch's reads and only the latency L is exposed; without it the dot
// stage also idles for the ceil(M/64) * s update cycles.
inline double th_comp(std::size_t batch, std::size_t features, int bits, bool chaining, const PlatformProfile& profile = {}) {
  check_batch_size(batch);
  if (bits < 1 || bits > kMaxPrecision) throw InvalidArgument("precision must be in 1..32");
  if (features == 0) throw InvalidArgument("feature count must be positive");
  const double k = static_cast<double>(ceil_div(features, kBankBits));
  const double s = bits;
  const double groups = static_cast<double>(batch / kBankCount);
  const double busy = groups * k * s;
  const double latency = static_cast<double>(profile.latency(bits));
  const double period = chaining ? busy + latency : (1.0 + groups) * k * s + latency;
  return busy / period * profile.peak_gbps;
}

enum class Mode { kChaining, kNoChaining };

inline const char* to_string(Mode m) { return m == Mode::kChaining ? "chaining" : "no-chaining"; }

struct ThroughputEstimate {
  double th_comp = 0.0;
  double th_mem = 0.0;
  double th = 0.0;            // min(th_comp, th_mem), GB/s
  double epoch_seconds = 0.0; // N * memory_traffic_bits / th
  Mode mode = Mode::kChaining;
};

inline ThroughputEstimate predict(std::size_t batch, std::size_t features, int bits, std::size_t samples, bool chaining,
                                  const PlatformProfile& profile = {}) {
  ThroughputEstimate est;
  est.mode = chaining ? Mode::kChaining : Mode::kNoChaining;
  est.th_comp = th_comp(batch, features, bits, chaining, profile);
  est.th_mem = th_mem(bits, profile);
  est.th = std::min(est.th_comp, est.th_mem);
  const double bits_moved = static_cast<double>(samples) * static_cast<double>(memory_traffic_bits(features, bits));
  est.epoch_seconds = bits_moved / (est.th * 8e9);
  return est;
}

struct SpeedupCell {
  std::size_t features = 0;
  int bits = 0;
  ThroughputEstimate chaining;
  ThroughputEstimate no_chaining;
  double speedup = 0.0;  // no-chaining epoch time / chaining epoch time
};

struct SpeedupSurface {
  std::size_t batch = 0;
  std::vector<SpeedupCell> cells;  // features outer, bits inner
  std::size_t argmax = 0;

  const SpeedupCell& best() const { return cells.at(argmax); }

  // Precision with the largest speedup for one feature count.
  int peak_bits(std::size_t features) const {
    const SpeedupCell* best_cell = nullptr;
    for (const auto& c : cells)
      if (c.features == features && (!best_cell || c.speedup > best_cell->speedup)) best_cell = &c;
    if (!best_cell) throw InvalidArgument("feature count not in surface");
    return best_cell->bits;
  }
};

inline SpeedupSurface speedup_surface(std::size_t batch, const std::vector<std::size_t>& feature_counts,
                                      const std::vector<int>& precisions, const PlatformProfile& profile = {}) {
  if (feature_counts.empty() || precisions.empty()) throw InvalidArgument("speedup grid must be non-empty");
  SpeedupSurface surface;
  surface.batch = batch;
  for (auto m : feature_counts) {
    for (auto s : precisions) {
      SpeedupCell cell;
      cell.features = m;
      cell.bits = s;
      // Epoch time only depends on N through a common factor; use one sample.
      cell.chaining = predict(batch, m, s, 1, true, profile);
      cell.no_chaining = predict(batch, m, s, 1, false, profile);
      cell.speedup = cell.no_chaining.epoch_seconds / cell.chaining.epoch_seconds;
      if (surface.cells.empty() || cell.speedup > surface.cells[surface.argmax].speedup) surface.argmax = surface.cells.size();
      surface.cells.push_back(cell);
    }
  }
  return surface;
}

}  // namespace mlweaving
