#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "mlweaving/error.hpp"
#include "mlweaving/quantize.hpp"

namespace mlweaving {

struct SyntheticSpec {
  std::size_t samples = 256;
  std::size_t features = 16;
  std::uint64_t seed = 1;
  double noise = 0.5;  // label noise standard deviation (linreg)
  bool logistic = false;
};

struct SyntheticDataset {
  RawMatrix raw;
  std::vector<double> planted;  // model in normalized feature space
};

namespace detail {

// 53-bit uniform in [0, 1); bit-identical across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace detail

// Planted-model dataset. Raw columns carry arbitrary per-column offsets and
// scales; labels are generated from the normalized features so that the
// planted model is the target after normalize_dataset.
inline SyntheticDataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.samples < 2 || spec.features == 0) throw InvalidArgument("synthetic dataset needs >= 2 samples and >= 1 feature");
  std::mt19937_64 rng(spec.seed);
  SyntheticDataset ds;
  ds.planted.resize(spec.features);
  for (auto& w : ds.planted) w = 2.0 * detail::unit_uniform(rng) - 1.0;

  RawMatrix& raw = ds.raw;
  raw.rows = spec.samples;
  raw.cols = spec.features;
  raw.values.resize(spec.samples * spec.features);
  raw.labels.assign(spec.samples, 0.0);
  std::vector<double> offset(spec.features), scale(spec.features);
  for (std::size_t m = 0; m < spec.features; ++m) {
    offset[m] = 10.0 * detail::unit_uniform(rng) - 5.0;
    scale[m] = 0.5 + 4.5 * detail::unit_uniform(rng);
  }
  for (std::size_t i = 0; i < spec.samples; ++i)
    for (std::size_t m = 0; m < spec.features; ++m)
      raw.values[i * spec.features + m] = offset[m] + scale[m] * detail::unit_uniform(rng);

  const NormalizedMatrix norm = normalize_dataset(raw);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    double dot = 0.0;
    for (std::size_t m = 0; m < spec.features; ++m) dot += norm.at(i, m) * ds.planted[m];
    if (spec.logistic) {
      const double p = 1.0 / (1.0 + std::exp(-4.0 * dot));
      raw.labels[i] = detail::unit_uniform(rng) < p ? 1.0 : 0.0;
    } else {
      raw.labels[i] = dot + spec.noise * detail::standard_normal(rng);
    }
  }
  return ds;
}

}  // namespace mlweaving
