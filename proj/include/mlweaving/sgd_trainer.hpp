#pragma once

#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mlweaving/bitserial.hpp"
#include "mlweaving/cost_model.hpp"
#include "mlweaving/error.hpp"
#include "mlweaving/fixed.hpp"
#include "mlweaving/precision_scheduler.hpp"
#include "mlweaving/quantize.hpp"
#include "mlweaving/weaving_store.hpp"

namespace mlweaving {

enum class LossKind { kLinReg, kLogReg };

inline const char* to_string(LossKind k) { return k == LossKind::kLinReg ? "linreg" : "logreg"; }

inline LossKind parse_loss_kind(const std::string& name) {
  if (name == "linreg") return LossKind::kLinReg;
  if (name == "logreg") return LossKind::kLogReg;
  throw InvalidArgument("unknown loss kind '" + name + "'");
}

// Piecewise-linear sigmoid over [-8, 8]: 256 segments of width 1/16 with
// knots rounded to Fixed, clamped to the end knots outside the range.
// Interpolation is pure integer arithmetic. Max error vs. the real sigmoid
// is about 3.4e-4, dominated by the clamp at |x| = 8.
class SigmoidTable {
 public:
  static constexpr int kSegments = 256;
  static constexpr int kSegmentShift = Fixed::kFractionBits - 4;  // width 1/16
  static constexpr std::int64_t kRange = 8 * Fixed::kOne;

  SigmoidTable() {
    for (int k = 0; k <= kSegments; ++k) {
      const double x = -8.0 + static_cast<double>(k) / 16.0;
      knots_[static_cast<std::size_t>(k)] = Fixed::from_double(1.0 / (1.0 + std::exp(-x))).raw;
    }
  }

  Fixed operator()(Fixed x) const {
    if (x.raw <= -kRange) return Fixed{knots_.front()};
    if (x.raw >= kRange) return Fixed{knots_.back()};
    const std::int64_t offset = x.raw + kRange;
    const auto idx = static_cast<std::size_t>(offset >> kSegmentShift);
    const std::int64_t frac = offset & ((std::int64_t{1} << kSegmentShift) - 1);
    const std::int64_t lo = knots_[idx];
    const std::int64_t hi = knots_[idx + 1];
    return Fixed{lo + (((hi - lo) * frac) >> kSegmentShift)};
  }

  static const SigmoidTable& instance() {
    static const SigmoidTable table;
    return table;
  }

 private:
  std::array<std::int64_t, kSegments + 1> knots_{};
};

// Derivative of the loss with respect to the prediction.
inline Fixed df(LossKind kind, Fixed a_dot_x, Fixed label) {
  switch (kind) {
    case LossKind::kLinReg:
      return a_dot_x - label;
    case LossKind::kLogReg:
      return SigmoidTable::instance()(a_dot_x) - label;
  }
  throw InvalidArgument("unknown loss kind");
}

// scale = lambda * df with lambda = 2^-j.
inline Fixed compute_scale(Fixed d, int lr_shift) {
  if (lr_shift < 0 || lr_shift > 31) throw InvalidArgument("learning-rate shift must be in 0..31");
  return d >> lr_shift;
}

// Step decay: halve the learning rate (one extra shift) after epoch alpha.
constexpr int lr_shift_for_epoch(std::uint64_t epoch, int lr_shift, std::uint64_t decay_epoch) {
  return epoch <= decay_epoch ? lr_shift : lr_shift + 1;
}

// Architectural model x (committed between batches) and working model x_w
// (updated every 8 samples inside a batch). Sized to the padded feature count;
// padding entries stay zero.
class FixedModel {
 public:
  FixedModel() = default;
  explicit FixedModel(std::size_t features)
      : features_(features), arch_(ceil_div(features, kBankBits) * kBankBits), working_(arch_.size()) {}

  std::size_t features() const noexcept { return features_; }
  std::size_t padded_features() const noexcept { return arch_.size(); }

  std::span<const Fixed> architectural() const noexcept { return arch_; }
  std::span<const Fixed> working() const noexcept { return working_; }

  Fixed operator[](std::size_t m) const { return arch_[m]; }

  void set(std::size_t m, Fixed v) {
    if (m >= features_) throw InvalidArgument("model index out of range");
    if (!v.fits_storage()) throw NumericError("model entry exceeds the 32-bit fixed-point range");
    arch_[m] = v;
    working_[m] = v;
  }

  std::vector<double> to_double() const {
    std::vector<double> out(features_);
    for (std::size_t m = 0; m < features_; ++m) out[m] = arch_[m].to_double();
    return out;
  }

  bool operator==(const FixedModel&) const = default;

 private:
  friend struct ModelAccess;
  std::size_t features_ = 0;
  std::vector<Fixed> arch_;
  std::vector<Fixed> working_;
};

struct ModelAccess {
  static std::vector<Fixed>& arch(FixedModel& m) { return m.arch_; }
  static std::vector<Fixed>& working(FixedModel& m) { return m.working_; }
};

// Per-sample intermediates of one batch, in batch-slot order (real samples only).
struct BatchResult {
  std::vector<Fixed> dots;
  std::vector<Fixed> scales;
};

// One mini-batch of the low-precision SGD loop. Every dot product reads the
// architectural model; the gradient sum is committed once as
// x <- x - (sum_t scale_t * Q_s(a_t)) >> log2(B). Batch slots beyond
// samples.size() are zero samples and contribute nothing.
inline BatchResult train_batch(const WeavingStore& store, FixedModel& model, std::span<const std::size_t> samples,
                               int bits, LossKind loss, int lr_shift, std::size_t batch_size) {
  check_batch_size(batch_size);
  check_precision(bits, store.max_bits());
  if (model.features() != store.features()) throw InvalidArgument("model and store dimensions differ");
  if (samples.size() > batch_size) throw InvalidArgument("more samples than the batch size");
  for (auto t : samples)
    if (t >= store.samples()) throw InvalidArgument("sample index out of range");

  auto& arch = ModelAccess::arch(model);
  auto& working = ModelAccess::working(model);
  const int avg_shift = std::countr_zero(batch_size);
  std::vector<Fixed> grad(arch.size());

  BatchResult result;
  result.dots.reserve(samples.size());
  result.scales.reserve(samples.size());

  for (std::size_t group = 0; group < batch_size; group += kBankCount) {
    if (group >= samples.size()) break;
    for (std::size_t bank = 0; bank < kBankCount; ++bank) {
      const std::size_t slot = group + bank;
      if (slot >= samples.size()) break;
      const std::size_t t = samples[slot];
      const Fixed dot = dot_sample(store, t, arch, bits);
      const Fixed scale = compute_scale(df(loss, dot, store.label(t)), lr_shift);
      accumulate_gradient(store, t, scale, bits, grad);
      result.dots.push_back(dot);
      result.scales.push_back(scale);
    }
    for (std::size_t m = 0; m < arch.size(); ++m) working[m] = arch[m] - (grad[m] >> avg_shift);
  }

  for (std::size_t m = 0; m < arch.size(); ++m) {
    if (!working[m].fits_storage()) throw NumericError("model entry " + std::to_string(m) + " overflowed 32-bit storage");
    arch[m] = working[m];
  }
  return result;
}

namespace detail {

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sample_loss(LossKind kind, double pred, double label) {
  if (kind == LossKind::kLinReg) {
    const double r = pred - label;
    return 0.5 * r * r;
  }
  return softplus(pred) - label * pred;
}

}  // namespace detail

// Mean loss over the N real samples on s-bit dequantized data, in double precision.
inline double evaluate_loss(const WeavingStore& store, const FixedModel& model, LossKind kind, int bits) {
  if (model.features() != store.features()) throw InvalidArgument("model and store dimensions differ");
  const auto x = model.to_double();
  double total = 0.0;
  for (std::size_t i = 0; i < store.samples(); ++i) {
    const auto codes = read_sample(store, i, bits);
    double pred = 0.0;
    for (std::size_t m = 0; m < codes.size(); ++m) pred += dequantize(codes[m], bits) * x[m];
    total += detail::sample_loss(kind, pred, store.label(i).to_double());
  }
  return total / static_cast<double>(store.samples());
}

inline double evaluate_loss(const FixedPointTable& table, const FixedModel& model, LossKind kind, int bits) {
  if (model.features() != table.cols()) throw InvalidArgument("model and table dimensions differ");
  check_precision(bits, table.max_bits());
  const auto x = model.to_double();
  double total = 0.0;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    double pred = 0.0;
    for (std::size_t m = 0; m < table.cols(); ++m)
      pred += dequantize(truncate_code(table.code(i, m), table.max_bits(), bits), bits) * x[m];
    total += detail::sample_loss(kind, pred, table.label(i).to_double());
  }
  return total / static_cast<double>(table.rows());
}

struct TrainConfig {
  LossKind loss = LossKind::kLinReg;
  std::size_t batch = 8;
  int lr_shift = 7;
  std::uint64_t decay_epoch = std::numeric_limits<std::uint64_t>::max();  // alpha
  std::uint64_t epochs = 1;
  PrecisionPolicy precision = PrecisionPolicy::fixed(kMaxPrecision);
  std::optional<std::uint64_t> shuffle_seed;
  bool chaining = true;  // selects the cost-model mode for predicted_ms
  PlatformProfile profile;
};

struct EpochMetrics {
  std::uint64_t epoch = 0;
  int bits = 0;
  double loss = 0.0;
  std::uint64_t traffic_bits = 0;
  double wall_ms = 0.0;
  double predicted_ms = 0.0;
};

struct TrainResult {
  FixedModel model;
  std::vector<EpochMetrics> metrics;
};

namespace detail {

// Unbiased draw in [0, bound) from a fixed engine; std::uniform_int_distribution
// is implementation-defined, so it is avoided to keep orders portable.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v = 0;
  do v = rng(); while (v >= limit);
  return v % bound;
}

inline void fisher_yates(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[bounded(rng, i)]);
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochMetrics&)>;

inline TrainResult train(const WeavingStore& store, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  check_batch_size(cfg.batch);
  if (cfg.lr_shift < 0 || cfg.lr_shift > 30) throw InvalidArgument("learning-rate shift must be in 0..30");
  PrecisionPolicy policy = cfg.precision;
  if (policy.cap > store.max_bits()) policy.cap = store.max_bits();
  if (policy.kind == PrecisionPolicy::Kind::kFixed) check_precision(policy.bits, store.max_bits());

  TrainResult result{FixedModel(store.features()), {}};
  result.metrics.reserve(cfg.epochs);

  std::vector<std::size_t> order(store.samples());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::optional<std::mt19937_64> rng;
  if (cfg.shuffle_seed) rng.emplace(*cfg.shuffle_seed);

  for (std::uint64_t e = 1; e <= cfg.epochs; ++e) {
    const auto start = std::chrono::steady_clock::now();
    const int bits = precision_for_epoch(e, policy);
    const int shift = lr_shift_for_epoch(e, cfg.lr_shift, cfg.decay_epoch);
    if (rng) detail::fisher_yates(order, *rng);

    for (std::size_t i = 0; i < order.size(); i += cfg.batch) {
      const std::size_t len = std::min(cfg.batch, order.size() - i);
      train_batch(store, result.model, std::span(order).subspan(i, len), bits, cfg.loss, shift, cfg.batch);
    }

    EpochMetrics row;
    row.epoch = e;
    row.bits = bits;
    row.loss = evaluate_loss(store, result.model, cfg.loss, bits);
    row.traffic_bits = store.samples() * memory_traffic_bits(store.features(), bits);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    row.predicted_ms = predict(cfg.batch, store.features(), bits, store.samples(), cfg.chaining, cfg.profile).epoch_seconds * 1e3;
    result.metrics.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return result;
}

}  // namespace mlweaving
