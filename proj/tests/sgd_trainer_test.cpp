#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mlweaving/sgd_trainer.hpp"
#include "mlweaving/synthetic.hpp"
#include "test_support.hpp"

namespace mlweaving {
namespace {

using testing::random_table;

WeavingStore synthetic_store(int s_max = 32, std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.seed = seed;
  return build_mlweaving(quantize_full(normalize_dataset(make_synthetic(spec).raw), s_max));
}

TEST(DfTest, Values) {
  EXPECT_EQ(df(LossKind::kLinReg, Fixed{77}, Fixed{77}).raw, 0);
  EXPECT_EQ(df(LossKind::kLinReg, Fixed{100}, Fixed{40}).raw, 60);
  EXPECT_EQ(df(LossKind::kLogReg, Fixed{}, Fixed::from_double(0.5)).raw, 0);
}

TEST(SigmoidTableTest, CloseToSigmoid) {
  const auto& sig = SigmoidTable::instance();
  for (double x = -12.0; x <= 12.0; x += 0.01) {
    const double got = sig(Fixed::from_double(x)).to_double();
    ASSERT_NEAR(got, 1.0 / (1.0 + std::exp(-x)), 4e-4) << x;
  }
  for (std::int64_t raw = -9 * Fixed::kOne; raw < 9 * Fixed::kOne; raw += 997)
    ASSERT_LE(sig(Fixed{raw}).raw, sig(Fixed{raw + 997}).raw);
}

TEST(ScaleTest, Values) {
  EXPECT_EQ(compute_scale(Fixed{256}, 7).raw, 2);
  EXPECT_EQ(compute_scale(Fixed{0}, 7).raw, 0);
  EXPECT_EQ(compute_scale(Fixed{-256}, 7).raw, -2);
  EXPECT_THROW(compute_scale(Fixed{1}, -1), InvalidArgument);
  EXPECT_THROW(compute_scale(Fixed{1}, 32), InvalidArgument);
}

TEST(LrScheduleTest, StepDecay) {
  EXPECT_EQ(lr_shift_for_epoch(12, 7, 12), 7);
  EXPECT_EQ(lr_shift_for_epoch(13, 7, 12), 8);
  for (std::uint64_t e = 1; e < 100; ++e) EXPECT_EQ(lr_shift_for_epoch(e, 7, 0), 8);
}

// Exact-integer execution of one batch, written against the code table.
std::vector<std::int64_t> integer_batch(const FixedPointTable& t, std::vector<std::int64_t> x,
                                        const std::vector<std::size_t>& batch, int s, int j, int log2b) {
  std::vector<std::int64_t> g(x.size(), 0);
  for (auto i : batch) {
    std::int64_t dot = 0;
    for (std::size_t m = 0; m < t.cols(); ++m) {
      const auto code = truncate_code(t.code(i, m), t.max_bits(), s);
      for (int k = 1; k <= s; ++k)
        if ((code >> (s - k)) & 1u) dot += x[m] >> k;
    }
    const std::int64_t scale = (dot - t.label(i).raw) >> j;
    for (std::size_t m = 0; m < t.cols(); ++m) {
      const auto code = truncate_code(t.code(i, m), t.max_bits(), s);
      for (int k = 1; k <= s; ++k)
        if ((code >> (s - k)) & 1u) g[m] += scale >> k;
    }
  }
  for (std::size_t m = 0; m < x.size(); ++m) x[m] -= g[m] >> log2b;
  return x;
}

TEST(TrainBatchTest, SingleFeatureHandOracle) {
  // codes 0..15 at S=4, labels 1.0 and -0.5 alternating
  std::vector<std::uint32_t> codes = {15, 9, 1, 0, 8, 12, 3, 6};
  std::vector<std::int32_t> labels;
  for (int k = 0; k < 8; ++k) labels.push_back(k % 2 ? -(1 << 23) : (1 << 24));
  FixedPointTable t(8, 1, 4, codes, labels);
  auto store = build_mlweaving(t);
  FixedModel model(1);
  std::vector<std::size_t> batch = {0, 1, 2, 3, 4, 5, 6, 7};
  auto r = train_batch(store, model, batch, 4, LossKind::kLinReg, 3, 8);
  // All dots are zero on the zero model, so each scale is -b >> 3.
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(r.dots[k].raw, 0);
    EXPECT_EQ(r.scales[k].raw, (-static_cast<std::int64_t>(labels[k])) >> 3);
  }
  // Hand: g = sum scale * code/16 with floor per plane shift.
  std::int64_t g = 0;
  for (std::size_t k = 0; k < 8; ++k) {
    const std::int64_t sc = r.scales[k].raw;
    for (int p = 1; p <= 4; ++p)
      if ((codes[k] >> (4 - p)) & 1u) g += sc >> p;
  }
  EXPECT_EQ(model[0].raw, -(g >> 3));
  EXPECT_EQ(model[0].raw, integer_batch(t, {0}, batch, 4, 3, 3)[0]);

  // Second batch from a nonzero model.
  auto expect = integer_batch(t, {model[0].raw}, batch, 4, 3, 3);
  train_batch(store, model, batch, 4, LossKind::kLinReg, 3, 8);
  EXPECT_EQ(model[0].raw, expect[0]);
}

TEST(TrainBatchTest, MatchesIntegerOracleOnRandomInstances) {
  auto table = random_table(32, 70, 12, 77);
  auto store = build_mlweaving(table);
  for (int s : {1, 5, 12}) {
    FixedModel model(70);
    std::vector<std::int64_t> x(70, 0);
    std::vector<std::size_t> batch(16);
    std::iota(batch.begin(), batch.end(), 0);
    for (int round = 0; round < 4; ++round) {
      for (auto& i : batch) i = (i + 16) % 32;
      train_batch(store, model, batch, s, LossKind::kLinReg, 5, 16);
      x = integer_batch(table, x, batch, s, 5, 4);
      for (std::size_t m = 0; m < 70; ++m) ASSERT_EQ(model[m].raw, x[m]) << s << " " << m;
    }
  }
}

TEST(TrainBatchTest, ZeroGradientLeavesModel) {
  std::vector<std::uint32_t> codes(8 * 3, 0);
  auto store = build_mlweaving(FixedPointTable(8, 3, 8, codes, std::vector<std::int32_t>(8, 12345)));
  FixedModel model(3);
  model.set(1, Fixed{999});
  const auto before = model;
  std::vector<std::size_t> batch = {0, 1, 2, 3, 4, 5, 6, 7};
  train_batch(store, model, batch, 8, LossKind::kLinReg, 7, 8);
  EXPECT_EQ(model, before);
}

TEST(TrainBatchTest, BankPermutationInvariant) {
  auto store = build_mlweaving(random_table(16, 90, 16, 3));
  std::vector<std::size_t> order = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  FixedModel ref(90);
  train_batch(store, ref, order, 9, LossKind::kLogReg, 4, 16);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    FixedModel m(90);
    train_batch(store, m, order, 9, LossKind::kLogReg, 4, 16);
    EXPECT_EQ(m, ref);
  }
}

TEST(TrainBatchTest, PaddingSamplesAndFeaturesStayInert) {
  auto table = random_table(13, 70, 8, 21);
  auto store = build_mlweaving(table);
  FixedModel partial(70), padded(70);
  std::vector<std::size_t> five = {8, 9, 10, 11, 12};
  auto r = train_batch(store, partial, five, 8, LossKind::kLinReg, 6, 8);
  EXPECT_EQ(r.dots.size(), 5u);
  for (std::size_t m = 70; m < partial.padded_features(); ++m) EXPECT_EQ(partial.architectural()[m].raw, 0);
  // The same five samples inside a B=16 batch give half the step.
  train_batch(store, padded, five, 8, LossKind::kLinReg, 6, 16);
  EXPECT_NE(partial, padded);
}

TEST(TrainBatchTest, RejectsBadArguments) {
  auto store = build_mlweaving(random_table(16, 20, 8, 1));
  FixedModel model(20), wrong(21);
  std::vector<std::size_t> nine = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<std::size_t> out_of_range = {16};
  std::vector<std::size_t> one = {0};
  EXPECT_THROW(train_batch(store, model, nine, 8, LossKind::kLinReg, 7, 8), InvalidArgument);
  EXPECT_THROW(train_batch(store, model, out_of_range, 8, LossKind::kLinReg, 7, 8), InvalidArgument);
  EXPECT_THROW(train_batch(store, wrong, one, 8, LossKind::kLinReg, 7, 8), InvalidArgument);
  EXPECT_THROW(train_batch(store, model, one, 9, LossKind::kLinReg, 7, 8), InvalidArgument);
  EXPECT_THROW(train_batch(store, model, one, 8, LossKind::kLinReg, 7, 12), InvalidArgument);
}

TEST(TrainBatchTest, OverflowIsReported) {
  std::vector<std::uint32_t> codes(8 * 4, 0xFFFFFFFFu);
  auto store = build_mlweaving(FixedPointTable(8, 4, 32, codes, std::vector<std::int32_t>(8, -(127 << 24))));
  FixedModel model(4);
  std::vector<std::size_t> batch = {0, 1, 2, 3, 4, 5, 6, 7};
  EXPECT_THROW(
      {
        for (int k = 0; k < 10; ++k) train_batch(store, model, batch, 32, LossKind::kLinReg, 0, 8);
      },
      NumericError);
}

// Double-precision mini-batch SGD on the dequantized s-bit data.
std::vector<double> double_sgd(const FixedPointTable& t, int s, int j, std::size_t b, int epochs) {
  std::vector<double> x(t.cols(), 0.0);
  const double lr = std::ldexp(1.0, -j);
  for (int e = 0; e < epochs; ++e)
    for (std::size_t start = 0; start < t.rows(); start += b) {
      std::vector<double> g(t.cols(), 0.0);
      for (std::size_t i = start; i < std::min(start + b, t.rows()); ++i) {
        double dot = 0.0;
        for (std::size_t m = 0; m < t.cols(); ++m) dot += dequantize(truncate_code(t.code(i, m), t.max_bits(), s), s) * x[m];
        const double sc = lr * (dot - t.label(i).to_double());
        for (std::size_t m = 0; m < t.cols(); ++m) g[m] += sc * dequantize(truncate_code(t.code(i, m), t.max_bits(), s), s);
      }
      for (std::size_t m = 0; m < t.cols(); ++m) x[m] -= g[m] / static_cast<double>(b);
    }
  return x;
}

TEST(TrainTest, FullPrecisionTracksDoubleReference) {
  SyntheticSpec spec;
  auto table = quantize_full(normalize_dataset(make_synthetic(spec).raw), 32);
  auto store = build_mlweaving(table);
  TrainConfig cfg;
  cfg.epochs = 3;
  auto fixed = train(store, cfg).model.to_double();
  auto ref = double_sgd(table, 32, 7, 8, 3);
  double sq = 0.0;
  for (std::size_t m = 0; m < ref.size(); ++m) sq += (fixed[m] - ref[m]) * (fixed[m] - ref[m]);
  EXPECT_LT(std::sqrt(sq / static_cast<double>(ref.size())), 1e-3);
}

TEST(TrainTest, OneBatchTracksDoubleReference) {
  auto table = random_table(8, 40, 32, 4);
  auto store = build_mlweaving(table);
  FixedModel model(40);
  std::vector<std::size_t> batch = {0, 1, 2, 3, 4, 5, 6, 7};
  train_batch(store, model, batch, 32, LossKind::kLinReg, 7, 8);
  auto ref = double_sgd(FixedPointTable(8, 40, 32, table.codes(), table.labels()), 32, 7, 8, 1);
  double sq = 0.0;
  for (std::size_t m = 0; m < 40; ++m) sq += (model[m].to_double() - ref[m]) * (model[m].to_double() - ref[m]);
  EXPECT_LT(std::sqrt(sq / 40.0), 1e-3);
}

TEST(TrainTest, LossDecreasesEarly) {
  TrainConfig cfg;
  cfg.epochs = 20;
  auto result = train(synthetic_store(), cfg);
  ASSERT_EQ(result.metrics.size(), 20u);
  for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(result.metrics[e].loss, result.metrics[e - 1].loss);
}

TEST(TrainTest, Deterministic) {
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.shuffle_seed = 9;
  cfg.precision = PrecisionPolicy::dynamic();
  auto store = synthetic_store();
  auto a = train(store, cfg);
  auto b = train(store, cfg);
  EXPECT_EQ(a.model, b.model);
  for (std::size_t e = 0; e < 4; ++e) {
    EXPECT_EQ(a.metrics[e].loss, b.metrics[e].loss);
    EXPECT_EQ(a.metrics[e].bits, b.metrics[e].bits);
    EXPECT_EQ(a.metrics[e].traffic_bits, b.metrics[e].traffic_bits);
  }
  cfg.shuffle_seed = 10;
  EXPECT_NE(train(store, cfg).model, a.model);
}

TEST(TrainTest, ZeroEpochs) {
  TrainConfig cfg;
  cfg.epochs = 0;
  auto result = train(synthetic_store(), cfg);
  EXPECT_TRUE(result.metrics.empty());
  EXPECT_EQ(result.model, FixedModel(16));
}

TEST(TrainTest, MetricsColumns) {
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.precision = PrecisionPolicy::dynamic();
  auto result = train(synthetic_store(), cfg);
  for (const auto& row : result.metrics) {
    EXPECT_EQ(row.bits, precision_for_epoch(row.epoch, PrecisionPolicy::dynamic()));
    EXPECT_EQ(row.traffic_bits, 256 * memory_traffic_bits(16, row.bits));
    EXPECT_GT(row.predicted_ms, 0.0);
  }
}

TEST(TrainTest, LogisticRegressionLearns) {
  SyntheticSpec spec;
  spec.logistic = true;
  spec.samples = 512;
  auto store = build_mlweaving(quantize_full(normalize_dataset(make_synthetic(spec).raw), 16));
  TrainConfig cfg;
  cfg.loss = LossKind::kLogReg;
  cfg.epochs = 30;
  cfg.lr_shift = 3;
  cfg.precision = PrecisionPolicy::fixed(8);
  auto result = train(store, cfg);
  EXPECT_LT(result.metrics.back().loss, std::log(2.0));
}

TEST(EvaluateLossTest, ZeroModelZeroLabels) {
  std::vector<std::uint32_t> codes = {1, 2, 3, 4};
  FixedPointTable t(2, 2, 4, codes, {0, 0});
  EXPECT_EQ(evaluate_loss(t, FixedModel(2), LossKind::kLinReg, 4), 0.0);
  EXPECT_EQ(evaluate_loss(build_mlweaving(t), FixedModel(2), LossKind::kLinReg, 4), 0.0);
}

TEST(EvaluateLossTest, PlantedModelGivesZero) {
  // label = 0.5 * a0 + 0.25 * a1 exactly representable at s = 4
  std::vector<std::uint32_t> codes = {8, 4, 15, 0, 3, 9};
  std::vector<std::int32_t> labels;
  for (std::size_t i = 0; i < 3; ++i)
    labels.push_back(Fixed::from_double(0.5 * codes[2 * i] / 16.0 + 0.25 * codes[2 * i + 1] / 16.0).raw);
  FixedPointTable t(3, 2, 4, codes, labels);
  FixedModel model(2);
  model.set(0, Fixed::from_double(0.5));
  model.set(1, Fixed::from_double(0.25));
  EXPECT_LT(evaluate_loss(t, model, LossKind::kLinReg, 4), 1e-9);
}

TEST(EvaluateLossTest, MatchesBruteForce) {
  auto t = random_table(30, 20, 10, 6);
  auto store = build_mlweaving(t);
  FixedModel model(20);
  std::mt19937_64 rng(2);
  for (std::size_t m = 0; m < 20; ++m) model.set(m, Fixed{static_cast<std::int64_t>(rng() % 2000000) - 1000000});
  for (auto kind : {LossKind::kLinReg, LossKind::kLogReg}) {
    double total = 0.0;
    for (std::size_t i = 0; i < 30; ++i) {
      double z = 0.0;
      for (std::size_t m = 0; m < 20; ++m)
        z += std::floor(t.code(i, m) / 8.0) / 128.0 * model[m].to_double();
      const double b = t.label(i).to_double();
      total += kind == LossKind::kLinReg ? 0.5 * (z - b) * (z - b) : std::log(1.0 + std::exp(z)) - b * z;
    }
    const double expect = total / 30.0;
    EXPECT_NEAR(evaluate_loss(t, model, kind, 7), expect, 1e-6 * std::abs(expect));
    EXPECT_NEAR(evaluate_loss(store, model, kind, 7), expect, 1e-6 * std::abs(expect));
  }
}

}  // namespace
}  // namespace mlweaving
