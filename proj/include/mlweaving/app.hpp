#pragma once

// Command orchestration behind the `mlweaving` tool. Each run_* function takes
// a validated RunConfig, writes its artifacts and reports progress to `log`.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mlweaving/cost_model.hpp"
#include "mlweaving/dataset_io.hpp"
#include "mlweaving/error.hpp"
#include "mlweaving/pipeline_sim.hpp"
#include "mlweaving/precision_scheduler.hpp"
#include "mlweaving/quantize.hpp"
#include "mlweaving/sgd_trainer.hpp"
#include "mlweaving/synthetic.hpp"
#include "mlweaving/weaving_io.hpp"
#include "mlweaving/weaving_store.hpp"

namespace mlweaving {

inline constexpr const char* kMetricsHeader = "epoch,s,loss,traffic_bits,wall_ms,predicted_ms";
inline constexpr const char* kProfileEnv = "MLWEAVING_PROFILE";

struct RunConfig {
  std::string command;

  // input
  std::string dataset;
  DatasetFormat format = DatasetFormat::kLibsvm;
  std::optional<std::size_t> declared_features;
  std::string store;  // .mlwv input, mutually exclusive with dataset
  int max_bits = kMaxPrecision;

  // training
  std::string precision = "32";  // "<s>" or "schedule"
  std::size_t batch = 8;
  int lr_shift = 7;
  std::optional<std::uint64_t> decay_epoch;
  std::uint64_t epochs = 10;
  LossKind loss = LossKind::kLinReg;
  std::optional<std::uint64_t> seed;
  bool chaining = true;
  bool fixed_clock = false;  // write wall_ms as 0 for byte-reproducible metrics

  // outputs
  std::string out;         // quantize / weave / bench output
  std::string metrics_out;
  std::string model_out;
  std::string store_out;

  std::string profile;

  // bench / predict
  std::vector<std::size_t> feature_grid{500, 1000, 2048, 3000, 5000};
  std::vector<int> precision_grid{1, 2, 4, 8, 16};
  std::size_t batches_per_point = 10000;
  std::size_t features = 2048;
  int bits = 8;
  std::size_t samples = 100000;

  // synth
  SyntheticSpec synthetic;
};

inline PrecisionPolicy parse_precision(const std::string& text, int cap) {
  if (text == "schedule" || text == "dynamic") return PrecisionPolicy::dynamic(cap);
  int s = 0;
  try {
    std::size_t used = 0;
    s = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw InvalidArgument("--precision must be an integer in 1..S or 'schedule', got '" + text + "'");
  }
  if (s < 1 || s > cap) throw InvalidArgument("--precision must satisfy 1 <= s <= S (" + std::to_string(cap) + ")");
  return PrecisionPolicy::fixed(s, cap);
}

inline void validate(const RunConfig& cfg) {
  if (cfg.max_bits < 1 || cfg.max_bits > kMaxPrecision) throw InvalidArgument("--max-bits must be in 1..32");
  const bool needs_input = cfg.command == "quantize" || cfg.command == "weave" || cfg.command == "train";
  if (needs_input) {
    const bool allow_store = cfg.command == "train";
    if (cfg.dataset.empty() && (!allow_store || cfg.store.empty()))
      throw InvalidArgument(allow_store ? "train needs --dataset or --store" : "--dataset is required");
    if (!cfg.dataset.empty() && !cfg.store.empty()) throw InvalidArgument("--dataset and --store are mutually exclusive");
  }
  if ((cfg.command == "quantize" || cfg.command == "weave") && cfg.out.empty()) throw InvalidArgument("--out is required");
  if (cfg.command == "train") {
    check_batch_size(cfg.batch);
    if (cfg.lr_shift < 0 || cfg.lr_shift > 30) throw InvalidArgument("--lr-shift must be in 0..30");
    parse_precision(cfg.precision, cfg.max_bits);
  }
  if (cfg.command == "bench") {
    check_batch_size(cfg.batch);
    if (cfg.feature_grid.empty() || cfg.precision_grid.empty())
      throw InvalidArgument("bench needs a non-empty --features and --precision grid");
    for (auto m : cfg.feature_grid)
      if (m == 0) throw InvalidArgument("grid feature counts must be positive");
    for (auto s : cfg.precision_grid)
      if (s < 1 || s > kMaxPrecision) throw InvalidArgument("grid precisions must be in 1..32");
    if (cfg.batches_per_point == 0) throw InvalidArgument("--batches must be positive");
  }
  if (cfg.command == "predict") {
    check_batch_size(cfg.batch);
    if (cfg.bits < 1 || cfg.bits > kMaxPrecision) throw InvalidArgument("--bits must be in 1..32");
    if (cfg.features == 0 || cfg.samples == 0) throw InvalidArgument("--features and --samples must be positive");
  }
}

inline PlatformProfile resolve_profile(const RunConfig& cfg) {
  if (!cfg.profile.empty()) return load_profile(cfg.profile);
  if (const char* env = std::getenv(kProfileEnv); env && *env) return load_profile(env);
  return {};
}

namespace detail {

inline std::string format_double(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

}  // namespace detail

// Logistic regression expects {0, 1} labels; positive labels map to 1.
inline FixedPointTable table_from_dataset(const RunConfig& cfg) {
  RawMatrix raw = ingest(cfg.dataset, cfg.format, cfg.declared_features);
  if (cfg.loss == LossKind::kLogReg)
    for (auto& b : raw.labels) b = b > 0.0 ? 1.0 : 0.0;
  return quantize_full(normalize_dataset(raw), cfg.max_bits);
}

inline WeavingStore store_from_config(const RunConfig& cfg) {
  if (!cfg.store.empty()) return load_file(cfg.store);
  return build_mlweaving(table_from_dataset(cfg));
}

inline std::string metrics_row(const EpochMetrics& m, bool fixed_clock) {
  return std::to_string(m.epoch) + "," + std::to_string(m.bits) + "," + detail::format_double(m.loss, "%.12g") + "," +
         std::to_string(m.traffic_bits) + "," + detail::format_double(fixed_clock ? 0.0 : m.wall_ms, "%.3f") + "," +
         detail::format_double(m.predicted_ms, "%.6f");
}

inline void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& rows, bool fixed_clock) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) out << metrics_row(r, fixed_clock) << '\n';
}

inline void write_model(std::ostream& out, const FixedModel& model) {
  out << "feature,raw,value\n";
  for (std::size_t m = 0; m < model.features(); ++m)
    out << m << ',' << model[m].raw << ',' << detail::format_double(model[m].to_double(), "%.9g") << '\n';
}

inline TrainResult run_train(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const WeavingStore store = store_from_config(cfg);
  if (!cfg.store_out.empty()) save_file(store, cfg.store_out);

  TrainConfig tc;
  tc.loss = cfg.loss;
  tc.batch = cfg.batch;
  tc.lr_shift = cfg.lr_shift;
  if (cfg.decay_epoch) tc.decay_epoch = *cfg.decay_epoch;
  tc.epochs = cfg.epochs;
  tc.precision = parse_precision(cfg.precision, store.max_bits());
  tc.shuffle_seed = cfg.seed;
  tc.chaining = cfg.chaining;
  tc.profile = resolve_profile(cfg);

  log << "train: N=" << store.samples() << " M=" << store.features() << " S=" << store.max_bits() << " B=" << cfg.batch
      << " loss=" << to_string(cfg.loss) << '\n';
  TrainResult result = train(store, tc, [&](const EpochMetrics& m) {
    log << "epoch " << m.epoch << " s=" << m.bits << " loss=" << detail::format_double(m.loss, "%.8g")
        << " traffic_bits=" << m.traffic_bits << " predicted_ms=" << detail::format_double(m.predicted_ms, "%.4f") << '\n';
  });

  if (!cfg.metrics_out.empty()) {
    auto out = detail::open_output(cfg.metrics_out);
    write_metrics_csv(out, result.metrics, cfg.fixed_clock);
  }
  if (!cfg.model_out.empty()) {
    auto out = detail::open_output(cfg.model_out);
    write_model(out, result.model);
  }
  return result;
}

// Text dump of T_S: header line "N M S", then "label_raw code_1 ... code_M" per sample.
inline FixedPointTable run_quantize(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const FixedPointTable table = table_from_dataset(cfg);
  auto out = detail::open_output(cfg.out);
  out << table.rows() << ' ' << table.cols() << ' ' << table.max_bits() << '\n';
  for (std::size_t i = 0; i < table.rows(); ++i) {
    out << table.labels()[i];
    for (std::size_t m = 0; m < table.cols(); ++m) out << ' ' << table.code(i, m);
    out << '\n';
  }
  log << "quantize: wrote " << table.rows() << "x" << table.cols() << " codes at S=" << table.max_bits() << " to " << cfg.out << '\n';
  return table;
}

inline WeavingStore run_weave(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  WeavingStore store = build_mlweaving(table_from_dataset(cfg));
  save_file(store, cfg.out);
  log << "weave: " << store.lines().size() << " lines (" << store.sample_groups() << " groups x " << store.chunks()
      << " chunks x " << store.max_bits() << " planes) -> " << cfg.out << '\n';
  return store;
}

struct BenchRow {
  std::size_t batch = 0;
  std::size_t features = 0;
  int bits = 0;
  ThroughputEstimate chaining;
  ThroughputEstimate no_chaining;
  double speedup = 0.0;
  double sim_chaining_gbps = 0.0;
  double sim_no_chaining_gbps = 0.0;
  double sim_ratio_chaining = 0.0;     // simulated / analytic compute throughput
  double sim_ratio_no_chaining = 0.0;
};

inline constexpr const char* kBenchHeader =
    "B,M,s,th_comp_chaining,th_comp_no_chaining,th_mem,th_chaining,th_no_chaining,speedup,"
    "sim_th_chaining,sim_th_no_chaining,sim_ratio_chaining,sim_ratio_no_chaining";

inline std::vector<BenchRow> run_bench(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  validate(cfg);
  const PlatformProfile profile = resolve_profile(cfg);
  const SpeedupSurface surface = speedup_surface(cfg.batch, cfg.feature_grid, cfg.precision_grid, profile);

  std::vector<BenchRow> rows;
  out << kBenchHeader << '\n';
  for (const auto& cell : surface.cells) {
    BenchRow row;
    row.batch = cfg.batch;
    row.features = cell.features;
    row.bits = cell.bits;
    row.chaining = cell.chaining;
    row.no_chaining = cell.no_chaining;
    row.speedup = cell.speedup;

    SimConfig sim;
    sim.samples = cfg.batches_per_point * cfg.batch;
    sim.features = cell.features;
    sim.bits = cell.bits;
    sim.batch = cfg.batch;
    sim.latency_override = profile.latency_override;
    sim.chaining = true;
    row.sim_chaining_gbps = simulate_epoch(sim).utilization * profile.peak_gbps;
    sim.chaining = false;
    row.sim_no_chaining_gbps = simulate_epoch(sim).utilization * profile.peak_gbps;
    row.sim_ratio_chaining = row.sim_chaining_gbps / cell.chaining.th_comp;
    row.sim_ratio_no_chaining = row.sim_no_chaining_gbps / cell.no_chaining.th_comp;

    using detail::format_double;
    out << row.batch << ',' << row.features << ',' << row.bits << ',' << format_double(row.chaining.th_comp, "%.4f") << ','
        << format_double(row.no_chaining.th_comp, "%.4f") << ',' << format_double(row.chaining.th_mem, "%.4f") << ','
        << format_double(row.chaining.th, "%.4f") << ',' << format_double(row.no_chaining.th, "%.4f") << ','
        << format_double(row.speedup, "%.4f") << ',' << format_double(row.sim_chaining_gbps, "%.4f") << ','
        << format_double(row.sim_no_chaining_gbps, "%.4f") << ',' << format_double(row.sim_ratio_chaining, "%.5f") << ','
        << format_double(row.sim_ratio_no_chaining, "%.5f") << '\n';
    rows.push_back(row);
  }
  const auto& best = surface.best();
  log << "bench: peak chaining speedup " << detail::format_double(best.speedup, "%.3f") << "x at M=" << best.features
      << " s=" << best.bits << '\n';
  return rows;
}

inline std::vector<ThroughputEstimate> run_predict(const RunConfig& cfg, std::ostream& out) {
  validate(cfg);
  const PlatformProfile profile = resolve_profile(cfg);
  std::vector<ThroughputEstimate> est{predict(cfg.batch, cfg.features, cfg.bits, cfg.samples, true, profile),
                                      predict(cfg.batch, cfg.features, cfg.bits, cfg.samples, false, profile)};
  out << "mode,th_comp,th_mem,th,epoch_ms,traffic_bits_per_sample\n";
  for (const auto& e : est)
    out << to_string(e.mode) << ',' << detail::format_double(e.th_comp, "%.4f") << ',' << detail::format_double(e.th_mem, "%.4f")
        << ',' << detail::format_double(e.th, "%.4f") << ',' << detail::format_double(e.epoch_seconds * 1e3, "%.6f") << ','
        << memory_traffic_bits(cfg.features, cfg.bits) << '\n';
  return est;
}

inline RawMatrix run_synth(const RunConfig& cfg, std::ostream& log) {
  if (cfg.out.empty()) throw InvalidArgument("--out is required");
  const SyntheticDataset ds = make_synthetic(cfg.synthetic);
  auto out = detail::open_output(cfg.out);
  if (cfg.format == DatasetFormat::kCsv) {
    out.precision(17);
    for (std::size_t i = 0; i < ds.raw.rows; ++i) {
      out << ds.raw.labels[i];
      for (std::size_t m = 0; m < ds.raw.cols; ++m) out << ',' << ds.raw.at(i, m);
      out << '\n';
    }
  } else {
    write_libsvm(out, ds.raw);
  }
  log << "synth: " << ds.raw.rows << "x" << ds.raw.cols << " -> " << cfg.out << '\n';
  return ds.raw;
}

}  // namespace mlweaving
