#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "mlweaving/cost_model.hpp"
#include "mlweaving/error.hpp"
#include "mlweaving/weaving_store.hpp"

namespace mlweaving {

// RAW-hazard credits between the dot-product reads of batch b + 1 and the
// model commit of batch b. wr_counter starts with B credits and gains B per
// commit; every 8-sample group read consumes 8.
struct HazardState {
  std::uint64_t batch = 0;
  std::uint64_t wr_counter = 0;
  std::uint64_t rd_counter = 0;

  explicit HazardState(std::uint64_t b) : batch(b), wr_counter(b), rd_counter(0) {}
};

inline bool hazard_try_read(HazardState& state) {
  if (state.rd_counter == state.wr_counter) return false;
  state.rd_counter += kBankCount;
  return true;
}

// Never blocks.
inline HazardState& hazard_commit(HazardState& state) {
  state.wr_counter += state.batch;
  return state;
}

struct SimConfig {
  std::size_t samples = 0;
  std::size_t features = 0;
  int bits = 0;
  std::size_t batch = 8;
  bool chaining = true;
  std::optional<std::uint64_t> latency_override;
  bool record_trace = false;
};

// Per-batch events, in cycles.
struct BatchTiming {
  std::uint64_t read_start = 0;     // first group granted
  std::uint64_t read_end = 0;       // last group's planes consumed
  std::uint64_t update_start = 0;   // model-update stream begins
  std::uint64_t update_end = 0;     // last model chunk written
  std::uint64_t commit = 0;         // wr_counter += B, model readable by the next batch
  std::uint64_t stall_before = 0;   // cycles the dot stage waited for credits
};

struct CycleReport {
  std::uint64_t total_cycles = 0;
  std::uint64_t busy_cycles = 0;
  std::uint64_t stall_cycles = 0;
  double utilization = 0.0;
  double throughput_gbps = 0.0;
  std::uint64_t batch_period = 0;     // steady-state read_start spacing
  double steady_utilization = 0.0;    // per-batch busy / batch_period
  std::uint64_t hazard_violations = 0;
  std::vector<BatchTiming> trace;
};

// Batch-granularity event simulation of the 8-bank pipeline.
//
// A batch of B samples streams B/8 groups through the dot stage, each taking
// K * s cycles (K = ceil(M/64)). The model-update stream of K chunks, s cycles
// per chunk, starts so that its first chunk lands L cycles after the last
// read. With chaining the commit is forwarded as soon as that first chunk is
// written (s cycles after update start). Without chaining the dot stage waits
// until the final chunk has been written and retired, one more chunk time
// after the update stream ends. Reads are gated by HazardState credits.
inline CycleReport simulate_epoch(const SimConfig& cfg) {
  check_batch_size(cfg.batch);
  if (cfg.bits < 1 || cfg.bits > kMaxPrecision) throw InvalidArgument("precision must be in 1..32");
  if (cfg.samples == 0 || cfg.features == 0) throw InvalidArgument("simulation needs samples and features");

  const std::uint64_t k = ceil_div(cfg.features, kBankBits);
  const std::uint64_t s = static_cast<std::uint64_t>(cfg.bits);
  const std::uint64_t group_cycles = k * s;
  const std::uint64_t groups_per_batch = cfg.batch / kBankCount;
  const std::uint64_t batches = ceil_div(cfg.samples, cfg.batch);
  const std::uint64_t latency = cfg.latency_override ? *cfg.latency_override : pipeline_latency(cfg.bits);
  if (latency < s) throw InvalidArgument("pipeline latency must cover one chunk write");

  HazardState hazard(cfg.batch);
  std::deque<std::uint64_t> pending_commits;  // times, ascending
  CycleReport report;
  if (cfg.record_trace) report.trace.reserve(batches);

  std::uint64_t now = 0;               // dot stage becomes free
  std::uint64_t update_free = 0;       // update stage becomes free
  std::uint64_t last_commit = 0;
  std::uint64_t prev_read_start = 0;
  std::uint64_t last_period = 0;

  for (std::uint64_t b = 0; b < batches; ++b) {
    BatchTiming t;
    for (std::uint64_t g = 0; g < groups_per_batch; ++g) {
      while (!hazard_try_read(hazard)) {
        // Stall until the oldest outstanding commit retires.
        const std::uint64_t at = pending_commits.front();
        pending_commits.pop_front();
        if (at > now) {
          t.stall_before += at - now;
          now = at;
        }
        hazard_commit(hazard);
      }
      if (hazard.rd_counter > hazard.wr_counter) ++report.hazard_violations;
      if (g == 0) t.read_start = now;
      now += group_cycles;
    }
    t.read_end = now;
    t.update_start = std::max(t.read_end + latency - s, update_free);
    t.update_end = t.update_start + k * s;
    t.commit = cfg.chaining ? t.update_start + s : t.update_end + s;
    update_free = t.update_end;
    last_commit = t.commit;
    pending_commits.push_back(t.commit);

    if (b > 0) last_period = t.read_start - prev_read_start;
    prev_read_start = t.read_start;
    if (cfg.record_trace) report.trace.push_back(t);
  }

  report.busy_cycles = batches * groups_per_batch * group_cycles;
  report.total_cycles = std::max({now, update_free, last_commit});
  report.stall_cycles = report.total_cycles - report.busy_cycles;
  report.utilization = static_cast<double>(report.busy_cycles) / static_cast<double>(report.total_cycles);
  report.throughput_gbps = report.utilization * kPeakGBps;
  report.batch_period = batches > 1 ? last_period : report.total_cycles;
  report.steady_utilization =
      static_cast<double>(groups_per_batch * group_cycles) / static_cast<double>(report.batch_period);
  return report;
}

inline CycleReport simulate_epoch(std::size_t samples, std::size_t features, int bits, std::size_t batch, bool chaining) {
  SimConfig cfg;
  cfg.samples = samples;
  cfg.features = features;
  cfg.bits = bits;
  cfg.batch = batch;
  cfg.chaining = chaining;
  return simulate_epoch(cfg);
}

}  // namespace mlweaving
