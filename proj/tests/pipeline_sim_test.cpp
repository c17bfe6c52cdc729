#include <gtest/gtest.h>

#include <random>

#include "mlweaving/cost_model.hpp"
#include "mlweaving/pipeline_sim.hpp"

namespace mlweaving {
namespace {

TEST(HazardTest, CreditsStartAtBatchSize) {
  HazardState st(16);
  EXPECT_TRUE(hazard_try_read(st));
  EXPECT_EQ(st.rd_counter, 8u);
  EXPECT_TRUE(hazard_try_read(st));
  EXPECT_EQ(st.rd_counter, 16u);
  EXPECT_FALSE(hazard_try_read(st));
  hazard_commit(st);
  EXPECT_EQ(st.wr_counter, 32u);
  EXPECT_TRUE(hazard_try_read(st));
}

TEST(HazardTest, CommitsAccumulate) {
  HazardState st(8);
  hazard_commit(hazard_commit(st));
  EXPECT_EQ(st.wr_counter, 24u);
}

TEST(HazardTest, RandomSchedulesNeverOverrun) {
  std::mt19937_64 rng(42);
  for (int sched = 0; sched < 1000; ++sched) {
    HazardState st(8u << (rng() % 4));
    for (int op = 0; op < 200; ++op) {
      if (rng() % 3 == 0) hazard_commit(st);
      else hazard_try_read(st);
      ASSERT_LE(st.rd_counter, st.wr_counter);
    }
  }
}

TEST(PipelineSimTest, ChainingUtilizationMatchesFormula) {
  auto r = simulate_epoch(80000, 2048, 8, 8, true);
  EXPECT_NEAR(r.steady_utilization, 256.0 / 312.0, 0.02 * 256.0 / 312.0);
  EXPECT_NEAR(r.utilization, 256.0 / 312.0, 0.02 * 256.0 / 312.0);
  EXPECT_EQ(r.hazard_violations, 0u);
}

TEST(PipelineSimTest, NoChainingUtilizationMatchesFormula) {
  auto r = simulate_epoch(80000, 2048, 8, 8, false);
  EXPECT_NEAR(r.steady_utilization, 256.0 / 568.0, 0.02 * 256.0 / 568.0);
  EXPECT_NEAR(r.utilization, 256.0 / 568.0, 0.02 * 256.0 / 568.0);
}

TEST(PipelineSimTest, HazardGatesEveryGroupForNarrowModels) {
  SimConfig cfg{800, 64, 32, 8, true, std::nullopt, true};
  auto r = simulate_epoch(cfg);
  EXPECT_EQ(r.batch_period, 136u);
  EXPECT_DOUBLE_EQ(r.steady_utilization, 32.0 / 136.0);
  ASSERT_EQ(r.trace.size(), 100u);
  for (std::size_t b = 1; b < r.trace.size(); ++b) {
    EXPECT_EQ(r.trace[b].read_start, r.trace[b - 1].commit);
    EXPECT_GT(r.trace[b].stall_before, 0u);
  }
}

TEST(PipelineSimTest, ChainingNeverSlower) {
  for (std::size_t b : {8u, 16u, 64u})
    for (std::size_t m : {64u, 500u, 2048u})
      for (int s : {1, 4, 8, 32}) {
        auto a = simulate_epoch(b * 50, m, s, b, true);
        auto c = simulate_epoch(b * 50, m, s, b, false);
        ASSERT_LE(a.total_cycles, c.total_cycles);
      }
}

TEST(PipelineSimTest, SteadyStateMatchesComputeModel) {
  for (std::size_t b : {8u, 32u})
    for (std::size_t m : {100u, 1000u, 4096u})
      for (int s : {1, 3, 8, 16})
        for (bool chaining : {true, false}) {
          auto r = simulate_epoch(b * 1000, m, s, b, chaining);
          EXPECT_NEAR(r.steady_utilization * kPeakGBps, th_comp(b, m, s, chaining), 1e-9)
              << b << " " << m << " " << s << " " << chaining;
        }
}

TEST(PipelineSimTest, TraceOrdering) {
  SimConfig cfg{256, 300, 5, 16, true, std::nullopt, true};
  auto r = simulate_epoch(cfg);
  for (std::size_t b = 0; b < r.trace.size(); ++b) {
    const auto& t = r.trace[b];
    EXPECT_LT(t.read_start, t.read_end);
    EXPECT_LE(t.read_end, t.update_start);
    EXPECT_LT(t.update_start, t.update_end);
    if (b > 0) {
      EXPECT_GE(t.read_start, r.trace[b - 1].commit);
    }
  }
  EXPECT_EQ(r.busy_cycles + r.stall_cycles, r.total_cycles);
}

TEST(PipelineSimTest, RejectsBadConfig) {
  EXPECT_THROW(simulate_epoch(10, 10, 8, 12, true), InvalidArgument);
  EXPECT_THROW(simulate_epoch(0, 10, 8, 8, true), InvalidArgument);
  EXPECT_THROW(simulate_epoch(10, 10, 33, 8, true), InvalidArgument);
}

}  // namespace
}  // namespace mlweaving
