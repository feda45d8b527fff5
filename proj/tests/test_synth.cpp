#include <gtest/gtest.h>

#include "surfcomm/dag.hpp"
#include "surfcomm/synth.hpp"

using namespace surfcomm;

namespace {

double factor(const LogicalCircuit& c) {
  return parallelism_profile(build_dag(c, LatencyModel::unit())).parallelism_factor;
}

}  // namespace

TEST(Synth, ForcedSerialChain) {
  auto c = synth_workload(4, 4, 1.0, 0.0, 7);
  ASSERT_EQ(c.size(), 4u);
  auto g = build_dag(c, LatencyModel::unit());
  for (OpId v = 1; v < 4; ++v) {
    ASSERT_FALSE(g.preds[v].empty());
    EXPECT_EQ(std::count(g.preds[v].begin(), g.preds[v].end(), v - 1), 1);
  }
  EXPECT_DOUBLE_EQ(factor(c), 1.0);
}

TEST(Synth, HitsTableTwoParallelism) {
  auto c = synth_workload(100, 5000, 29, 0.2, 1);
  EXPECT_EQ(c.size(), 5000u);
  const double f = factor(c);
  EXPECT_GE(f, 24.6);
  EXPECT_LE(f, 33.4);
}

TEST(Synth, HitsHighParallelismTarget) {
  auto c = synth_workload(200, 4000, 66, 0.1, 5);
  EXPECT_NEAR(factor(c), 66.0, 6.6);
}

TEST(Synth, WithinFifteenPercentAcrossTargets) {
  std::uint64_t seed = 11;
  for (double target : {1.0, 1.5, 4.0, 12.0, 29.0, 50.0}) {
    auto c = synth_workload(128, 1200, target, 0.1, seed++);
    EXPECT_EQ(c.size(), 1200u);
    EXPECT_NEAR(factor(c), target, 0.15 * target) << "target " << target;
  }
}

TEST(Synth, DeterministicForFixedSeed) {
  auto a = synth_workload(64, 2000, 20, 0.2, 42);
  auto b = synth_workload(64, 2000, 20, 0.2, 42);
  EXPECT_EQ(to_qasm(a), to_qasm(b));
  EXPECT_NE(to_qasm(a), to_qasm(synth_workload(64, 2000, 20, 0.2, 43)));
}

TEST(Synth, TFractionIsRespected) {
  auto c = synth_workload(64, 4000, 16, 0.25, 3);
  const double frac = static_cast<double>(c.count(OpKind::T)) / 4000.0;
  EXPECT_NEAR(frac, 0.25, 0.03);
  EXPECT_EQ(synth_workload(16, 500, 4, 0.0, 3).count(OpKind::T), 0u);
  EXPECT_EQ(synth_workload(16, 500, 4, 1.0, 3).count(OpKind::T), 500u);
}

TEST(Synth, RejectsInfeasibleTargets) {
  EXPECT_THROW(synth_workload(4, 100, 5, 0.1, 1), InvalidArgument);
  EXPECT_THROW(synth_workload(4, 100, 0.5, 0.1, 1), InvalidArgument);
  EXPECT_THROW(synth_workload(4, 100, 2, 1.5, 1), InvalidArgument);
  EXPECT_THROW(synth_workload(4, 0, 2, 0.1, 1), InvalidArgument);
}
