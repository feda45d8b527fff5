#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support/braid_oracle.hpp"
#include "surfcomm/braid_sim.hpp"
#include "surfcomm/synth.hpp"

using namespace surfcomm;

namespace {

CodeParams dd(int d) {
  CodeParams p;
  p.encoding = Encoding::DoubleDefect;
  p.d = d;
  return p;
}

Placement manual(GridDims dims, std::vector<Tile> qubits, std::vector<Tile> factories = {}) {
  Placement p;
  p.dims = dims;
  p.qubit_tile = std::move(qubits);
  p.factory_tile = std::move(factories);
  return p;
}

BraidSchedule run(const LogicalCircuit& c, const Placement& p, int policy, int d = 3) {
  BraidSimConfig cfg;
  cfg.policy = policy;
  return simulate_braids(build_dag(c, LatencyModel::braided(d)), p, dd(d), cfg);
}

}  // namespace

TEST(ExpandEvents, CnotFollowsFiveStageTimeline) {
  LogicalCircuit c(2);
  c.add(OpKind::CNOT, 0, 1);
  auto ev = expand_ops_to_events(build_dag(c, LatencyModel::braided(3)),
                                 manual({2, 1}, {{0, 0}, {1, 0}}), dd(3));
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].steps.back().kind, BraidEventKind::MeasureAncilla);
  EXPECT_EQ(ev[0].steps.back().offset, 8);
  EXPECT_EQ(ev[0].latency, 9);
}

TEST(ExpandEvents, SingleQubitOpIsLocal) {
  LogicalCircuit c(1);
  c.add(OpKind::H, 0);
  for (int d : {3, 5, 9, 15}) {
    auto ev = expand_ops_to_events(build_dag(c, LatencyModel::braided(d)), manual({1, 1}, {{0, 0}}), dd(d));
    EXPECT_FALSE(ev[0].endpoints);
    EXPECT_EQ(ev[0].latency, (2 * d + 2 + 9) / 10);
  }
}

TEST(ExpandEvents, TBraidsFromNearestFactory) {
  LogicalCircuit c(1);
  c.add(OpKind::T, 0);
  auto p = manual({3, 4}, {{2, 1}}, {{0, 3}, {2, 0}});
  auto ev = expand_ops_to_events(build_dag(c, LatencyModel::braided(3)), p, dd(3));
  ASSERT_TRUE(ev[0].endpoints);
  RouterMesh m(p.dims);
  EXPECT_EQ(ev[0].endpoints->first, m.attach_point({2, 0}));
  EXPECT_EQ(m.distance(ev[0].endpoints->first, ev[0].endpoints->second), 1);
  auto s = run(c, p, 6);
  EXPECT_EQ(s.braids[0].route.length(), 1u);
}

TEST(BraidSim, SingleCnotTakesNineCycles) {
  LogicalCircuit c(2);
  c.add(OpKind::CNOT, 0, 1);
  for (int policy = 0; policy < kNumPolicies; ++policy) {
    auto s = run(c, manual({2, 1}, {{0, 0}, {1, 0}}), policy);
    EXPECT_EQ(s.schedule_length, 9);
    EXPECT_GT(s.utilization, 0.0);
    ASSERT_EQ(s.braids.size(), 2u);
    EXPECT_EQ(s.braids[0].open, 1);
    EXPECT_EQ(s.braids[0].close, 4);
    EXPECT_EQ(s.braids[1].open, 5);
    EXPECT_EQ(s.braids[1].close, 8);
  }
  // Hand count: 2 braids x 1 link x 3 cycles over 7 links x 9 cycles.
  auto s = run(c, manual({2, 1}, {{0, 0}, {1, 0}}), 1);
  EXPECT_DOUBLE_EQ(s.utilization, 6.0 / 63.0);
}

TEST(BraidSim, DisjointCnotsOpenTogether) {
  LogicalCircuit c(4);
  c.add(OpKind::CNOT, 0, 1);
  c.add(OpKind::CNOT, 2, 3);
  // Rows far enough apart that the routes share nothing.
  auto p = manual({4, 2}, {{0, 0}, {0, 1}, {3, 0}, {3, 1}});
  for (int policy = 1; policy < kNumPolicies; ++policy) {
    auto s = run(c, p, policy);
    EXPECT_EQ(s.braids[0].open, s.braids[1].open);
    EXPECT_EQ(s.schedule_length, 9);
  }
}

TEST(BraidSim, SharedLinkSerializes) {
  LogicalCircuit c(4);
  c.add(OpKind::CNOT, 0, 2);
  c.add(OpKind::CNOT, 1, 3);
  // Both XY routes run along the top row of routers.
  auto p = manual({1, 4}, {{0, 0}, {0, 1}, {0, 2}, {0, 3}});
  auto s0 = run(c, p, 0);
  EXPECT_EQ(s0.schedule_length, 18);
  auto s1 = run(c, p, 1);
  EXPECT_LE(s1.schedule_length, 18);
  EXPECT_GT(s1.schedule_length, 9);
}

TEST(BraidSim, SerialChainSameForPolicyZeroAndSix) {
  LogicalCircuit c(3);
  c.add(OpKind::CNOT, 0, 1);
  c.add(OpKind::H, 1);
  c.add(OpKind::CNOT, 1, 2);
  c.add(OpKind::T, 2);
  c.add(OpKind::CNOT, 2, 0);
  auto p = naive_placement(3, 1, squarest_grid(4));
  EXPECT_EQ(run(c, p, 0).schedule_length, run(c, p, 6).schedule_length);
  EXPECT_EQ(run(c, p, 0).schedule_length,
            build_dag(c, LatencyModel::braided(3)).critical_path_length);
}

TEST(BraidSim, MagicStateThroughputLimitsBurstOfT) {
  LogicalCircuit c(4);
  for (QubitId q = 0; q < 4; ++q) c.add(OpKind::T, q);
  auto p = manual({2, 3}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {{1, 2}});
  auto s = run(c, p, 6);
  std::vector<Cycle> starts = s.op_start;
  std::sort(starts.begin(), starts.end());
  for (std::size_t i = 1; i < starts.size(); ++i) EXPECT_GE(starts[i] - starts[i - 1], 9);
}

TEST(PolicyOrder, Examples) {
  BraidRequest opening{.op = 0, .stage = 1, .seq = 0, .length = 3, .criticality = 50};
  BraidRequest closing{.op = 1, .stage = 2, .seq = 1, .length = 3, .criticality = 10};
  std::vector<BraidRequest> q{opening, closing};
  policy_order(q, 5);
  EXPECT_EQ(q[0].stage, 2);

  BraidRequest shortb{.op = 0, .seq = 0, .length = 2};
  BraidRequest longb{.op = 1, .seq = 1, .length = 7};
  q = {shortb, longb};
  policy_order(q, 4);
  EXPECT_EQ(q[0].length, 7);

  q = {opening, closing};
  policy_order(q, 3);
  EXPECT_EQ(q[0].criticality, 50);

  EXPECT_THROW(policy_order(q, 9), InvalidArgument);
  EXPECT_THROW(policy_order(q, -1), InvalidArgument);
}

TEST(PolicyOrder, PolicySixGroupsByCriticalityAndLength) {
  std::vector<BraidRequest> q{
      {.op = 0, .stage = 1, .seq = 0, .length = 5, .criticality = 40},
      {.op = 1, .stage = 1, .seq = 1, .length = 2, .criticality = 40},
      {.op = 2, .stage = 1, .seq = 2, .length = 2, .criticality = 20},
      {.op = 3, .stage = 1, .seq = 3, .length = 6, .criticality = 20},
      {.op = 4, .stage = 2, .seq = 4, .length = 1, .criticality = 1},
      {.op = 5, .stage = 1, .seq = 5, .length = 2, .criticality = 20},
  };
  policy_order(q, 6);
  std::vector<OpId> order;
  for (auto& r : q) order.push_back(r.op);
  EXPECT_EQ(order, (std::vector<OpId>{4, 1, 0, 3, 2, 5}));
}

TEST(BraidSimProperties, InvariantsOnRandomWorkloads) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const std::uint32_t q = 16 + static_cast<std::uint32_t>(seed % 3) * 8;
    auto c = synth_workload(q, 300, 1.0 + static_cast<double>(seed % 4) * 4.0, 0.1, seed);
    auto dag = build_dag(c, LatencyModel::braided(3));
    for (int policy = 0; policy < kNumPolicies; ++policy) {
      auto p = braid_placement(c, policy, 1, seed);
      auto s = simulate_braids(dag, p, dd(3), {.policy = policy});  // verified inside
      EXPECT_GE(s.schedule_length, dag.critical_path_length);
      EXPECT_GE(s.utilization, 0.0);
      EXPECT_LE(s.utilization, 1.0);
      std::size_t measured = 0, local = 0;
      for (const auto& e : s.events) {
        measured += e.kind == BraidEventKind::MeasureAncilla;
        local += e.kind == BraidEventKind::Local;
      }
      EXPECT_EQ(measured + local, c.size());
      EXPECT_EQ(braid_schedule_to_json(s)["schedule_length"], s.schedule_length);
    }
  }
}

TEST(BraidSimProperties, DeterministicForFixedInputs) {
  auto c = synth_workload(32, 400, 12, 0.1, 9);
  auto dag = build_dag(c, LatencyModel::braided(3));
  auto p = braid_placement(c, 6, 1, 4);
  auto a = simulate_braids(dag, p, dd(3));
  auto b = simulate_braids(dag, p, dd(3));
  EXPECT_EQ(braid_schedule_to_json(a).dump(), braid_schedule_to_json(b).dump());
  EXPECT_EQ(braid_gantt_csv(a), braid_gantt_csv(b));
}

TEST(BraidSimProperties, DropsAreReinjectedAndCompleted) {
  auto c = synth_workload(36, 600, 30, 0.02, 3, {.partner_span = 0});
  auto dag = build_dag(c, LatencyModel::braided(3));
  auto p = braid_placement(c, 1, 1, 1);
  auto s = simulate_braids(dag, p, dd(3), {.policy = 1, .t_adapt = 1, .t_drop = 4});
  EXPECT_GT(s.drops, 0);
  EXPECT_EQ(std::count_if(s.op_finish.begin(), s.op_finish.end(), [](Cycle f) { return f > 0; }),
            static_cast<std::ptrdiff_t>(c.size()));
}

TEST(BraidSim, ProgressGuardAborts) {
  LogicalCircuit c(4);
  c.add(OpKind::CNOT, 0, 2);
  c.add(OpKind::CNOT, 1, 3);
  auto p = manual({1, 4}, {{0, 0}, {0, 1}, {0, 2}, {0, 3}});
  EXPECT_THROW(simulate_braids(build_dag(c, LatencyModel::braided(3)), p, dd(3),
                               {.policy = 1, .t_adapt = 100, .t_drop = 0}),
               SimulationError);
}

TEST(VerifySchedule, RejectsCrossingBraids) {
  LogicalCircuit c(4);
  c.add(OpKind::CNOT, 0, 2);
  c.add(OpKind::CNOT, 1, 3);
  auto p = manual({1, 4}, {{0, 0}, {0, 1}, {0, 2}, {0, 3}});
  auto dag = build_dag(c, LatencyModel::braided(3));
  auto s = simulate_braids(dag, p, dd(3), {.policy = 1});
  // Shift the second op's braids onto the first op's interval.
  for (auto& b : s.braids)
    if (b.op == 1) {
      b.open = b.stage == 1 ? 1 : 5;
      b.close = b.open + 3;
    }
  s.op_start[1] = 0;
  s.op_finish[1] = 9;
  s.schedule_length = 9;
  EXPECT_THROW(verify_braid_schedule(dag, s), SimulationError);
}

TEST(VerifySchedule, RejectsDependencyViolation) {
  LogicalCircuit c(2);
  c.add(OpKind::H, 0);
  c.add(OpKind::H, 0);
  auto dag = build_dag(c, LatencyModel::braided(3));
  auto s = simulate_braids(dag, manual({1, 2}, {{0, 0}, {0, 1}}), dd(3));
  s.op_start[1] = 0;
  s.op_finish[1] = 1;
  EXPECT_THROW(verify_braid_schedule(dag, s), SimulationError);
}

TEST(TinyOracle, HandCheckedInstances) {
  // Crossed diagonals on a 2x2 grid: every path of each braid passes through
  // an endpoint of the other, so the four braids alternate. A1 [1,4),
  // B1 [4,7), A2 [7,10), B2 [10,13), measure at 13.
  LogicalCircuit c(4);
  c.add(OpKind::CNOT, 0, 3);
  c.add(OpKind::CNOT, 1, 2);
  auto p = manual({2, 2}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  auto dag = build_dag(c, LatencyModel::braided(3));
  oracle::BraidOracle o(dag, p, 3, 9);
  EXPECT_EQ(o.optimum(), 14);
  EXPECT_EQ(simulate_braids(dag, p, dd(3)).schedule_length, 14);

  LogicalCircuit one(2);
  one.add(OpKind::CNOT, 0, 1);
  auto d1 = build_dag(one, LatencyModel::braided(3));
  EXPECT_EQ(oracle::BraidOracle(d1, manual({2, 1}, {{0, 0}, {1, 0}}), 3, 9).optimum(), 9);
}

TEST(TinyOracle, PolicySixWithinBoundOnSampledInstances) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const bool with_t = trial % 2 == 0;
    const std::uint32_t nq = with_t ? 3 : 4;
    LogicalCircuit c(nq);
    const int ops = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < ops; ++i) {
      const int k = static_cast<int>(rng() % 3);
      QubitId a = rng() % nq, b = rng() % nq;
      if (b == a) b = (a + 1) % nq;
      if (k == 0) c.add(OpKind::CNOT, a, b);
      else if (k == 1 && with_t) c.add(OpKind::T, a);
      else c.add(OpKind::H, a);
    }
    const std::uint32_t nf = with_t ? 1 : 0;
    auto p = braid_placement(c, 6, nf, 1);
    auto dag = build_dag(c, LatencyModel::braided(3));
    const Cycle greedy = simulate_braids(dag, p, dd(3)).schedule_length;
    const Cycle best = oracle::BraidOracle(dag, p, 3, 9).optimum();
    EXPECT_LE(best, greedy);
    EXPECT_LE(static_cast<double>(greedy), 1.5 * static_cast<double>(best)) << to_qasm(c);
  }
}
