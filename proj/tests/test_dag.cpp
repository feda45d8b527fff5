#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "surfcomm/dag.hpp"

using namespace surfcomm;

namespace {

LogicalCircuit random_circuit(std::uint32_t n, int ops, std::uint32_t seed) {
  std::mt19937 rng(seed);
  LogicalCircuit c(n);
  for (int i = 0; i < ops; ++i) {
    auto kind = kAllOpKinds[rng() % kAllOpKinds.size()];
    if (kind == OpKind::CNOT && n < 2) kind = OpKind::H;
    QubitId a = rng() % n, b = rng() % n;
    if (kind == OpKind::CNOT && a == b) b = (a + 1) % n;
    c.add(kind, a, b);
  }
  return c;
}

// Longest latency-weighted path starting at v, by enumerating every path.
Cycle longest_path_from(const DepDag& g, OpId v) {
  Cycle best = 0;
  std::function<void(OpId, Cycle)> walk = [&](OpId u, Cycle acc) {
    acc += g.latency[u];
    if (g.succs[u].empty()) best = std::max(best, acc);
    for (OpId s : g.succs[u]) walk(s, acc);
  };
  walk(v, 0);
  return best;
}

}  // namespace

TEST(BuildDag, SerialChainHasOneEdge) {
  LogicalCircuit c(2);
  c.add(OpKind::CNOT, 0, 1);
  c.add(OpKind::CNOT, 0, 1);
  auto g = build_dag(c, LatencyModel::braided(3));
  auto e = g.edges();
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0], std::make_pair(OpId{0}, OpId{1}));
  EXPECT_EQ(g.critical_path_length, 18);
}

TEST(BuildDag, IndependentOpsHaveNoEdges) {
  LogicalCircuit c(2);
  c.add(OpKind::T, 0);
  c.add(OpKind::T, 1);
  auto lat = LatencyModel::braided(3);
  auto g = build_dag(c, lat);
  EXPECT_TRUE(g.edges().empty());
  EXPECT_EQ(g.criticality[0], lat(OpKind::T));
  EXPECT_EQ(g.criticality[1], lat(OpKind::T));
}

TEST(BuildDag, EdgeRuleIsNextToucherOfEachOperand) {
  LogicalCircuit c(3);
  c.add(OpKind::H, 0);        // 0
  c.add(OpKind::H, 1);        // 1
  c.add(OpKind::CNOT, 0, 1);  // 2 <- 0, 1
  c.add(OpKind::T, 2);        // 3
  c.add(OpKind::CNOT, 2, 0);  // 4 <- 3, 2
  auto g = build_dag(c, LatencyModel::unit());
  EXPECT_EQ(g.preds[2], (std::vector<OpId>{0, 1}));
  EXPECT_EQ(g.preds[4], (std::vector<OpId>{3, 2}));
  EXPECT_TRUE(g.preds[3].empty());
}

TEST(BuildDag, CriticalityMatchesExhaustivePathEnumeration) {
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    auto c = random_circuit(4, 10, seed);
    auto g = build_dag(c, LatencyModel::braided(3));
    Cycle longest = 0;
    for (OpId v = 0; v < g.size(); ++v) {
      EXPECT_EQ(g.criticality[v], longest_path_from(g, v)) << "seed " << seed << " node " << v;
      longest = std::max(longest, g.criticality[v]);
    }
    EXPECT_EQ(g.critical_path_length, longest);
  }
}

TEST(DagProperties, AcyclicAndCriticalityDominatesSuccessors) {
  for (std::uint32_t seed = 0; seed < 30; ++seed) {
    auto g = build_dag(random_circuit(5, 60, seed), LatencyModel::braided(5));
    for (auto [u, v] : g.edges()) {
      EXPECT_LT(u, v);
      EXPECT_GE(g.criticality[u], g.criticality[v] + g.latency[u]);
    }
  }
}

TEST(DagProperties, CriticalPathBoundedByTotalLatencyWithEqualityIffSerial) {
  for (std::uint32_t seed = 0; seed < 40; ++seed) {
    auto g = build_dag(random_circuit(1 + seed % 4, 1 + static_cast<int>(seed % 12), seed),
                       LatencyModel::braided(3));
    auto prof = parallelism_profile(g);
    EXPECT_LE(g.critical_path_length, g.total_latency());
    EXPECT_EQ(g.critical_path_length == g.total_latency(), prof.parallelism_factor == 1.0)
        << "seed " << seed;
    EXPECT_GE(prof.parallelism_factor, 1.0);
    EXPECT_LE(prof.parallelism_factor, static_cast<double>(prof.total_ops));
  }
}

TEST(Parallelism, ChainAndAntichain) {
  LogicalCircuit chain(1);
  for (int i = 0; i < 8; ++i) chain.add(OpKind::H, 0);
  EXPECT_DOUBLE_EQ(parallelism_profile(build_dag(chain, LatencyModel::unit())).parallelism_factor,
                   1.0);

  LogicalCircuit wide(8);
  for (QubitId q = 0; q < 8; ++q) wide.add(OpKind::T, q);
  auto p = parallelism_profile(build_dag(wide, LatencyModel::unit()));
  EXPECT_DOUBLE_EQ(p.parallelism_factor, 8.0);
  EXPECT_EQ(p.t_count, 8u);
  EXPECT_EQ(p.twoq_count, 0u);
}

TEST(LatencyModel, BraidedTimings) {
  auto m = LatencyModel::braided(3);
  EXPECT_EQ(m(OpKind::CNOT), 9);
  EXPECT_EQ(m(OpKind::T), 9);
  EXPECT_EQ(m(OpKind::H), 1);
  EXPECT_EQ(m(OpKind::MEASURE), 1);
  EXPECT_EQ(LatencyModel::braided(9)(OpKind::S), 2);
}

TEST(DagJson, ExportsNodesEdgesAndCriticality) {
  LogicalCircuit c(2);
  c.add(OpKind::H, 0);
  c.add(OpKind::CNOT, 0, 1);
  auto j = dag_to_json(build_dag(c, LatencyModel::unit()));
  EXPECT_EQ(j["nodes"].size(), 2u);
  EXPECT_EQ(j["edges"].size(), 1u);
  EXPECT_EQ(j["nodes"][0]["criticality"], 2);
  EXPECT_EQ(j["nodes"][1]["operands"].size(), 2u);
  EXPECT_EQ(j["critical_path_length"], 2);
}
