#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfcomm/circuit.hpp"

namespace surfcomm {

using Cycle = std::int64_t;

/// Per-kind op latency in simulator cycles.
struct LatencyModel {
  std::array<Cycle, kAllOpKinds.size()> cycles{1, 1, 1, 1, 1, 1, 1, 1};

  Cycle operator()(OpKind k) const { return cycles[static_cast<std::size_t>(k)]; }
  void set(OpKind k, Cycle c) { cycles[static_cast<std::size_t>(k)] = c; }

  static LatencyModel unit() { return {}; }

  /// Double-defect timing at code distance d: braided ops (CNOT, T) run the
  /// five-stage open/close sequence of 2d+3 cycles, single-qubit Cliffords are
  /// ten times faster, measurement and preparation take one cycle.
  static LatencyModel braided(int d) {
    LatencyModel m;
    const Cycle braid = 2 * d + 3;
    const Cycle local = (2 * d + 2 + 9) / 10;
    for (OpKind k : {OpKind::H, OpKind::X, OpKind::Z, OpKind::S}) m.set(k, local);
    m.set(OpKind::CNOT, braid);
    m.set(OpKind::T, braid);
    m.set(OpKind::MEASURE, 1);
    m.set(OpKind::PREPARE, 1);
    return m;
  }
};

/// Dependency DAG over a circuit. Node ids are op ids, and every edge goes
/// from a lower id to a higher one, so id order is a topological order.
struct DepDag {
  std::uint32_t num_qubits = 0;
  std::vector<LogicalOp> ops;
  std::vector<std::vector<OpId>> preds;
  std::vector<std::vector<OpId>> succs;
  std::vector<Cycle> latency;
  /// Longest latency-weighted path from the node to any sink, node included.
  std::vector<Cycle> criticality;
  Cycle critical_path_length = 0;

  std::size_t size() const { return ops.size(); }

  std::vector<std::pair<OpId, OpId>> edges() const {
    std::vector<std::pair<OpId, OpId>> out;
    for (OpId u = 0; u < succs.size(); ++u)
      for (OpId v : succs[u]) out.emplace_back(u, v);
    return out;
  }

  Cycle total_latency() const {
    Cycle s = 0;
    for (Cycle l : latency) s += l;
    return s;
  }
};

/// Each op depends on the immediately preceding op on each of its operands.
inline DepDag build_dag(const LogicalCircuit& c, const LatencyModel& latency) {
  DepDag g;
  const std::size_t n = c.size();
  g.num_qubits = c.num_qubits();
  g.ops = c.ops();
  g.preds.assign(n, {});
  g.succs.assign(n, {});
  g.latency.resize(n);
  g.criticality.assign(n, 0);

  constexpr OpId kNone = UINT32_MAX;
  std::vector<OpId> last(c.num_qubits(), kNone);
  for (const LogicalOp& op : c.ops()) {
    g.latency[op.id] = latency(op.kind);
    for (int i = 0; i < op.num_operands(); ++i) {
      OpId p = last[op.operand(i)];
      if (p == kNone) continue;
      auto& ps = g.preds[op.id];
      if (std::find(ps.begin(), ps.end(), p) != ps.end()) continue;
      ps.push_back(p);
      g.succs[p].push_back(op.id);
    }
    for (int i = 0; i < op.num_operands(); ++i) last[op.operand(i)] = op.id;
  }

  for (std::size_t i = n; i-- > 0;) {
    Cycle tail = 0;
    for (OpId s : g.succs[i]) tail = std::max(tail, g.criticality[s]);
    g.criticality[i] = g.latency[i] + tail;
    g.critical_path_length = std::max(g.critical_path_length, g.criticality[i]);
  }
  return g;
}

struct ParallelismProfile {
  double parallelism_factor = 0.0;
  std::size_t total_ops = 0;
  std::size_t num_levels = 0;
  std::size_t t_count = 0;
  std::size_t twoq_count = 0;
};

/// ASAP level of every node under unbounded resources (0-based).
inline std::vector<std::uint32_t> asap_levels(const DepDag& g) {
  std::vector<std::uint32_t> level(g.size(), 0);
  for (OpId v = 0; v < g.size(); ++v)
    for (OpId p : g.preds[v]) level[v] = std::max(level[v], level[p] + 1);
  return level;
}

inline ParallelismProfile parallelism_profile(const DepDag& g) {
  ParallelismProfile p;
  p.total_ops = g.size();
  for (const LogicalOp& op : g.ops) {
    if (op.kind == OpKind::T) ++p.t_count;
    if (op.kind == OpKind::CNOT) ++p.twoq_count;
  }
  if (g.size() == 0) return p;
  auto level = asap_levels(g);
  p.num_levels = *std::max_element(level.begin(), level.end()) + 1;
  p.parallelism_factor = static_cast<double>(p.total_ops) / static_cast<double>(p.num_levels);
  return p;
}

inline nlohmann::json dag_to_json(const DepDag& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const LogicalOp& op : g.ops) {
    nlohmann::json operands = {op.operands[0]};
    if (op.kind == OpKind::CNOT) operands.push_back(op.operands[1]);
    nodes.push_back({{"id", op.id},
                     {"kind", op_kind_name(op.kind)},
                     {"operands", operands},
                     {"latency", g.latency[op.id]},
                     {"criticality", g.criticality[op.id]}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (auto [u, v] : g.edges()) edges.push_back({u, v});
  return {{"num_qubits", g.num_qubits},
          {"nodes", nodes},
          {"edges", edges},
          {"critical_path_length", g.critical_path_length}};
}

}  // namespace surfcomm
