#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfcomm/dag.hpp"
#include "surfcomm/error.hpp"
#include "surfcomm/layout.hpp"
#include "surfcomm/mesh.hpp"
#include "surfcomm/qec.hpp"

namespace surfcomm {

inline constexpr int kNumPolicies = 7;

inline int check_policy(int policy) {
  if (policy < 0 || policy >= kNumPolicies)
    throw InvalidArgument("unknown policy " + std::to_string(policy) + " (expected 0-6)");
  return policy;
}

/// Policies 2 and up run on an interaction-optimized layout.
inline bool policy_uses_optimized_layout(int policy) { return check_policy(policy) >= 2; }

enum class BraidEventKind { InitAncilla, OpenBraid, CloseBraid, Stabilize, MeasureAncilla, Local };

inline std::string_view event_kind_name(BraidEventKind k) {
  switch (k) {
    case BraidEventKind::InitAncilla: return "init_ancilla";
    case BraidEventKind::OpenBraid: return "open_braid";
    case BraidEventKind::CloseBraid: return "close_braid";
    case BraidEventKind::Stabilize: return "stabilize";
    case BraidEventKind::MeasureAncilla: return "measure_ancilla";
    case BraidEventKind::Local: return "local";
  }
  return "?";
}

inline bool is_braided(OpKind k) { return k == OpKind::CNOT || k == OpKind::T; }

/// Nominal event sequence of one op when nothing stalls it.
struct OpEvents {
  OpId op = 0;
  struct Step {
    BraidEventKind kind;
    Cycle offset;
  };
  std::vector<Step> steps;
  Cycle latency = 0;
  /// Braid endpoints for braided ops; the T source is the nearest factory.
  std::optional<std::pair<RouterId, RouterId>> endpoints;
};

inline std::vector<OpEvents> expand_ops_to_events(const DepDag& dag, const Placement& placement,
                                                  const CodeParams& params) {
  if (placement.qubit_tile.size() < dag.num_qubits)
    throw InvalidArgument("expand_ops_to_events: qubit without a tile");
  const RouterMesh mesh(placement.dims);
  const Cycle d = params.d;
  const LatencyModel lat = LatencyModel::braided(params.d);
  std::vector<OpEvents> out;
  for (const LogicalOp& op : dag.ops) {
    OpEvents e;
    e.op = op.id;
    e.latency = lat(op.kind);
    if (!is_braided(op.kind)) {
      e.steps.push_back({BraidEventKind::Local, 0});
      out.push_back(std::move(e));
      continue;
    }
    const RouterId dst = mesh.attach_point(placement.qubit_tile[op.operand(0)]);
    RouterId src;
    if (op.kind == OpKind::CNOT) {
      src = mesh.attach_point(placement.qubit_tile[op.operand(1)]);
    } else {
      if (placement.factory_tile.empty()) throw InvalidArgument("T op without a factory");
      src = mesh.attach_point(placement.factory_tile[0]);
      for (Tile f : placement.factory_tile)
        if (mesh.distance(mesh.attach_point(f), dst) < mesh.distance(src, dst)) src = mesh.attach_point(f);
    }
    e.endpoints = std::make_pair(src, dst);
    e.steps = {{BraidEventKind::InitAncilla, 0},     {BraidEventKind::OpenBraid, 1},
               {BraidEventKind::CloseBraid, 1 + d},  {BraidEventKind::Stabilize, 1 + d},
               {BraidEventKind::OpenBraid, 2 + d},   {BraidEventKind::CloseBraid, 2 + 2 * d},
               {BraidEventKind::MeasureAncilla, 2 + 2 * d}};
    out.push_back(std::move(e));
  }
  return out;
}

struct BraidSimConfig {
  int policy = 6;
  /// Waiting cycles before adaptive routing; negative means 2d.
  Cycle t_adapt = -1;
  /// Waiting cycles before drop and re-inject; negative means 8d.
  Cycle t_drop = -1;
  /// Magic state production period per factory; negative means 2d+3.
  Cycle p_magic = -1;
  bool record_events = true;
};

inline void to_json(nlohmann::json& j, const BraidSimConfig& c) {
  j = {{"policy", c.policy}, {"t_adapt", c.t_adapt}, {"t_drop", c.t_drop},
       {"p_magic", c.p_magic}, {"record_events", c.record_events}};
}

inline void from_json(const nlohmann::json& j, BraidSimConfig& c) {
  const BraidSimConfig def;
  c.policy = j.value("policy", def.policy);
  c.t_adapt = j.value("t_adapt", def.t_adapt);
  c.t_drop = j.value("t_drop", def.t_drop);
  c.p_magic = j.value("p_magic", def.p_magic);
  c.record_events = j.value("record_events", def.record_events);
}

struct BraidRecord {
  BraidId id = 0;
  OpId op = 0;
  int stage = 1;  // 1 = opening braid, 2 = closing braid
  Route route;
  Cycle open = 0;
  Cycle close = 0;  // claims cover [open, close - 1]
  bool adaptive = false;
};

struct BraidEvent {
  Cycle cycle = 0;
  BraidEventKind kind = BraidEventKind::Local;
  OpId op = 0;
  BraidId braid = -1;
};

struct BraidSchedule {
  int policy = 0;
  int d = 3;
  GridDims tiles;
  Cycle schedule_length = 0;
  Cycle critical_path = 0;
  double utilization = 0.0;
  std::int64_t drops = 0;
  std::int64_t adaptive_reroutes = 0;
  std::vector<Cycle> op_start;
  std::vector<Cycle> op_finish;  // one past the op's last event
  std::vector<BraidRecord> braids;
  std::vector<BraidEvent> events;
  std::vector<std::int64_t> link_busy;
};

/// A braid waiting for a route.
struct BraidRequest {
  OpId op = 0;
  int stage = 1;
  RouterId src = 0;
  RouterId dst = 0;
  Cycle earliest = 0;
  Cycle waiting_since = 0;
  std::uint64_t seq = 0;
  int length = 0;
  Cycle criticality = 0;
};

/// Sorts candidate braids into the order in which the policy tries them.
inline void policy_order(std::vector<BraidRequest>& q, int policy) {
  check_policy(policy);
  auto by_seq = [](const BraidRequest& a, const BraidRequest& b) { return a.seq < b.seq; };
  switch (policy) {
    case 0:
    case 1:
    case 2:
      std::sort(q.begin(), q.end(), [&](const BraidRequest& a, const BraidRequest& b) {
        if (a.op != b.op) return a.op < b.op;
        return by_seq(a, b);
      });
      return;
    case 3:
      std::sort(q.begin(), q.end(), [&](const BraidRequest& a, const BraidRequest& b) {
        if (a.criticality != b.criticality) return a.criticality > b.criticality;
        return by_seq(a, b);
      });
      return;
    case 4:
      std::sort(q.begin(), q.end(), [&](const BraidRequest& a, const BraidRequest& b) {
        if (a.length != b.length) return a.length > b.length;
        return by_seq(a, b);
      });
      return;
    case 5:
      std::sort(q.begin(), q.end(), [&](const BraidRequest& a, const BraidRequest& b) {
        if (a.stage != b.stage) return a.stage > b.stage;
        return by_seq(a, b);
      });
      return;
    default: {
      Cycle top = 0;
      for (const auto& r : q) top = std::max(top, r.criticality);
      std::sort(q.begin(), q.end(), [&](const BraidRequest& a, const BraidRequest& b) {
        if (a.stage != b.stage) return a.stage > b.stage;
        if (a.criticality != b.criticality) return a.criticality > b.criticality;
        if (a.length != b.length) return a.criticality == top ? a.length < b.length : a.length > b.length;
        if (a.op != b.op) return a.op < b.op;
        return by_seq(a, b);
      });
    }
  }
}

/// Checks the schedule against the DAG: dependency order, the per-op event
/// timeline, and that no two braids hold a router or link at the same cycle.
/// Throws SimulationError on the first violation.
inline void verify_braid_schedule(const DepDag& dag, const BraidSchedule& s) {
  const auto n = dag.size();
  if (s.op_start.size() != n || s.op_finish.size() != n)
    throw SimulationError("schedule does not cover every op");
  const LatencyModel lat = LatencyModel::braided(s.d);
  std::vector<std::vector<const BraidRecord*>> by_op(n);
  for (const auto& b : s.braids) {
    if (b.op >= n) throw SimulationError("braid refers to unknown op");
    by_op[b.op].push_back(&b);
  }
  Cycle length = 0;
  for (OpId v = 0; v < n; ++v) {
    for (OpId p : dag.preds[v])
      if (s.op_start[v] < s.op_finish[p])
        throw SimulationError("op " + std::to_string(v) + " starts before predecessor " +
                              std::to_string(p) + " completes");
    length = std::max(length, s.op_finish[v]);
    if (!is_braided(dag.ops[v].kind)) {
      if (!by_op[v].empty() || s.op_finish[v] != s.op_start[v] + lat(dag.ops[v].kind))
        throw SimulationError("local op " + std::to_string(v) + " has a bad timeline");
      continue;
    }
    if (by_op[v].size() != 2) throw SimulationError("op " + std::to_string(v) + " needs two braids");
    const BraidRecord* b1 = by_op[v][0];
    const BraidRecord* b2 = by_op[v][1];
    if (b1->stage != 1) std::swap(b1, b2);
    if (b1->stage != 1 || b2->stage != 2 || b1->open < s.op_start[v] + 1 ||
        b1->close != b1->open + s.d || b2->open < b1->close + 1 || b2->close != b2->open + s.d ||
        s.op_finish[v] != b2->close + 1)
      throw SimulationError("op " + std::to_string(v) + " violates the braid event timeline");
  }
  if (length != s.schedule_length) throw SimulationError("schedule length mismatch");
  if (s.schedule_length < dag.critical_path_length)
    throw SimulationError("schedule shorter than the critical path");

  // Replay claims in time order; releases at a cycle precede claims.
  RouterMesh mesh(s.tiles);
  std::vector<std::tuple<Cycle, int, std::size_t>> timeline;
  for (std::size_t i = 0; i < s.braids.size(); ++i) {
    const Route& r = s.braids[i].route;
    if (r.routers.size() != r.links.size() + 1 || r.links.empty())
      throw SimulationError("malformed route");
    for (std::size_t k = 0; k < r.links.size(); ++k)
      if (mesh.link_between(r.routers[k], r.routers[k + 1]) != r.links[k])
        throw SimulationError("route is not a connected path");
    timeline.emplace_back(s.braids[i].open, 1, i);
    timeline.emplace_back(s.braids[i].close, 0, i);
  }
  std::sort(timeline.begin(), timeline.end());
  for (auto [t, is_open, i] : timeline) {
    const auto& b = s.braids[i];
    if (is_open) {
      if (!mesh.route_free(b.route))
        throw SimulationError("braids cross at cycle " + std::to_string(t));
      mesh.claim(b.route, b.id);  // also rejects a route that revisits a router
    } else {
      mesh.release(b.route, b.id);
    }
  }
}

namespace detail {

class BraidSimulator {
 public:
  BraidSimulator(const DepDag& dag, const Placement& placement, const CodeParams& params,
                 const BraidSimConfig& cfg)
      : dag_(dag), pl_(placement), cfg_(cfg), mesh_(placement.dims), d_(params.d) {
    if (placement.qubit_tile.size() < dag.num_qubits)
      throw InvalidArgument("braid simulation: qubit without a tile");
    check_policy(cfg.policy);
    t_adapt_ = cfg.t_adapt >= 0 ? cfg.t_adapt : 2 * d_;
    t_drop_ = cfg.t_drop >= 0 ? cfg.t_drop : 8 * d_;
    p_magic_ = cfg.p_magic >= 0 ? cfg.p_magic : 2 * d_ + 3;
    factory_ready_.assign(placement.factory_tile.size(), 0);
    for (const auto& op : dag.ops)
      if (op.kind == OpKind::T && placement.factory_tile.empty())
        throw InvalidArgument("braid simulation: T op but no magic state factory");
  }

  BraidSchedule run() {
    const std::size_t n = dag_.size();
    const LatencyModel lat = LatencyModel::braided(static_cast<int>(d_));
    s_.policy = cfg_.policy;
    s_.d = static_cast<int>(d_);
    s_.tiles = pl_.dims;
    s_.critical_path = dag_.critical_path_length;
    s_.op_start.assign(n, -1);
    s_.op_finish.assign(n, -1);
    s_.link_busy.assign(mesh_.num_links(), 0);

    std::vector<std::size_t> unmet(n);
    std::vector<Cycle> ready_at(n, 0);
    std::vector<OpId> pending;  // ops with all predecessors scheduled
    std::vector<OpId> arrived;  // newly unblocked, merged into pending each cycle
    for (OpId v = 0; v < n; ++v) {
      unmet[v] = dag_.preds[v].size();
      if (unmet[v] == 0) pending.push_back(v);
    }
    auto finish_op = [&](OpId v, Cycle at) {
      s_.op_finish[v] = at;
      ++finished_;
      serial_busy_until_ = at;
      for (OpId w : dag_.succs[v]) {
        ready_at[w] = std::max(ready_at[w], at);
        if (--unmet[w] == 0) arrived.push_back(w);
      }
    };

    const bool serial = cfg_.policy == 0;
    OpId next_serial = 0;
    Cycle now = 0, last_progress = 0;
    while (finished_ < n || !closes_.empty()) {
      bool progress = false;

      // (1) Close braids whose hold timer expired.
      while (!closes_.empty() && closes_.top().first == now) {
        const std::size_t bi = closes_.top().second;
        closes_.pop();
        BraidRecord& b = s_.braids[bi];
        mesh_.release(b.route, b.id);
        log(now, BraidEventKind::CloseBraid, b.op, b.id);
        if (b.stage == 1) {
          log(now, BraidEventKind::Stabilize, b.op, -1);
          enqueue(b.op, 2, b.route.routers.front(), b.route.routers.back(), now + 1);
        } else {
          log(now, BraidEventKind::MeasureAncilla, b.op, -1);
          finish_op(b.op, now + 1);
        }
        progress = true;
      }

      // (2) Start ops whose dependencies are met.
      pending.insert(pending.end(), arrived.begin(), arrived.end());
      arrived.clear();
      std::sort(pending.begin(), pending.end(), [&](OpId a, OpId b) {
        if (uses_criticality() && dag_.criticality[a] != dag_.criticality[b])
          return dag_.criticality[a] > dag_.criticality[b];
        return a < b;
      });
      std::vector<OpId> still;
      for (OpId v : pending) {
        const bool allowed = !serial || (v == next_serial && serial_busy_until_ <= now);
        if (!allowed || ready_at[v] > now || !try_start(v, now, lat, finish_op)) {
          still.push_back(v);
          continue;
        }
        if (serial) {
          ++next_serial;
          // A braided op holds the serial slot until its measure event.
          if (is_braided(dag_.ops[v].kind)) serial_busy_until_ = kNever;
        }
        progress = true;
      }
      pending.swap(still);
      pending.insert(pending.end(), arrived.begin(), arrived.end());
      arrived.clear();

      // (3)-(5) Order the waiting braids and open those that find a route.
      std::vector<BraidRequest> cand, later;
      for (auto& r : queue_) (r.earliest <= now ? cand : later).push_back(r);
      policy_order(cand, cfg_.policy);
      for (auto& r : cand) {
        if (open_braid(r, now)) {
          progress = true;
          continue;
        }
        if (now - r.waiting_since >= t_drop_) {
          ++s_.drops;
          r.seq = next_seq_++;
          r.waiting_since = now;
        }
        later.push_back(r);
      }
      queue_.swap(later);

      if (progress) last_progress = now;
      if (now - last_progress > 10 * t_drop_)
        throw SimulationError("no progress for " + std::to_string(10 * t_drop_) +
                              " cycles at cycle " + std::to_string(now));
      if (finished_ == n && closes_.empty()) break;

      // (6) Advance the clock, skipping idle stretches.
      Cycle next = now + 1;
      if (queue_.empty()) {
        Cycle wake = kNever;
        if (!closes_.empty()) wake = std::min(wake, closes_.top().first);
        for (OpId v : pending) {
          Cycle t = ready_at[v];
          if (serial) t = std::max(t, serial_busy_until_);
          if (dag_.ops[v].kind == OpKind::T) t = std::max(t, earliest_magic());
          wake = std::min(wake, t);
        }
        if (wake != kNever && wake > next) {
          next = wake;
          last_progress = next;
        }
      }
      now = next;
    }

    Cycle length = 0;
    std::int64_t busy = 0;
    for (Cycle f : s_.op_finish) length = std::max(length, f);
    for (auto x : s_.link_busy) busy += x;
    s_.schedule_length = length;
    s_.utilization = length > 0 && mesh_.num_links() > 0
                         ? static_cast<double>(busy) /
                               (static_cast<double>(mesh_.num_links()) * static_cast<double>(length))
                         : 0.0;
    return std::move(s_);
  }

 private:
  static constexpr Cycle kNever = INT64_MAX;

  bool uses_criticality() const { return cfg_.policy == 3 || cfg_.policy == 6; }

  Cycle earliest_magic() const {
    Cycle t = kNever;
    for (Cycle f : factory_ready_) t = std::min(t, f);
    return t;
  }

  template <class Finish>
  bool try_start(OpId v, Cycle now, const LatencyModel& lat, Finish& finish_op) {
    const LogicalOp& op = dag_.ops[v];
    if (!is_braided(op.kind)) {
      s_.op_start[v] = now;
      log(now, BraidEventKind::Local, v, -1);
      finish_op(v, now + lat(op.kind));
      return true;
    }
    const RouterId dst = mesh_.attach_point(pl_.qubit_tile[op.operand(0)]);
    RouterId src;
    if (op.kind == OpKind::CNOT) {
      src = mesh_.attach_point(pl_.qubit_tile[op.operand(1)]);
    } else {
      // Nearest factory holding a magic state; the state is consumed now.
      std::optional<std::size_t> best;
      for (std::size_t f = 0; f < factory_ready_.size(); ++f) {
        if (factory_ready_[f] > now) continue;
        if (!best || mesh_.distance(port(f), dst) < mesh_.distance(port(*best), dst)) best = f;
      }
      if (!best) return false;
      factory_ready_[*best] = now + p_magic_;
      src = port(*best);
    }
    s_.op_start[v] = now;
    log(now, BraidEventKind::InitAncilla, v, -1);
    enqueue(v, 1, src, dst, now + 1);
    return true;
  }

  RouterId port(std::size_t f) const { return mesh_.attach_point(pl_.factory_tile[f]); }

  void enqueue(OpId op, int stage, RouterId src, RouterId dst, Cycle earliest) {
    BraidRequest r;
    r.op = op;
    r.stage = stage;
    r.src = src;
    r.dst = dst;
    r.earliest = earliest;
    r.waiting_since = earliest;
    r.seq = next_seq_++;
    r.length = mesh_.distance(src, dst);
    r.criticality = dag_.criticality[op];
    queue_.push_back(r);
  }

  bool open_braid(const BraidRequest& r, Cycle now) {
    std::optional<Route> path = route(mesh_, r.src, r.dst, RouteMode::DimensionOrdered);
    bool adaptive = false;
    if (!path && now - r.waiting_since >= t_adapt_) {
      path = route(mesh_, r.src, r.dst, RouteMode::Adaptive);
      adaptive = path.has_value();
    }
    if (!path) return false;
    BraidRecord b;
    b.id = static_cast<BraidId>(s_.braids.size());
    b.op = r.op;
    b.stage = r.stage;
    b.route = std::move(*path);
    b.open = now;
    b.close = now + d_;
    b.adaptive = adaptive;
    mesh_.claim(b.route, b.id);
    for (LinkId l : b.route.links) s_.link_busy[l] += d_;
    if (adaptive) ++s_.adaptive_reroutes;
    log(now, BraidEventKind::OpenBraid, b.op, b.id);
    closes_.push({b.close, s_.braids.size()});
    s_.braids.push_back(std::move(b));
    return true;
  }

  void log(Cycle t, BraidEventKind k, OpId op, BraidId braid) {
    if (cfg_.record_events) s_.events.push_back({t, k, op, braid});
  }

  const DepDag& dag_;
  const Placement& pl_;
  BraidSimConfig cfg_;
  RouterMesh mesh_;
  Cycle d_;
  Cycle t_adapt_ = 0, t_drop_ = 0, p_magic_ = 0;
  std::vector<Cycle> factory_ready_;
  std::vector<BraidRequest> queue_;
  std::priority_queue<std::pair<Cycle, std::size_t>, std::vector<std::pair<Cycle, std::size_t>>,
                      std::greater<>>
      closes_;
  std::uint64_t next_seq_ = 0;
  std::size_t finished_ = 0;
  Cycle serial_busy_until_ = 0;
  BraidSchedule s_;
};

}  // namespace detail

/// Cycle-level braid simulation on the placement's router mesh. The result
/// is verified against the DAG before it is returned.
inline BraidSchedule simulate_braids(const DepDag& dag, const Placement& placement,
                                     const CodeParams& params, const BraidSimConfig& cfg = {}) {
  BraidSchedule s = detail::BraidSimulator(dag, placement, params, cfg).run();
  verify_braid_schedule(dag, s);
  return s;
}

/// Grid and placement used by the braid simulator for a circuit: one tile per
/// qubit plus one port tile per magic state factory. Optimized placement for
/// policies 2-6, row-major otherwise.
inline Placement braid_placement(const LogicalCircuit& c, int policy, std::uint32_t num_factories,
                                 std::uint64_t seed) {
  const GridDims dims = squarest_grid(static_cast<std::int64_t>(c.num_qubits()) + num_factories);
  if (!policy_uses_optimized_layout(policy)) return naive_placement(c.num_qubits(), num_factories, dims);
  PlaceOptions opt;
  opt.seed = seed;
  return place(extract_interactions(c, num_factories), dims, opt);
}

inline nlohmann::json braid_schedule_to_json(const BraidSchedule& s) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : s.events) {
    nlohmann::json ev = {{"cycle", e.cycle}, {"kind", event_kind_name(e.kind)}, {"op", e.op}};
    if (e.braid >= 0) {
      ev["braid"] = e.braid;
      ev["route"] = s.braids[static_cast<std::size_t>(e.braid)].route.links;
    }
    events.push_back(std::move(ev));
  }
  nlohmann::json braids = nlohmann::json::array();
  for (const auto& b : s.braids)
    braids.push_back({{"id", b.id}, {"op", b.op}, {"stage", b.stage}, {"open", b.open},
                      {"close", b.close}, {"adaptive", b.adaptive}, {"routers", b.route.routers},
                      {"links", b.route.links}});
  return {{"policy", s.policy},
          {"d", s.d},
          {"tiles", {{"rows", s.tiles.rows}, {"cols", s.tiles.cols}}},
          {"schedule_length", s.schedule_length},
          {"critical_path", s.critical_path},
          {"utilization", s.utilization},
          {"drops", s.drops},
          {"adaptive_reroutes", s.adaptive_reroutes},
          {"events", events},
          {"braids", braids}};
}

inline std::string braid_stats_csv_header() {
  return "policy,schedule_length,critical_path,utilization,drops,adaptive_reroutes\n";
}

inline std::string braid_stats_csv_row(const BraidSchedule& s) {
  std::ostringstream o;
  o.precision(10);
  o << s.policy << ',' << s.schedule_length << ',' << s.critical_path << ',' << s.utilization << ','
    << s.drops << ',' << s.adaptive_reroutes << '\n';
  return o.str();
}

/// One row per braid: id, op, stage, open and close cycles, and the claimed
/// links separated by semicolons.
inline std::string braid_gantt_csv(const BraidSchedule& s) {
  std::ostringstream o;
  o << "braid,op,stage,open,close,links\n";
  for (const auto& b : s.braids) {
    o << b.id << ',' << b.op << ',' << b.stage << ',' << b.open << ',' << b.close << ',';
    for (std::size_t i = 0; i < b.route.links.size(); ++i) o << (i ? ";" : "") << b.route.links[i];
    o << '\n';
  }
  return o.str();
}

}  // namespace surfcomm
