#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfcomm/dag.hpp"
#include "surfcomm/error.hpp"
#include "surfcomm/layout.hpp"
#include "surfcomm/qec.hpp"

namespace surfcomm {

/// Launch every EPR pair before the program starts.
inline constexpr Cycle kInfiniteWindow = std::numeric_limits<Cycle>::max();

inline std::string window_name(Cycle w) {
  return w == kInfiniteWindow ? "inf" : std::to_string(w);
}

struct TeleportConfig {
  int regions = 4;
  /// Ops per region per cycle; 0 means the number of data qubits.
  int capacity = 0;
  /// Cycles to swap an EPR half across one tile.
  Cycle s_swap = 2;
  /// Cycles from EPR delivery to a completed teleport.
  Cycle l_tp = 2;
  /// Parallel swap lanes per channel hop; 0 means the region side.
  int lanes = 0;
  /// Magic state production period per factory in logical cycles; negative
  /// means the braid side's 2d+3 syndrome rounds, rounded up to whole cycles.
  Cycle magic_period = -1;
  /// Cell side in tiles; 0 means the smallest square holding a region's qubits.
  int region_side = 0;
};

inline void to_json(nlohmann::json& j, const TeleportConfig& c) {
  j = {{"regions", c.regions}, {"capacity", c.capacity}, {"s_swap", c.s_swap},
       {"l_tp", c.l_tp},       {"lanes", c.lanes},       {"magic_period", c.magic_period},
       {"region_side", c.region_side}};
}

inline void from_json(const nlohmann::json& j, TeleportConfig& c) {
  const TeleportConfig def;
  c.regions = j.value("regions", def.regions);
  c.capacity = j.value("capacity", def.capacity);
  c.s_swap = j.value("s_swap", def.s_swap);
  c.l_tp = j.value("l_tp", def.l_tp);
  c.lanes = j.value("lanes", def.lanes);
  c.magic_period = j.value("magic_period", def.magic_period);
  c.region_side = j.value("region_side", def.region_side);
}

/// SIMD regions on the even squares of a checkerboard of cells, with memory
/// on the odd squares and a magic-state factory on a spare cell. Every cell
/// is region_side x region_side tiles, and EPR halves are swapped through
/// channels running along the cell borders.
struct SimdLayout {
  int regions = 0;
  GridDims cells;
  std::vector<Tile> cell_of;  // index `regions` is the factory cell
  int region_side = 1;
  int capacity = 1;
  int lanes = 1;
  int magic_factories = 1;
  Cycle s_swap = 2;
  Cycle l_tp = 2;
  Cycle magic_period = 3;
  std::vector<int> home;  // starting region of each qubit

  int factory_region() const { return regions; }
  int num_qubits() const { return static_cast<int>(home.size()); }

  int cell_distance(int a, int b) const { return manhattan(cell_of.at(a), cell_of.at(b)); }
  int hop_distance(int a, int b) const { return cell_distance(a, b) * region_side; }

  std::int64_t num_links() const {
    const std::int64_t edges = static_cast<std::int64_t>(cells.rows) * (cells.cols - 1) +
                               static_cast<std::int64_t>(cells.rows - 1) * cells.cols;
    return edges * region_side;
  }

  /// Channel hops from region a to region b, columns first. Each cell step
  /// crosses region_side hops.
  std::vector<std::int64_t> route(int a, int b) const {
    std::vector<std::int64_t> out;
    Tile at = cell_of.at(a);
    const Tile to = cell_of.at(b);
    auto push_edge = [&](std::int64_t edge, bool reverse) {
      for (int s = 0; s < region_side; ++s)
        out.push_back(edge * region_side + (reverse ? region_side - 1 - s : s));
    };
    while (at.col != to.col) {
      const int next = at.col + (to.col > at.col ? 1 : -1);
      push_edge(static_cast<std::int64_t>(at.row) * (cells.cols - 1) + std::min(at.col, next),
                next < at.col);
      at.col = next;
    }
    while (at.row != to.row) {
      const int next = at.row + (to.row > at.row ? 1 : -1);
      push_edge(static_cast<std::int64_t>(cells.rows) * (cells.cols - 1) +
                    static_cast<std::int64_t>(std::min(at.row, next)) * cells.cols + at.col,
                next < at.row);
      at.row = next;
    }
    return out;
  }
};

inline SimdLayout make_simd_layout(std::uint32_t num_qubits, int d, std::int64_t magic_factories,
                                   const TeleportConfig& cfg = {}) {
  if (cfg.regions < 1) throw InvalidArgument("teleport: need at least one SIMD region");
  if (num_qubits == 0) throw InvalidArgument("teleport: no data qubits");
  if (magic_factories < 1) throw InvalidArgument("teleport: need at least one magic-state factory");
  if (cfg.s_swap < 1 || cfg.l_tp < 0) throw InvalidArgument("teleport: bad swap or teleport latency");
  SimdLayout L;
  L.regions = cfg.regions;
  const int k = cfg.regions;
  const int rows = static_cast<int>(std::ceil(std::sqrt(2.0 * k) - 1e-9));
  const int cols = (2 * k + rows - 1) / rows;
  L.cells = {rows, cols};
  std::vector<Tile> even, odd;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) ((r + c) % 2 == 0 ? even : odd).push_back({r, c});
  L.cell_of.assign(even.begin(), even.begin() + k);
  // The factory takes a spare SIMD-coloured cell if one exists, else the last memory cell.
  L.cell_of.push_back(static_cast<int>(even.size()) > k ? even.back() : odd.back());

  const auto per_region = (static_cast<std::int64_t>(num_qubits) + k - 1) / k;
  L.region_side = cfg.region_side > 0
                      ? cfg.region_side
                      : std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(per_region)) - 1e-9)));
  L.capacity = cfg.capacity > 0 ? cfg.capacity : static_cast<int>(num_qubits);
  L.lanes = cfg.lanes > 0 ? cfg.lanes : L.region_side;
  L.s_swap = cfg.s_swap;
  L.l_tp = cfg.l_tp;
  L.magic_period = cfg.magic_period >= 0 ? cfg.magic_period : (2 * d + 3 + d - 1) / d;
  L.magic_factories = static_cast<int>(magic_factories);
  L.home.resize(num_qubits);
  for (std::uint32_t q = 0; q < num_qubits; ++q)
    L.home[q] = static_cast<int>(static_cast<std::int64_t>(q) / per_region);
  return L;
}

enum class TeleportKind { Data, Magic };

struct Teleport {
  std::uint32_t id = 0;
  TeleportKind kind = TeleportKind::Data;
  OpId op = 0;
  QubitId qubit = 0;
  int src = 0;
  int dst = 0;
  int factory = -1;  // magic teleports only
  Cycle state_ready = 0;  // when the factory has the magic state ready
  Cycle needed_at = 0;
};

struct SimdBatch {
  Cycle cycle = 0;
  int region = 0;
  OpKind kind = OpKind::H;
  std::vector<OpId> ops;
};

/// The schedule assuming every EPR pair is already in place.
struct SimdSchedule {
  std::vector<Cycle> op_cycle;
  std::vector<int> op_region;
  std::vector<std::vector<std::uint32_t>> op_teleports;
  std::vector<Teleport> teleports;
  std::vector<SimdBatch> batches;  // ordered by cycle, then region
  Cycle schedule_length = 0;

  std::size_t data_teleports() const {
    return static_cast<std::size_t>(std::count_if(teleports.begin(), teleports.end(), [](const Teleport& t) {
      return t.kind == TeleportKind::Data;
    }));
  }
  std::size_t magic_teleports() const { return teleports.size() - data_teleports(); }
};

/// List-schedules the DAG onto the SIMD regions, one logical cycle per op.
/// A 1-qubit op runs where its qubit is; a CNOT runs where its first operand
/// is and teleports the second there if needed; every T pulls a magic state
/// from the factory cell. Each region runs one op kind per cycle: the kind
/// with the most ready ops, up to capacity.
inline SimdSchedule schedule_simd(const DepDag& dag, const SimdLayout& L) {
  if (L.regions < 1) throw InvalidArgument("teleport: need at least one SIMD region");
  if (static_cast<std::uint32_t>(L.num_qubits()) < dag.num_qubits)
    throw InvalidArgument("teleport: layout has fewer qubits than the circuit");
  const std::size_t n = dag.size();
  SimdSchedule s;
  s.op_cycle.assign(n, -1);
  s.op_region.assign(n, -1);
  s.op_teleports.assign(n, {});

  std::vector<int> loc(L.home.begin(), L.home.end());
  std::vector<std::size_t> missing(n);
  std::vector<Cycle> dep_ready(n, 0), exec_ready(n, 0);
  std::vector<Cycle> factory_free(static_cast<std::size_t>(L.magic_factories), 0);
  std::vector<std::vector<OpId>> waiting(static_cast<std::size_t>(L.regions));
  std::vector<OpId> newly;
  for (OpId i = 0; i < n; ++i) {
    missing[i] = dag.preds[i].size();
    if (missing[i] == 0) newly.push_back(i);
  }

  // Bind an op to a region once its operands' positions are final.
  auto admit = [&](OpId i) {
    const LogicalOp& op = dag.ops[i];
    const int region = loc[op.operand(0)];
    s.op_region[i] = region;
    Cycle ready = dep_ready[i];
    if (op.kind == OpKind::CNOT && loc[op.operand(1)] != region) {
      Teleport t;
      t.id = static_cast<std::uint32_t>(s.teleports.size());
      t.kind = TeleportKind::Data;
      t.op = i;
      t.qubit = op.operand(1);
      t.src = loc[op.operand(1)];
      t.dst = region;
      t.needed_at = dep_ready[i];
      loc[op.operand(1)] = region;
      ready = std::max(ready, t.needed_at + L.l_tp);
      s.op_teleports[i].push_back(t.id);
      s.teleports.push_back(t);
    }
    if (op.kind == OpKind::T) {
      auto f = static_cast<std::size_t>(
          std::min_element(factory_free.begin(), factory_free.end()) - factory_free.begin());
      Teleport t;
      t.id = static_cast<std::uint32_t>(s.teleports.size());
      t.kind = TeleportKind::Magic;
      t.op = i;
      t.qubit = op.operand(0);
      t.src = L.factory_region();
      t.dst = region;
      t.factory = static_cast<int>(f);
      t.state_ready = factory_free[f];
      t.needed_at = std::max(dep_ready[i], factory_free[f]);
      factory_free[f] = t.needed_at + L.magic_period;
      ready = std::max(ready, t.needed_at + L.l_tp);
      s.op_teleports[i].push_back(t.id);
      s.teleports.push_back(t);
    }
    exec_ready[i] = ready;
    waiting[static_cast<std::size_t>(region)].push_back(i);
  };

  std::size_t done = 0;
  Cycle now = 0;
  while (done < n) {
    std::sort(newly.begin(), newly.end());
    for (OpId i : newly) admit(i);
    if (!newly.empty())
      for (auto& w : waiting) std::sort(w.begin(), w.end());
    newly.clear();

    std::vector<OpId> finished;
    for (int r = 0; r < L.regions; ++r) {
      auto& w = waiting[static_cast<std::size_t>(r)];
      std::array<std::size_t, kAllOpKinds.size()> count{};
      for (OpId i : w)
        if (exec_ready[i] <= now) ++count[static_cast<std::size_t>(dag.ops[i].kind)];
      const auto best = static_cast<std::size_t>(std::max_element(count.begin(), count.end()) - count.begin());
      if (count[best] == 0) continue;
      SimdBatch b;
      b.cycle = now;
      b.region = r;
      b.kind = kAllOpKinds[best];
      std::vector<OpId> keep;
      for (OpId i : w) {  // w stays sorted by op id
        if (exec_ready[i] <= now && dag.ops[i].kind == b.kind &&
            b.ops.size() < static_cast<std::size_t>(L.capacity)) {
          b.ops.push_back(i);
          s.op_cycle[i] = now;
        } else {
          keep.push_back(i);
        }
      }
      w.swap(keep);
      finished.insert(finished.end(), b.ops.begin(), b.ops.end());
      s.batches.push_back(std::move(b));
    }
    for (OpId i : finished) {
      ++done;
      s.schedule_length = std::max(s.schedule_length, now + 1);
      for (OpId v : dag.succs[i]) {
        dep_ready[v] = std::max(dep_ready[v], now + 1);
        if (--missing[v] == 0) newly.push_back(v);
      }
    }
    if (done == n) break;
    Cycle next = now + 1;
    if (newly.empty()) {
      next = std::numeric_limits<Cycle>::max();
      for (const auto& w : waiting)
        for (OpId i : w) next = std::min(next, exec_ready[i]);
      if (next == std::numeric_limits<Cycle>::max())
        throw SimulationError("teleport: no runnable op and no pending work");
      next = std::max(next, now + 1);
    }
    now = next;
  }
  return s;
}

enum class EprState { Planned, InFlight, Delivered, Consumed };

struct EprRequest {
  std::uint32_t teleport = 0;
  int src = 0;
  int dst = 0;
  Cycle needed_at = 0;
  Cycle launch_at = 0;
  Cycle arrival = 0;
  Cycle consumed_at = 0;
  int hops = 0;

  EprState state_at(Cycle t) const {
    if (t < launch_at) return EprState::Planned;
    if (t < arrival) return EprState::InFlight;
    if (t < consumed_at) return EprState::Delivered;
    return EprState::Consumed;
  }
};

/// One EPR half crossing one channel hop on one lane during [enter, enter + s_swap).
struct HopClaim {
  std::int64_t link = 0;
  int lane = 0;
  Cycle enter = 0;
  std::uint32_t teleport = 0;
};

struct TeleportSchedule {
  Cycle window = 0;
  Cycle schedule_length = 0;
  std::int64_t epr_high_water = 0;
  Cycle stall_cycles = 0;
  std::size_t teleports = 0;
  std::vector<EprRequest> requests;
  std::vector<Cycle> op_cycle;
  std::vector<Cycle> link_busy;  // cycles each channel hop spent carrying EPRs
  std::vector<HopClaim> claims;
};

/// Launches every teleport's EPR pair W cycles before it is needed and swaps
/// it hop by hop to its destination, then replays the SIMD schedule with
/// teleports waiting for their pairs. "Needed" is the cycle the teleport
/// could start in the replayed schedule, and EPRs reserve channel hops in
/// replay order.
inline TeleportSchedule plan_epr_distribution(const DepDag& dag, const SimdSchedule& simd,
                                              const SimdLayout& L, Cycle window) {
  if (window < 0) throw InvalidArgument("teleport: window must be non-negative");
  TeleportSchedule out;
  out.window = window;
  out.teleports = simd.teleports.size();
  out.requests.resize(simd.teleports.size());
  out.link_busy.assign(static_cast<std::size_t>(L.num_links()), 0);
  const bool infinite = window == kInfiniteWindow;
  constexpr Cycle kPrologue = std::numeric_limits<Cycle>::min() / 4;

  std::vector<std::vector<Cycle>> lane_free;
  if (!infinite)
    lane_free.assign(static_cast<std::size_t>(L.num_links()),
                     std::vector<Cycle>(static_cast<std::size_t>(L.lanes), kPrologue));

  // Replay the batches in their original order. Each EPR is launched W cycles
  // before its teleport could start in the replayed schedule, so delays carry
  // forward instead of being absorbed by launches planned against the ideal.
  const std::size_t n = dag.size();
  out.op_cycle.assign(n, 0);
  std::vector<Cycle> region_last(static_cast<std::size_t>(L.regions), -1);
  for (const SimdBatch& b : simd.batches) {
    Cycle at = std::max(b.cycle, region_last[static_cast<std::size_t>(b.region)] + 1);
    for (OpId i : b.ops) {
      Cycle dep = 0;
      for (OpId p : dag.preds[i]) dep = std::max(dep, out.op_cycle[p] + 1);
      Cycle ready = dep;
      for (std::uint32_t id : simd.op_teleports[i]) {
        const Teleport& t = simd.teleports[id];
        const Cycle base = std::max(dep, t.state_ready);
        EprRequest& r = out.requests[id];
        r.teleport = id;
        r.src = t.src;
        r.dst = t.dst;
        r.needed_at = base;
        const auto path = L.route(t.src, t.dst);
        r.hops = static_cast<int>(path.size());
        for (std::int64_t link : path) out.link_busy[static_cast<std::size_t>(link)] += L.s_swap;
        if (infinite) {
          r.launch_at = r.arrival = kPrologue;
        } else {
          r.launch_at = base - window;
          Cycle hop = r.launch_at;
          for (std::int64_t link : path) {
            auto& lanes = lane_free[static_cast<std::size_t>(link)];
            const auto lane = static_cast<std::size_t>(std::min_element(lanes.begin(), lanes.end()) - lanes.begin());
            const Cycle enter = std::max(hop, lanes[lane]);
            lanes[lane] = enter + L.s_swap;
            hop = enter + L.s_swap;
            out.claims.push_back({link, static_cast<int>(lane), enter, id});
          }
          r.arrival = hop;
        }
        const Cycle start = std::max(base, r.arrival);
        out.stall_cycles += start - base;
        r.consumed_at = start;
        ready = std::max(ready, start + L.l_tp);
      }
      at = std::max(at, ready);
    }
    for (OpId i : b.ops) out.op_cycle[i] = at;
    region_last[static_cast<std::size_t>(b.region)] = at;
    out.schedule_length = std::max(out.schedule_length, at + 1);
  }

  // Peak number of pairs alive between launch and consumption.
  std::vector<std::pair<Cycle, int>> edges;
  edges.reserve(2 * out.requests.size());
  for (const auto& r : out.requests) {
    edges.emplace_back(r.launch_at, +1);
    edges.emplace_back(r.consumed_at, -1);
  }
  std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  });
  std::int64_t live = 0;
  for (const auto& e : edges) {
    live += e.second;
    out.epr_high_water = std::max(out.epr_high_water, live);
  }
  return out;
}

/// Checks dependencies, region batching, EPR timing and channel exclusivity.
/// Throws SimulationError on the first violation.
inline void verify_teleport_schedule(const DepDag& dag, const SimdSchedule& simd, const SimdLayout& L,
                                     const TeleportSchedule& s) {
  auto fail = [](const std::string& m) { throw SimulationError("teleport schedule: " + m); };
  for (OpId i = 0; i < dag.size(); ++i) {
    for (OpId p : dag.preds[i])
      if (s.op_cycle[p] >= s.op_cycle[i]) fail("op " + std::to_string(i) + " runs before a predecessor");
    for (std::uint32_t id : simd.op_teleports[i]) {
      const auto& r = s.requests[id];
      if (r.consumed_at < r.arrival) fail("teleport consumed before its EPR arrived");
      if (r.consumed_at + L.l_tp > s.op_cycle[i]) fail("op runs before its teleport completes");
      if (s.window != kInfiniteWindow) {
        if (r.arrival - r.launch_at < static_cast<Cycle>(r.hops) * L.s_swap) fail("EPR faster than the swap chain");
        if (r.launch_at != r.needed_at - s.window) fail("EPR launched off its window");
      }
    }
  }
  for (const SimdBatch& b : simd.batches)
    if (b.ops.size() > static_cast<std::size_t>(L.capacity)) fail("region capacity exceeded");
  std::vector<std::vector<Cycle>> region_cycles(static_cast<std::size_t>(L.regions));
  for (const SimdBatch& b : simd.batches)
    region_cycles[static_cast<std::size_t>(b.region)].push_back(s.op_cycle[b.ops.front()]);
  for (auto& v : region_cycles) {
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end()) fail("two batches share a region-cycle");
  }
  auto claims = s.claims;
  std::sort(claims.begin(), claims.end(), [](const HopClaim& a, const HopClaim& b) {
    if (a.link != b.link) return a.link < b.link;
    if (a.lane != b.lane) return a.lane < b.lane;
    return a.enter < b.enter;
  });
  for (std::size_t i = 1; i < claims.size(); ++i)
    if (claims[i].link == claims[i - 1].link && claims[i].lane == claims[i - 1].lane &&
        claims[i].enter < claims[i - 1].enter + L.s_swap)
      fail("channel hop carries two EPRs in the same cycle");
}

struct WindowPoint {
  Cycle window = 0;
  std::int64_t epr_high_water = 0;
  Cycle schedule_length = 0;
  Cycle stall_cycles = 0;
};

inline std::vector<WindowPoint> sweep_window(const DepDag& dag, const SimdSchedule& simd,
                                             const SimdLayout& L, const std::vector<Cycle>& windows) {
  if (windows.empty()) throw InvalidArgument("sweep_window: empty window list");
  std::vector<WindowPoint> out;
  out.reserve(windows.size());
  for (Cycle w : windows) {
    const auto s = plan_epr_distribution(dag, simd, L, w);
    out.push_back({w, s.epr_high_water, s.schedule_length, s.stall_cycles});
  }
  return out;
}

/// 0, 1, 2, 4, ... up to the first power of two past `max_finite`, then infinity.
inline std::vector<Cycle> default_windows(Cycle max_finite) {
  std::vector<Cycle> w{0};
  for (Cycle x = 1;; x *= 2) {
    w.push_back(x);
    if (x >= max_finite) break;
  }
  w.push_back(kInfiniteWindow);
  return w;
}

/// Largest swap-chain transit in the schedule, a natural upper end for window sweeps.
inline Cycle max_transit(const SimdSchedule& simd, const SimdLayout& L) {
  Cycle m = 0;
  for (const auto& t : simd.teleports) m = std::max(m, L.hop_distance(t.src, t.dst) * L.s_swap);
  return m;
}

/// Smallest swept window whose total stall is within `fraction` of the
/// infinite-window schedule length. Falls back to the infinite window.
inline Cycle find_knee(const std::vector<WindowPoint>& points, double fraction = 0.05) {
  const WindowPoint* base = nullptr;
  for (const auto& p : points)
    if (p.window == kInfiniteWindow) base = &p;
  if (!base) throw InvalidArgument("find_knee: sweep lacks the infinite window");
  Cycle best = kInfiniteWindow;
  for (const auto& p : points)
    if (static_cast<double>(p.stall_cycles) <= fraction * static_cast<double>(base->schedule_length))
      best = std::min(best, p.window);
  return best;
}

inline std::string window_sweep_csv(const std::vector<WindowPoint>& points) {
  std::ostringstream o;
  o << "W,epr_high_water,schedule_length,stall_cycles\n";
  for (const auto& p : points)
    o << window_name(p.window) << ',' << p.epr_high_water << ',' << p.schedule_length << ','
      << p.stall_cycles << '\n';
  return o.str();
}

inline nlohmann::json teleport_trace_json(const SimdSchedule& simd, const SimdLayout& L,
                                          const TeleportSchedule& s) {
  auto cyc = [&](Cycle c) -> nlohmann::json {
    if (s.window == kInfiniteWindow && c < 0) return "prologue";
    return c;
  };
  nlohmann::json tps = nlohmann::json::array();
  for (const auto& t : simd.teleports) {
    const auto& r = s.requests[t.id];
    tps.push_back({{"id", t.id},
                   {"kind", t.kind == TeleportKind::Data ? "data" : "magic"},
                   {"op", t.op},
                   {"qubit", t.qubit},
                   {"src", t.src},
                   {"dst", t.dst},
                   {"hops", r.hops},
                   {"needed_at", r.needed_at},
                   {"launch_at", cyc(r.launch_at)},
                   {"arrival", cyc(r.arrival)},
                   {"consumed_at", r.consumed_at}});
  }
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : L.cell_of) cells.push_back({c.row, c.col});
  return {{"window", window_name(s.window)},
          {"schedule_length", s.schedule_length},
          {"ideal_length", simd.schedule_length},
          {"epr_high_water", s.epr_high_water},
          {"stall_cycles", s.stall_cycles},
          {"layout",
           {{"regions", L.regions},
            {"cell_rows", L.cells.rows},
            {"cell_cols", L.cells.cols},
            {"cells", cells},
            {"region_side", L.region_side},
            {"lanes", L.lanes},
            {"capacity", L.capacity}}},
          {"teleports", tps},
          {"op_cycle", s.op_cycle},
          {"link_busy", s.link_busy}};
}

}  // namespace surfcomm
