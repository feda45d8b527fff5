#pragma once

// Exhaustive optimum for tiny braid scheduling instances. Independent of the
// simulator: it enumerates, at every decision epoch, which waiting braids to
// open and along which simple path (up to twice the Manhattan distance, the
// same route universe the router draws from), and which T op gets each
// magic state. Identical states reached along different orderings are
// explored once.

#include <algorithm>
#include <cstdlib>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "surfcomm/dag.hpp"
#include "surfcomm/layout.hpp"

namespace oracle {

using surfcomm::Cycle;
using surfcomm::OpId;
using surfcomm::OpKind;

struct Path {
  std::uint64_t routers = 0;
  std::uint64_t links = 0;
};

class BraidOracle {
 public:
  BraidOracle(const surfcomm::DepDag& dag, const surfcomm::Placement& pl, int d, Cycle p_magic)
      : dag_(dag), pl_(pl), d_(d), p_magic_(p_magic), rr_(pl.dims.rows + 1), rc_(pl.dims.cols + 1) {
    lat_ = surfcomm::LatencyModel::braided(d);
  }

  /// Minimum schedule length over every choice sequence.
  Cycle optimum() {
    State s;
    s.ops.assign(dag_.size(), {});
    s.factory_ready.assign(pl_.factory_tile.size(), 0);
    best_ = INT64_MAX;
    search(s);
    return best_;
  }

  std::uint64_t nodes() const { return nodes_; }

 private:
  enum Phase { NotStarted, Wait1, Open1, Wait2, Open2, Done };
  struct OpState {
    Phase phase = NotStarted;
    Cycle t = 0;  // earliest open while waiting, close time while open, finish when done
    int src = 0, dst = 0;
    Path path;
  };
  struct State {
    Cycle now = 0;
    std::vector<OpState> ops;
    std::vector<Cycle> factory_ready;
  };

  int router_of(surfcomm::Tile t) const { return t.row * rc_ + t.col; }

  // Link index for adjacent routers a < b in either orientation.
  int link_of(int a, int b) const {
    if (a > b) std::swap(a, b);
    if (b == a + 1) return (a / rc_) * (rc_ - 1) + (a % rc_);
    return rr_ * (rc_ - 1) + a;
  }

  const std::vector<Path>& paths(int src, int dst) {
    auto key = std::make_pair(src, dst);
    auto it = path_cache_.find(key);
    if (it != path_cache_.end()) return it->second;
    std::vector<Path> out;
    const int manhattan = std::abs(src / rc_ - dst / rc_) + std::abs(src % rc_ - dst % rc_);
    std::function<void(int, Path, int)> dfs = [&](int v, Path p, int len) {
      if (v == dst) {
        out.push_back(p);
        return;
      }
      if (len == 2 * manhattan) return;
      const int r = v / rc_, c = v % rc_;
      const int nb[4][2] = {{r, c + 1}, {r, c - 1}, {r + 1, c}, {r - 1, c}};
      for (auto [nr, nc] : nb) {
        if (nr < 0 || nr >= rr_ || nc < 0 || nc >= rc_) continue;
        const int u = nr * rc_ + nc;
        if (p.routers >> u & 1) continue;
        Path q = p;
        q.routers |= 1ull << u;
        q.links |= 1ull << link_of(v, u);
        dfs(u, q, len + 1);
      }
    };
    dfs(src, Path{1ull << src, 0}, 0);
    return path_cache_[key] = std::move(out);
  }

  Cycle lower_bound(const State& s) const {
    std::vector<Cycle> fin(dag_.size());
    Cycle lb = 0;
    for (OpId v = 0; v < dag_.size(); ++v) {
      const OpState& o = s.ops[v];
      switch (o.phase) {
        case Done: fin[v] = o.t; break;
        case Open2: fin[v] = o.t + 1; break;
        case Wait2: fin[v] = std::max(s.now, o.t) + d_ + 1; break;
        case Open1: fin[v] = o.t + 1 + d_ + 1; break;
        case Wait1: fin[v] = std::max(s.now, o.t) + d_ + 1 + d_ + 1; break;
        case NotStarted: {
          Cycle start = s.now;
          for (OpId p : dag_.preds[v]) start = std::max(start, fin[p]);
          fin[v] = start + lat_(dag_.ops[v].kind);
        }
      }
      lb = std::max(lb, fin[v]);
    }
    return lb;
  }

  void search(State s) {
    ++nodes_;
    // Closes at now.
    for (auto& o : s.ops) {
      if (o.phase == Open1 && o.t == s.now) {
        o.phase = Wait2;
        o.t = s.now + 1;
      } else if (o.phase == Open2 && o.t == s.now) {
        o.phase = Done;
        o.t = s.now + 1;
      }
    }
    // Starts that involve no choice.
    std::vector<OpId> want_magic;
    for (OpId v = 0; v < dag_.size(); ++v) {
      OpState& o = s.ops[v];
      if (o.phase != NotStarted) continue;
      bool ready = true;
      for (OpId p : dag_.preds[v])
        ready = ready && s.ops[p].phase == Done && s.ops[p].t <= s.now;
      if (!ready) continue;
      const auto& op = dag_.ops[v];
      if (op.kind == OpKind::CNOT) {
        o = {Wait1, s.now + 1, router_of(pl_.qubit_tile[op.operands[1]]),
             router_of(pl_.qubit_tile[op.operands[0]]), {}};
      } else if (op.kind == OpKind::T) {
        want_magic.push_back(v);
      } else {
        o.phase = Done;
        o.t = s.now + lat_(op.kind);
      }
    }
    // Hand out magic states: every assignment of available factories to
    // distinct waiting T ops (including leaving some unassigned).
    std::vector<int> free_f;
    for (std::size_t f = 0; f < s.factory_ready.size(); ++f)
      if (s.factory_ready[f] <= s.now) free_f.push_back(static_cast<int>(f));
    assign_magic(s, want_magic, free_f, 0);
  }

  void assign_magic(State& s, const std::vector<OpId>& want, const std::vector<int>& free_f,
                    std::size_t k) {
    if (k == free_f.size() || want.empty()) {
      choose_opens(s);
      return;
    }
    // Factory k stays idle.
    assign_magic(s, want, free_f, k + 1);
    for (std::size_t i = 0; i < want.size(); ++i) {
      const OpId v = want[i];
      if (s.ops[v].phase != NotStarted) continue;
      State t = s;
      const int f = free_f[k];
      t.factory_ready[static_cast<std::size_t>(f)] = s.now + p_magic_;
      t.ops[v] = {Wait1, s.now + 1, router_of(pl_.factory_tile[static_cast<std::size_t>(f)]),
                  router_of(pl_.qubit_tile[dag_.ops[v].operands[0]]), {}};
      assign_magic(t, want, free_f, k + 1);
    }
  }

  void choose_opens(State& s) {
    std::uint64_t held_r = 0, held_l = 0;
    std::vector<OpId> waiting;
    for (OpId v = 0; v < dag_.size(); ++v) {
      const OpState& o = s.ops[v];
      if (o.phase == Open1 || o.phase == Open2) held_r |= o.path.routers, held_l |= o.path.links;
      if ((o.phase == Wait1 || o.phase == Wait2) && o.t <= s.now) waiting.push_back(v);
    }
    open_subset(s, waiting, 0, held_r, held_l, false);
  }

  void open_subset(State& s, const std::vector<OpId>& waiting, std::size_t i, std::uint64_t hr,
                   std::uint64_t hl, bool opened_any) {
    if (i == waiting.size()) {
      advance(s, opened_any);
      return;
    }
    open_subset(s, waiting, i + 1, hr, hl, opened_any);
    const OpId v = waiting[i];
    const OpState o = s.ops[v];
    for (const Path& p : paths(o.src, o.dst)) {
      if ((p.routers & hr) || (p.links & hl)) continue;
      s.ops[v].phase = o.phase == Wait1 ? Open1 : Open2;
      s.ops[v].t = s.now + d_;
      s.ops[v].path = p;
      open_subset(s, waiting, i + 1, hr | p.routers, hl | p.links, true);
      s.ops[v] = o;
    }
  }

  void advance(State& s, bool opened_any) {
    (void)opened_any;
    Cycle finish = 0;
    bool all_done = true;
    Cycle next = INT64_MAX;
    bool waiting_now = false, want_magic = false;
    for (OpId v = 0; v < dag_.size(); ++v) {
      const OpState& o = s.ops[v];
      if (o.phase == Done) {
        finish = std::max(finish, o.t);
        if (o.t > s.now) next = std::min(next, o.t);
        continue;
      }
      all_done = false;
      if (o.phase == Open1 || o.phase == Open2) next = std::min(next, o.t);
      if (o.phase == Wait1 || o.phase == Wait2) {
        if (o.t > s.now) next = std::min(next, o.t);
        else waiting_now = true;
      }
      if (o.phase == NotStarted && dag_.ops[v].kind == OpKind::T) want_magic = true;
    }
    if (all_done) {
      best_ = std::min(best_, finish);
      return;
    }
    if (want_magic)
      for (Cycle f : s.factory_ready)
        if (f > s.now) next = std::min(next, f);
    if (next == INT64_MAX) {
      // Nothing will change on its own. Waiting braids that were not opened
      // now will never find a different state, and a T op that declined an
      // available magic state would wait forever.
      (void)waiting_now;
      return;
    }
    State t = s;
    t.now = next;
    if (lower_bound(t) >= best_) return;
    if (!seen_.insert(key(t)).second) return;
    search(std::move(t));
  }

  static std::vector<std::int64_t> key(const State& s) {
    std::vector<std::int64_t> k{s.now};
    for (const auto& o : s.ops) {
      k.push_back(o.phase);
      k.push_back(o.t);
      k.push_back(o.src);
      k.push_back(static_cast<std::int64_t>(o.path.links));
      k.push_back(static_cast<std::int64_t>(o.path.routers));
    }
    k.insert(k.end(), s.factory_ready.begin(), s.factory_ready.end());
    return k;
  }

  std::set<std::vector<std::int64_t>> seen_;
  const surfcomm::DepDag& dag_;
  const surfcomm::Placement& pl_;
  int d_;
  Cycle p_magic_;
  int rr_, rc_;
  surfcomm::LatencyModel lat_;
  Cycle best_ = INT64_MAX;
  std::uint64_t nodes_ = 0;
  std::map<std::pair<int, int>, std::vector<Path>> path_cache_;
};

}  // namespace oracle
