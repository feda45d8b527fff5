#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <optional>
#include <vector>

#include "surfcomm/error.hpp"
#include "surfcomm/layout.hpp"

namespace surfcomm {

using RouterId = std::uint32_t;
using LinkId = std::uint32_t;
using BraidId = std::int64_t;

inline constexpr BraidId kFree = -1;

struct Route {
  std::vector<RouterId> routers;  // src first, dst last
  std::vector<LinkId> links;      // links[i] joins routers[i] and routers[i+1]

  std::size_t length() const { return links.size(); }
  friend bool operator==(const Route&, const Route&) = default;
};

enum class RouteMode { DimensionOrdered, Adaptive };

/// Router grid at the corners of a rows x cols tile grid, with claim state
/// on every router and link.
class RouterMesh {
 public:
  RouterMesh() = default;
  explicit RouterMesh(GridDims tiles)
      : rr_(tiles.rows + 1),
        rc_(tiles.cols + 1),
        router_owner_(static_cast<std::size_t>(rr_ * rc_), kFree),
        link_owner_(static_cast<std::size_t>(num_links_for(tiles)), kFree) {}

  static std::int64_t num_links_for(GridDims t) {
    return static_cast<std::int64_t>(t.rows + 1) * t.cols +
           static_cast<std::int64_t>(t.rows) * (t.cols + 1);
  }

  int router_rows() const { return rr_; }
  int router_cols() const { return rc_; }
  std::size_t num_routers() const { return router_owner_.size(); }
  std::size_t num_links() const { return link_owner_.size(); }

  RouterId router(int r, int c) const { return static_cast<RouterId>(r * rc_ + c); }
  int row_of(RouterId v) const { return static_cast<int>(v) / rc_; }
  int col_of(RouterId v) const { return static_cast<int>(v) % rc_; }
  /// Braids attach at a tile's north-west corner.
  RouterId attach_point(Tile t) const { return router(t.row, t.col); }

  int distance(RouterId a, RouterId b) const {
    return std::abs(row_of(a) - row_of(b)) + std::abs(col_of(a) - col_of(b));
  }

  /// Link between two adjacent routers. Horizontal links come first, row by
  /// row, then vertical links.
  LinkId link_between(RouterId a, RouterId b) const {
    const int ra = row_of(a), ca = col_of(a), rb = row_of(b), cb = col_of(b);
    if (ra == rb && std::abs(ca - cb) == 1)
      return static_cast<LinkId>(ra * (rc_ - 1) + std::min(ca, cb));
    if (ca == cb && std::abs(ra - rb) == 1)
      return static_cast<LinkId>(rr_ * (rc_ - 1) + std::min(ra, rb) * rc_ + ca);
    throw InvalidArgument("routers are not adjacent");
  }

  BraidId router_owner(RouterId v) const { return router_owner_[v]; }
  BraidId link_owner(LinkId l) const { return link_owner_[l]; }

  bool route_free(const Route& r) const {
    for (RouterId v : r.routers)
      if (router_owner_[v] != kFree) return false;
    for (LinkId l : r.links)
      if (link_owner_[l] != kFree) return false;
    return true;
  }

  void claim(const Route& r, BraidId owner) {
    if (!route_free(r)) throw SimulationError("claim on a busy route");
    for (RouterId v : r.routers) router_owner_[v] = owner;
    for (LinkId l : r.links) link_owner_[l] = owner;
  }

  void release(const Route& r, BraidId owner) {
    for (RouterId v : r.routers) {
      if (router_owner_[v] != owner) throw SimulationError("release of a router not owned");
      router_owner_[v] = kFree;
    }
    for (LinkId l : r.links) {
      if (link_owner_[l] != owner) throw SimulationError("release of a link not owned");
      link_owner_[l] = kFree;
    }
  }

  /// The column-first then row path, regardless of claims.
  Route xy_path(RouterId src, RouterId dst) const {
    Route r;
    int row = row_of(src), col = col_of(src);
    r.routers.push_back(src);
    auto step = [&](int nr, int nc) {
      RouterId next = router(nr, nc);
      r.links.push_back(link_between(r.routers.back(), next));
      r.routers.push_back(next);
      row = nr;
      col = nc;
    };
    while (col != col_of(dst)) step(row, col + (col_of(dst) > col ? 1 : -1));
    while (row != row_of(dst)) step(row + (row_of(dst) > row ? 1 : -1), col);
    return r;
  }

  /// Shortest path over free routers and links by breadth-first search, or
  /// nothing if none exists within max_len links.
  std::optional<Route> shortest_free_path(RouterId src, RouterId dst, std::size_t max_len) const {
    if (router_owner_[src] != kFree || router_owner_[dst] != kFree) return std::nullopt;
    constexpr RouterId kUnseen = UINT32_MAX;
    std::vector<RouterId> parent(num_routers(), kUnseen);
    std::vector<std::uint32_t> depth(num_routers(), 0);
    std::deque<RouterId> q{src};
    parent[src] = src;
    // Neighbour order: prefer moves that reduce the column gap, then row gap.
    while (!q.empty()) {
      RouterId v = q.front();
      q.pop_front();
      if (v == dst) break;
      if (depth[v] >= max_len) continue;
      const int r = row_of(v), c = col_of(v);
      const int dc = col_of(dst) > c ? 1 : -1, dr = row_of(dst) > r ? 1 : -1;
      const int cand[4][2] = {{r, c + dc}, {r + dr, c}, {r, c - dc}, {r - dr, c}};
      for (auto [nr, nc] : cand) {
        if (nr < 0 || nr >= rr_ || nc < 0 || nc >= rc_) continue;
        RouterId u = router(nr, nc);
        if (parent[u] != kUnseen || router_owner_[u] != kFree) continue;
        if (link_owner_[link_between(v, u)] != kFree) continue;
        parent[u] = v;
        depth[u] = depth[v] + 1;
        q.push_back(u);
      }
    }
    if (parent[dst] == kUnseen) return std::nullopt;
    Route out;
    for (RouterId v = dst; v != src; v = parent[v]) out.routers.push_back(v);
    out.routers.push_back(src);
    std::reverse(out.routers.begin(), out.routers.end());
    for (std::size_t i = 0; i + 1 < out.routers.size(); ++i)
      out.links.push_back(link_between(out.routers[i], out.routers[i + 1]));
    return out;
  }

 private:
  int rr_ = 0;
  int rc_ = 0;
  std::vector<BraidId> router_owner_;
  std::vector<BraidId> link_owner_;
};

/// Dimension-ordered: the XY path if entirely free. Adaptive: the shortest
/// free path of at most twice the Manhattan distance.
inline std::optional<Route> route(const RouterMesh& mesh, RouterId src, RouterId dst,
                                  RouteMode mode) {
  if (src == dst) throw InvalidArgument("route: source and destination coincide");
  if (mode == RouteMode::DimensionOrdered) {
    Route r = mesh.xy_path(src, dst);
    if (mesh.route_free(r)) return r;
    return std::nullopt;
  }
  return mesh.shortest_free_path(src, dst, 2 * static_cast<std::size_t>(mesh.distance(src, dst)));
}

}  // namespace surfcomm
