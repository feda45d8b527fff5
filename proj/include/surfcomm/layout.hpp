#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfcomm/circuit.hpp"
#include "surfcomm/error.hpp"

namespace surfcomm {

struct GridDims {
  int rows = 0;
  int cols = 0;

  std::int64_t area() const { return static_cast<std::int64_t>(rows) * cols; }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Squarest rows x cols grid with at least `tiles` tiles (cols >= rows).
inline GridDims squarest_grid(std::int64_t tiles) {
  if (tiles <= 0) return {1, 1};
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(tiles)) - 1e-9));
  const int rows = static_cast<int>((tiles + cols - 1) / cols);
  return {rows, cols};
}

struct Tile {
  int row = 0;
  int col = 0;

  friend bool operator==(const Tile&, const Tile&) = default;
  friend auto operator<=>(const Tile&, const Tile&) = default;
};

inline int manhattan(Tile a, Tile b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

/// Weighted qubit interaction graph. Vertices [0, num_qubits) are logical
/// qubits, the following num_factories vertices are factory super-vertices.
class InteractionGraph {
 public:
  InteractionGraph() = default;
  InteractionGraph(std::uint32_t num_qubits, std::uint32_t num_factories)
      : num_qubits_(num_qubits), num_factories_(num_factories), adj_(num_qubits + num_factories) {}

  std::uint32_t num_qubits() const { return num_qubits_; }
  std::uint32_t num_factories() const { return num_factories_; }
  std::uint32_t num_vertices() const { return num_qubits_ + num_factories_; }
  std::uint32_t factory_vertex(std::uint32_t f) const { return num_qubits_ + f; }
  bool is_factory(std::uint32_t v) const { return v >= num_qubits_; }

  void add_weight(std::uint32_t u, std::uint32_t v, double w) {
    if (u == v) throw InvalidArgument("interaction graph: self loop");
    if (u >= num_vertices() || v >= num_vertices())
      throw InvalidArgument("interaction graph: vertex out of range");
    auto key = std::minmax(u, v);
    weights_[{key.first, key.second}] += w;
    bump(u, v, w);
    bump(v, u, w);
  }

  double weight(std::uint32_t u, std::uint32_t v) const {
    auto key = std::minmax(u, v);
    auto it = weights_.find({key.first, key.second});
    return it == weights_.end() ? 0.0 : it->second;
  }

  /// Edges with u < v in lexicographic order.
  const std::map<std::pair<std::uint32_t, std::uint32_t>, double>& edges() const {
    return weights_;
  }
  const std::vector<std::pair<std::uint32_t, double>>& neighbors(std::uint32_t v) const {
    return adj_[v];
  }

 private:
  void bump(std::uint32_t u, std::uint32_t v, double w) {
    for (auto& [n, x] : adj_[u])
      if (n == v) {
        x += w;
        return;
      }
    adj_[u].emplace_back(v, w);
  }

  std::uint32_t num_qubits_ = 0;
  std::uint32_t num_factories_ = 0;
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> weights_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj_;
};

/// CNOT counts between qubit pairs; each qubit's T count is shared evenly
/// among the factory super-vertices.
inline InteractionGraph extract_interactions(const LogicalCircuit& c,
                                             std::uint32_t num_factories) {
  InteractionGraph g(c.num_qubits(), num_factories);
  std::vector<std::uint32_t> t_count(c.num_qubits(), 0);
  for (const LogicalOp& op : c.ops()) {
    if (op.kind == OpKind::CNOT) g.add_weight(op.operands[0], op.operands[1], 1.0);
    if (op.kind == OpKind::T) ++t_count[op.operands[0]];
  }
  for (QubitId q = 0; q < c.num_qubits(); ++q) {
    if (t_count[q] == 0 || num_factories == 0) continue;
    const double share = static_cast<double>(t_count[q]) / num_factories;
    for (std::uint32_t f = 0; f < num_factories; ++f) g.add_weight(q, g.factory_vertex(f), share);
  }
  return g;
}

/// Tile assignment for qubits and factories.
struct Placement {
  GridDims dims;
  std::vector<Tile> qubit_tile;
  std::vector<Tile> factory_tile;

  Tile tile_of(const InteractionGraph& g, std::uint32_t v) const {
    return g.is_factory(v) ? factory_tile[v - g.num_qubits()] : qubit_tile[v];
  }

  bool in_bounds(Tile t) const {
    return t.row >= 0 && t.row < dims.rows && t.col >= 0 && t.col < dims.cols;
  }

  /// True when every tile is inside the grid and no tile holds two vertices.
  bool valid() const {
    std::set<Tile> seen;
    for (const auto* list : {&qubit_tile, &factory_tile})
      for (Tile t : *list)
        if (!in_bounds(t) || !seen.insert(t).second) return false;
    return true;
  }

  friend bool operator==(const Placement&, const Placement&) = default;
};

inline double placement_cost(const InteractionGraph& g, const Placement& p) {
  if (p.qubit_tile.size() != g.num_qubits() || p.factory_tile.size() != g.num_factories())
    throw InvalidArgument("placement_cost: placement does not cover every vertex");
  double cost = 0.0;
  for (const auto& [uv, w] : g.edges())
    cost += w * manhattan(p.tile_of(g, uv.first), p.tile_of(g, uv.second));
  return cost;
}

inline bool is_boundary(GridDims dims, Tile t) {
  return t.row == 0 || t.col == 0 || t.row == dims.rows - 1 || t.col == dims.cols - 1;
}

/// Row-major qubits, factories on the last tiles (which are boundary tiles).
inline Placement naive_placement(std::uint32_t num_qubits, std::uint32_t num_factories,
                                 GridDims dims) {
  if (dims.area() < static_cast<std::int64_t>(num_qubits) + num_factories)
    throw InvalidArgument("naive_placement: grid too small");
  Placement p;
  p.dims = dims;
  for (std::uint32_t q = 0; q < num_qubits; ++q)
    p.qubit_tile.push_back({static_cast<int>(q) / dims.cols, static_cast<int>(q) % dims.cols});
  for (std::uint32_t f = 0; f < num_factories; ++f) {
    const auto idx = dims.area() - 1 - f;
    p.factory_tile.push_back({static_cast<int>(idx / dims.cols), static_cast<int>(idx % dims.cols)});
  }
  return p;
}

struct PlaceOptions {
  std::uint64_t seed = 1;
  int restarts = 8;
  /// Pairwise swap descent after bisection.
  bool refine = true;
  /// Swap partners are searched within this Manhattan radius on large grids.
  int refine_radius = 3;
};

namespace detail {

struct Rect {
  int r0, c0, rows, cols;
  std::int64_t area() const { return static_cast<std::int64_t>(rows) * cols; }
  double cr() const { return r0 + (rows - 1) / 2.0; }
  double cc() const { return c0 + (cols - 1) / 2.0; }
};

class Bisector {
 public:
  Bisector(const InteractionGraph& g, GridDims dims, const PlaceOptions& opt)
      : g_(g), opt_(opt), cr_(g.num_vertices()), cc_(g.num_vertices()), rng_(opt.seed) {
    tile_.resize(g.num_vertices());
    const Rect all{0, 0, dims.rows, dims.cols};
    for (std::uint32_t v = 0; v < g.num_vertices(); ++v) {
      cr_[v] = all.cr();
      cc_[v] = all.cc();
    }
  }

  std::vector<Tile> run(GridDims dims) {
    std::vector<std::uint32_t> all(g_.num_vertices());
    std::iota(all.begin(), all.end(), 0u);
    recurse(all, {0, 0, dims.rows, dims.cols});
    return tile_;
  }

 private:
  void recurse(std::vector<std::uint32_t> vs, Rect r) {
    if (vs.empty()) return;
    if (r.area() == 1) {
      tile_[vs[0]] = {r.r0, r.c0};
      return;
    }
    Rect a = r, b = r;
    if (r.rows >= r.cols) {
      a.rows = r.rows / 2;
      b.r0 = r.r0 + a.rows;
      b.rows = r.rows - a.rows;
    } else {
      a.cols = r.cols / 2;
      b.c0 = r.c0 + a.cols;
      b.cols = r.cols - a.cols;
    }
    const auto m = static_cast<std::int64_t>(vs.size());
    auto na = static_cast<std::int64_t>(
        std::llround(static_cast<double>(m) * static_cast<double>(a.area()) /
                     static_cast<double>(r.area())));
    na = std::clamp<std::int64_t>(na, std::max<std::int64_t>(0, m - b.area()), a.area());

    std::vector<char> side = bisect(vs, a, b, static_cast<std::size_t>(na));
    std::vector<std::uint32_t> va, vb;
    for (std::size_t i = 0; i < vs.size(); ++i) (side[i] ? vb : va).push_back(vs[i]);
    for (auto v : va) cr_[v] = a.cr(), cc_[v] = a.cc();
    for (auto v : vb) cr_[v] = b.cr(), cc_[v] = b.cc();
    recurse(std::move(va), a);
    recurse(std::move(vb), b);
  }

  // Splits vs into a part of size na placed in a and the rest in b. Cost is
  // the interaction-weighted Manhattan distance with every vertex standing at
  // its rectangle's centre; vertices outside vs act as fixed terminals.
  std::vector<char> bisect(const std::vector<std::uint32_t>& vs, const Rect& a, const Rect& b,
                           std::size_t na) {
    const std::size_t m = vs.size();
    if (na == 0 || na == m) return std::vector<char>(m, na == 0 ? 1 : 0);

    std::map<std::uint32_t, std::uint32_t> local;
    for (std::size_t i = 0; i < m; ++i) local[vs[i]] = static_cast<std::uint32_t>(i);
    const double span = std::abs(a.cr() - b.cr()) + std::abs(a.cc() - b.cc());

    // Terminal cost of putting each vertex on side 0 / side 1, and internal
    // adjacency in local indices.
    std::vector<std::array<double, 2>> term(m, {0.0, 0.0});
    std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (auto [u, w] : g_.neighbors(vs[i])) {
        auto it = local.find(u);
        if (it != local.end()) {
          adj[i].emplace_back(it->second, w * span);
        } else {
          term[i][0] += w * (std::abs(a.cr() - cr_[u]) + std::abs(a.cc() - cc_[u]));
          term[i][1] += w * (std::abs(b.cr() - cr_[u]) + std::abs(b.cc() - cc_[u]));
        }
      }
    }

    auto cost_of = [&](const std::vector<char>& s) {
      double c = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        c += term[i][static_cast<std::size_t>(s[i])];
        for (auto [j, w] : adj[i])
          if (j > i && s[i] != s[j]) c += w;
      }
      return c;
    };

    std::vector<char> best_side;
    double best_cost = 0.0;
    std::vector<std::uint32_t> order(m);
    for (int restart = 0; restart < std::max(1, opt_.restarts); ++restart) {
      std::iota(order.begin(), order.end(), 0u);
      std::shuffle(order.begin(), order.end(), rng_);
      std::vector<char> s(m, 1);
      for (std::size_t k = 0; k < na; ++k) s[order[k]] = 0;
      while (fm_pass(s, adj, term, na)) {
      }
      const double c = cost_of(s);
      if (best_side.empty() || c < best_cost - 1e-9) {
        best_cost = c;
        best_side = s;
      }
    }
    return best_side;
  }

  // One Fiduccia-Mattheyses pass with gain buckets. Moves may unbalance the
  // sides by one vertex; the pass keeps the best exactly balanced prefix.
  // Returns whether the cost improved.
  static bool fm_pass(std::vector<char>& s,
                      const std::vector<std::vector<std::pair<std::uint32_t, double>>>& adj,
                      const std::vector<std::array<double, 2>>& term, std::size_t na) {
    const std::size_t m = s.size();
    std::vector<double> gain(m);
    auto compute_gain = [&](std::size_t i) {
      const auto here = static_cast<std::size_t>(s[i]);
      double gn = term[i][here] - term[i][1 - here];
      for (auto [j, w] : adj[i]) gn += s[j] == s[i] ? -w : w;
      return gn;
    };
    std::array<std::set<std::pair<double, std::uint32_t>, std::greater<>>, 2> bucket;
    for (std::size_t i = 0; i < m; ++i) {
      gain[i] = compute_gain(i);
      bucket[static_cast<std::size_t>(s[i])].insert({gain[i], static_cast<std::uint32_t>(i)});
    }
    std::vector<char> locked(m, 0);
    std::vector<std::uint32_t> moves;
    std::int64_t size0 = static_cast<std::int64_t>(na);
    double run = 0.0, best = 0.0;
    std::size_t best_len = 0;
    const auto target = static_cast<std::int64_t>(na);

    while (true) {
      // Moving from side 0 shrinks size0; stay within one of the target.
      const bool can0 = !bucket[0].empty() && size0 - 1 >= target - 1;
      const bool can1 = !bucket[1].empty() && size0 + 1 <= target + 1;
      if (!can0 && !can1) break;
      std::size_t from;
      if (can0 && can1)
        from = bucket[0].begin()->first >= bucket[1].begin()->first ? 0 : 1;
      else
        from = can0 ? 0 : 1;
      const auto [gv, i] = *bucket[from].begin();
      bucket[from].erase(bucket[from].begin());
      locked[i] = 1;
      s[i] = static_cast<char>(1 - from);
      size0 += from == 0 ? -1 : 1;
      run += gv;
      moves.push_back(i);
      for (auto [j, w] : adj[i]) {
        if (locked[j]) continue;
        auto& bk = bucket[static_cast<std::size_t>(s[j])];
        bk.erase({gain[j], j});
        gain[j] = compute_gain(j);
        bk.insert({gain[j], j});
      }
      if (size0 == target && run > best + 1e-9) {
        best = run;
        best_len = moves.size();
      }
    }
    for (std::size_t k = moves.size(); k-- > best_len;) s[moves[k]] = static_cast<char>(1 - s[moves[k]]);
    return best_len > 0;
  }

  const InteractionGraph& g_;
  PlaceOptions opt_;
  std::vector<double> cr_, cc_;
  std::vector<Tile> tile_;
  std::mt19937_64 rng_;
};

// Weighted distance from v to all its neighbours if v stood at t.
inline double vertex_cost(const InteractionGraph& g, const std::vector<Tile>& at,
                          std::uint32_t v, Tile t, std::uint32_t ignore) {
  double c = 0.0;
  for (auto [u, w] : g.neighbors(v))
    if (u != ignore) c += w * manhattan(t, at[u]);
  return c;
}

// Greedy descent over pairwise swaps (and moves into empty tiles). Factory
// vertices only ever occupy boundary tiles.
inline void refine_swaps(const InteractionGraph& g, GridDims dims, std::vector<Tile>& at,
                         int radius) {
  constexpr std::uint32_t kEmpty = UINT32_MAX;
  std::vector<std::uint32_t> occupant(static_cast<std::size_t>(dims.area()), kEmpty);
  auto idx = [&](Tile t) { return static_cast<std::size_t>(t.row) * dims.cols + t.col; };
  for (std::uint32_t v = 0; v < at.size(); ++v) occupant[idx(at[v])] = v;
  const bool global = dims.area() <= 400;

  auto allowed = [&](std::uint32_t v, Tile t) { return !g.is_factory(v) || is_boundary(dims, t); };

  for (int pass = 0; pass < 50; ++pass) {
    bool improved = false;
    for (std::uint32_t v = 0; v < at.size(); ++v) {
      const Tile from = at[v];
      double best_delta = -1e-9;
      Tile best_tile = from;
      auto consider = [&](Tile t) {
        if (t == from) return;
        const std::uint32_t u = occupant[idx(t)];
        if (!allowed(v, t) || (u != kEmpty && !allowed(u, from))) return;
        double delta = vertex_cost(g, at, v, t, u) - vertex_cost(g, at, v, from, u);
        if (u != kEmpty) delta += vertex_cost(g, at, u, from, v) - vertex_cost(g, at, u, t, v);
        if (delta < best_delta) {
          best_delta = delta;
          best_tile = t;
        }
      };
      if (global) {
        for (int r = 0; r < dims.rows; ++r)
          for (int c = 0; c < dims.cols; ++c) consider({r, c});
      } else {
        for (int r = std::max(0, from.row - radius); r <= std::min(dims.rows - 1, from.row + radius); ++r)
          for (int c = std::max(0, from.col - radius); c <= std::min(dims.cols - 1, from.col + radius); ++c)
            consider({r, c});
      }
      if (best_tile == from) continue;
      const std::uint32_t u = occupant[idx(best_tile)];
      occupant[idx(from)] = u;
      occupant[idx(best_tile)] = v;
      at[v] = best_tile;
      if (u != kEmpty) at[u] = from;
      improved = true;
    }
    if (!improved) break;
  }
}

// Moves each factory vertex to the nearest boundary tile not already holding
// a factory, swapping with whatever sits there.
inline void pin_factories(const InteractionGraph& g, GridDims dims, std::vector<Tile>& at) {
  std::set<Tile> factory_tiles;
  for (std::uint32_t f = 0; f < g.num_factories(); ++f) {
    const std::uint32_t v = g.factory_vertex(f);
    Tile best = at[v];
    if (!is_boundary(dims, best) || factory_tiles.count(best)) {
      int best_d = INT32_MAX;
      for (int r = 0; r < dims.rows; ++r)
        for (int c = 0; c < dims.cols; ++c) {
          Tile t{r, c};
          if (!is_boundary(dims, t) || factory_tiles.count(t)) continue;
          const int dist = manhattan(t, at[v]);
          if (dist < best_d) best_d = dist, best = t;
        }
      for (std::uint32_t u = 0; u < at.size(); ++u)
        if (u != v && at[u] == best) {
          at[u] = at[v];
          break;
        }
      at[v] = best;
    }
    factory_tiles.insert(best);
  }
}

}  // namespace detail

/// Recursive bisection placement. Deterministic for fixed options.
inline Placement place(const InteractionGraph& g, GridDims dims, const PlaceOptions& opt = {}) {
  if (dims.rows <= 0 || dims.cols <= 0 || dims.area() < g.num_vertices())
    throw InvalidArgument("place: grid area " + std::to_string(dims.area()) +
                          " is smaller than " + std::to_string(g.num_vertices()) + " vertices");
  if (g.num_factories() > 0) {
    const std::int64_t boundary =
        dims.rows == 1 || dims.cols == 1 ? dims.area() : 2 * (dims.rows + dims.cols) - 4;
    if (boundary < g.num_factories()) throw InvalidArgument("place: not enough boundary tiles for factories");
  }
  std::vector<Tile> at = detail::Bisector(g, dims, opt).run(dims);
  detail::pin_factories(g, dims, at);
  if (opt.refine) detail::refine_swaps(g, dims, at, opt.refine_radius);

  Placement p;
  p.dims = dims;
  p.qubit_tile.assign(at.begin(), at.begin() + g.num_qubits());
  p.factory_tile.assign(at.begin() + g.num_qubits(), at.end());
  return p;
}

inline nlohmann::json placement_to_json(const Placement& p) {
  nlohmann::json assignments = nlohmann::json::array();
  for (std::size_t q = 0; q < p.qubit_tile.size(); ++q)
    assignments.push_back({{"qubit", q}, {"row", p.qubit_tile[q].row}, {"col", p.qubit_tile[q].col}});
  nlohmann::json factories = nlohmann::json::array();
  for (std::size_t f = 0; f < p.factory_tile.size(); ++f)
    factories.push_back({{"factory", f}, {"row", p.factory_tile[f].row}, {"col", p.factory_tile[f].col}});
  return {{"dims", {{"rows", p.dims.rows}, {"cols", p.dims.cols}}},
          {"assignments", assignments},
          {"factories", factories}};
}

inline Placement placement_from_json(const nlohmann::json& j) {
  Placement p;
  p.dims = {j.at("dims").at("rows").get<int>(), j.at("dims").at("cols").get<int>()};
  const auto& a = j.at("assignments");
  p.qubit_tile.resize(a.size());
  for (const auto& e : a) {
    const auto q = e.at("qubit").get<std::size_t>();
    if (q >= a.size()) throw InvalidArgument("placement: qubit index out of range");
    p.qubit_tile[q] = {e.at("row").get<int>(), e.at("col").get<int>()};
  }
  for (const auto& e : j.at("factories")) p.factory_tile.push_back({e.at("row").get<int>(), e.at("col").get<int>()});
  if (!p.valid()) throw InvalidArgument("placement: tiles overlap or fall outside the grid");
  return p;
}

}  // namespace surfcomm
