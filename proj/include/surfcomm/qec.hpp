#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "surfcomm/error.hpp"

namespace surfcomm {

enum class Encoding { Planar, DoubleDefect };

inline std::string_view encoding_name(Encoding e) {
  return e == Encoding::Planar ? "planar" : "double_defect";
}

inline Encoding encoding_from_name(std::string_view s) {
  if (s == "planar") return Encoding::Planar;
  if (s == "double_defect" || s == "dd") return Encoding::DoubleDefect;
  throw InvalidArgument("unknown encoding '" + std::string(s) + "'");
}

/// Technology and footprint constants. Every field can be overridden from
/// the "qec" object of a config file.
struct QecConfig {
  double A = 0.03;
  double p_th = 1e-2;
  // Planar tile side is tile_scale * d + tile_offset physical qubits.
  int tile_scale = 2;
  int tile_offset = -1;
  double dd_tile_multiplier = 2.0;
  double syndrome_cycle_seconds = 1e-6;
  double ancilla_ratio = 0.25;
  int factory_size_tiles = 12;
  double channel_overhead_fraction = 0.25;
  int max_distance = 9999;
};

inline void to_json(nlohmann::json& j, const QecConfig& c) {
  j = {{"A", c.A},
       {"p_th", c.p_th},
       {"tile_scale", c.tile_scale},
       {"tile_offset", c.tile_offset},
       {"dd_tile_multiplier", c.dd_tile_multiplier},
       {"syndrome_cycle_seconds", c.syndrome_cycle_seconds},
       {"ancilla_ratio", c.ancilla_ratio},
       {"factory_size_tiles", c.factory_size_tiles},
       {"channel_overhead_fraction", c.channel_overhead_fraction},
       {"max_distance", c.max_distance}};
}

inline void from_json(const nlohmann::json& j, QecConfig& c) {
  const QecConfig def;
  c.A = j.value("A", def.A);
  c.p_th = j.value("p_th", def.p_th);
  c.tile_scale = j.value("tile_scale", def.tile_scale);
  c.tile_offset = j.value("tile_offset", def.tile_offset);
  c.dd_tile_multiplier = j.value("dd_tile_multiplier", def.dd_tile_multiplier);
  c.syndrome_cycle_seconds = j.value("syndrome_cycle_seconds", def.syndrome_cycle_seconds);
  c.ancilla_ratio = j.value("ancilla_ratio", def.ancilla_ratio);
  c.factory_size_tiles = j.value("factory_size_tiles", def.factory_size_tiles);
  c.channel_overhead_fraction =
      j.value("channel_overhead_fraction", def.channel_overhead_fraction);
  c.max_distance = j.value("max_distance", def.max_distance);
}

/// Per-operation logical error budget for a whole computation.
inline double required_logical_rate(double total_logical_ops, double success_target = 0.5) {
  if (!(total_logical_ops >= 1.0))
    throw InvalidArgument("required_logical_rate: need at least one logical op");
  if (!(success_target > 0.0 && success_target < 1.0))
    throw InvalidArgument("required_logical_rate: success target must lie in (0, 1)");
  return (1.0 - success_target) / total_logical_ops;
}

struct ErrorBudget {
  double total_logical_ops = 1;
  double success_target = 0.5;
  double p_P = 1e-8;

  double p_L() const { return required_logical_rate(total_logical_ops, success_target); }
};

/// Logical error rate per op of a distance-d code: A (p/p_th)^ceil(d/2).
inline double model_logical_rate(const QecConfig& cfg, double p_P, int d) {
  return cfg.A * std::pow(p_P / cfg.p_th, (d + 1) / 2);
}

/// Smallest odd d >= 3 whose modelled logical rate meets p_L. Finds an upper
/// bracket by doubling, then bisects over odd distances.
inline int choose_distance(const QecConfig& cfg, double p_P, double p_L) {
  if (!(p_P > 0.0 && p_P < 1.0)) throw InvalidArgument("choose_distance: p_P must lie in (0, 1)");
  if (!(p_L > 0.0 && p_L < 1.0)) throw InvalidArgument("choose_distance: p_L must lie in (0, 1)");
  if (p_P >= cfg.p_th)
    throw UncorrectableTechnology("physical error rate " + std::to_string(p_P) +
                                  " is at or above threshold " + std::to_string(cfg.p_th));
  auto ok = [&](int d) { return model_logical_rate(cfg, p_P, d) <= p_L; };
  // Work over k where d = 2k + 1.
  int lo = 1;
  if (ok(3)) return 3;
  const int k_max = (cfg.max_distance - 1) / 2;
  int hi = 2;
  while (!ok(2 * hi + 1)) {
    if (hi >= k_max)
      throw UncorrectableTechnology("required code distance exceeds " +
                                    std::to_string(cfg.max_distance));
    lo = hi;
    hi = std::min(2 * hi, k_max);
  }
  while (hi - lo > 1) {
    int mid = lo + (hi - lo) / 2;
    (ok(2 * mid + 1) ? hi : lo) = mid;
  }
  return 2 * hi + 1;
}

inline std::int64_t tile_footprint(const QecConfig& cfg, Encoding e, int d) {
  if (d < 3 || d % 2 == 0) throw InvalidArgument("code distance must be odd and >= 3");
  const std::int64_t side = static_cast<std::int64_t>(cfg.tile_scale) * d + cfg.tile_offset;
  const std::int64_t planar = side * side;
  if (e == Encoding::Planar) return planar;
  return static_cast<std::int64_t>(std::llround(cfg.dd_tile_multiplier * static_cast<double>(planar)));
}

struct FactoryPlan {
  std::int64_t data_tiles = 0;
  std::int64_t magic_factories = 0;
  std::int64_t epr_factories = 0;
  std::int64_t factory_size_tiles = 12;

  std::int64_t magic_tiles() const { return magic_factories * factory_size_tiles; }
  std::int64_t epr_tiles() const { return epr_factories * factory_size_tiles; }
  std::int64_t total_tiles() const { return magic_tiles() + epr_tiles(); }
};

/// One factory per factory_size_tiles of ancilla budget (ancilla_ratio of the
/// data tiles), at least one. EPR factories only exist on the planar side.
inline FactoryPlan factory_plan(std::int64_t data_tiles, Encoding e, const QecConfig& cfg) {
  if (data_tiles < 0) throw InvalidArgument("factory_plan: negative data tile count");
  FactoryPlan p;
  p.data_tiles = data_tiles;
  p.factory_size_tiles = cfg.factory_size_tiles;
  const double budget = static_cast<double>(data_tiles) * cfg.ancilla_ratio;
  const auto n = static_cast<std::int64_t>(
      std::ceil(budget / static_cast<double>(cfg.factory_size_tiles) - 1e-9));
  p.magic_factories = std::max<std::int64_t>(1, n);
  p.epr_factories = e == Encoding::Planar ? p.magic_factories : 0;
  return p;
}

struct CodeParams {
  Encoding encoding = Encoding::DoubleDefect;
  int d = 3;
  std::int64_t physical_qubits_per_tile = 0;
  double syndrome_cycle_seconds = 1e-6;
  std::int64_t factory_tiles_magic = 0;
  std::int64_t factory_tiles_epr = 0;
  double ancilla_to_data_ratio = 0.25;
};

inline CodeParams make_code_params(Encoding e, int d, std::int64_t data_tiles,
                                   const QecConfig& cfg) {
  CodeParams p;
  p.encoding = e;
  p.d = d;
  p.physical_qubits_per_tile = tile_footprint(cfg, e, d);
  p.syndrome_cycle_seconds = cfg.syndrome_cycle_seconds;
  const FactoryPlan f = factory_plan(data_tiles, e, cfg);
  p.factory_tiles_magic = f.magic_tiles();
  p.factory_tiles_epr = f.epr_tiles();
  p.ancilla_to_data_ratio = cfg.ancilla_ratio;
  return p;
}

}  // namespace surfcomm
