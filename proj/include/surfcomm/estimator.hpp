#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfcomm/braid_sim.hpp"
#include "surfcomm/dag.hpp"
#include "surfcomm/qec.hpp"
#include "surfcomm/synth.hpp"
#include "surfcomm/teleport_sim.hpp"

namespace surfcomm {

struct EstimatorConfig {
  QecConfig qec;
  TeleportConfig teleport;
  BraidSimConfig braid;
  double success_target = 0.5;
  std::uint64_t seed = 1;
  /// Planar EPR look-ahead window; negative means tune it on the workload.
  Cycle window = -1;
  double knee_fraction = 0.05;

  EstimatorConfig() { braid.record_events = false; }
};

inline void to_json(nlohmann::json& j, const EstimatorConfig& c) {
  j = {{"qec", c.qec},     {"teleport", c.teleport}, {"braid", c.braid},
       {"success_target", c.success_target},         {"seed", c.seed},
       {"window", c.window}, {"knee_fraction", c.knee_fraction}};
}

inline void from_json(const nlohmann::json& j, EstimatorConfig& c) {
  const EstimatorConfig def;
  c.qec = j.value("qec", def.qec);
  c.teleport = j.value("teleport", def.teleport);
  c.braid = j.value("braid", def.braid);
  c.success_target = j.value("success_target", def.success_target);
  c.seed = j.value("seed", def.seed);
  c.window = j.value("window", def.window);
  c.knee_fraction = j.value("knee_fraction", def.knee_fraction);
}

struct ResourceEstimate {
  Encoding encoding = Encoding::Planar;
  double p_P = 0;
  double p_L = 0;
  double logical_ops = 0;
  int d = 3;
  std::int64_t data_tiles = 0;
  std::int64_t factory_tiles = 0;
  std::int64_t channel_tiles = 0;
  std::int64_t physical_qubits_per_tile = 0;
  std::int64_t physical_qubits = 0;
  /// Syndrome rounds for double-defect, logical cycles of d rounds for planar.
  Cycle cycles = 0;
  Cycle window = -1;
  std::int64_t epr_high_water = 0;
  double wall_time_seconds = 0;
  double spacetime = 0;

  std::int64_t tiles() const { return data_tiles + factory_tiles + channel_tiles; }
};

/// Fills the space and time fields from the code distance, tile counts and
/// simulated schedule length.
inline void account(ResourceEstimate& e, const QecConfig& cfg) {
  const FactoryPlan f = factory_plan(e.data_tiles, e.encoding, cfg);
  e.factory_tiles = f.total_tiles();
  e.channel_tiles = static_cast<std::int64_t>(
      std::ceil(cfg.channel_overhead_fraction * static_cast<double>(e.data_tiles) - 1e-9));
  e.physical_qubits_per_tile = tile_footprint(cfg, e.encoding, e.d);
  e.physical_qubits = e.tiles() * e.physical_qubits_per_tile;
  const double rounds = e.encoding == Encoding::DoubleDefect
                            ? static_cast<double>(e.cycles)
                            : static_cast<double>(e.cycles) * e.d;
  e.wall_time_seconds = rounds * cfg.syndrome_cycle_seconds;
  e.spacetime = static_cast<double>(e.physical_qubits) * e.wall_time_seconds;
}

/// Everything the estimator needs from the planar teleport simulation.
struct PlanarRun {
  Cycle window = 0;
  Cycle cycles = 0;
  std::int64_t epr_high_water = 0;
};

inline PlanarRun run_planar(const LogicalCircuit& c, int d, const EstimatorConfig& cfg,
                            Cycle window = -1) {
  const auto F = factory_plan(c.num_qubits(), Encoding::Planar, cfg.qec).magic_factories;
  const SimdLayout L = make_simd_layout(c.num_qubits(), d, F, cfg.teleport);
  const DepDag dag = build_dag(c, LatencyModel::unit());
  const SimdSchedule simd = schedule_simd(dag, L);
  PlanarRun r;
  r.window = window;
  if (r.window < 0) {
    const auto pts = sweep_window(dag, simd, L, default_windows(4 * std::max<Cycle>(1, max_transit(simd, L))));
    r.window = find_knee(pts, cfg.knee_fraction);
  }
  const TeleportSchedule s = plan_epr_distribution(dag, simd, L, r.window);
  r.cycles = s.schedule_length;
  r.epr_high_water = s.epr_high_water;
  return r;
}

inline BraidSchedule run_double_defect(const LogicalCircuit& c, int d, const EstimatorConfig& cfg) {
  const auto F = factory_plan(c.num_qubits(), Encoding::DoubleDefect, cfg.qec).magic_factories;
  const Placement pl = braid_placement(c, cfg.braid.policy, static_cast<std::uint32_t>(F), cfg.seed);
  CodeParams params = make_code_params(Encoding::DoubleDefect, d, c.num_qubits(), cfg.qec);
  return simulate_braids(build_dag(c, LatencyModel::braided(d)), pl, params, cfg.braid);
}

/// Full pipeline for one circuit: error budget, code distance, sizing, then
/// the braid simulator (double-defect) or the SIMD/teleport simulator (planar).
inline ResourceEstimate estimate(const LogicalCircuit& c, Encoding enc, double p_P,
                                 const EstimatorConfig& cfg = {}) {
  if (c.size() == 0) throw InvalidArgument("estimate: empty circuit");
  ResourceEstimate e;
  e.encoding = enc;
  e.p_P = p_P;
  e.logical_ops = static_cast<double>(c.size());
  e.p_L = required_logical_rate(e.logical_ops, cfg.success_target);
  e.d = choose_distance(cfg.qec, p_P, e.p_L);
  e.data_tiles = c.num_qubits();
  if (enc == Encoding::DoubleDefect) {
    e.cycles = run_double_defect(c, e.d, cfg).schedule_length;
  } else {
    const PlanarRun r = run_planar(c, e.d, cfg, cfg.window);
    e.cycles = r.cycles;
    e.window = r.window;
    e.epr_high_water = r.epr_high_water;
  }
  account(e, cfg.qec);
  return e;
}

/// Double-defect over planar space-time; above 1 planar is cheaper.
inline double spacetime_ratio(const ResourceEstimate& dd, const ResourceEstimate& planar) {
  return dd.spacetime / planar.spacetime;
}

inline std::string estimates_csv_header() { return "encoding,d,qubits,seconds,spacetime\n"; }

inline std::string estimates_csv_row(const ResourceEstimate& e) {
  std::ostringstream o;
  o.precision(12);
  o << encoding_name(e.encoding) << ',' << e.d << ',' << e.physical_qubits << ',' << e.wall_time_seconds
    << ',' << e.spacetime << '\n';
  return o.str();
}

inline nlohmann::json estimate_to_json(const ResourceEstimate& e) {
  return {{"encoding", std::string(encoding_name(e.encoding))},
          {"p_P", e.p_P},
          {"p_L", e.p_L},
          {"logical_ops", e.logical_ops},
          {"d", e.d},
          {"data_tiles", e.data_tiles},
          {"factory_tiles", e.factory_tiles},
          {"channel_tiles", e.channel_tiles},
          {"physical_qubits_per_tile", e.physical_qubits_per_tile},
          {"physical_qubits", e.physical_qubits},
          {"cycles", e.cycles},
          {"window", e.window < 0 ? nlohmann::json(nullptr) : nlohmann::json(window_name(e.window))},
          {"epr_high_water", e.epr_high_water},
          {"wall_time_seconds", e.wall_time_seconds},
          {"spacetime", e.spacetime}};
}

/// Synthetic workloads of one parallelism factor whose qubit count grows as
/// the square root of the op count.
struct WorkloadFamily {
  std::string name;
  double parallelism = 1.5;
  double t_fraction = 0.05;
  double qubit_scale = 2.0;
  std::uint32_t min_qubits = 0;  // 0 means max(8, 2 x parallelism)

  std::uint32_t qubits_for(double ops) const {
    const auto floor_q = min_qubits > 0 ? min_qubits
                                        : std::max<std::uint32_t>(8, static_cast<std::uint32_t>(std::ceil(2 * parallelism)));
    const double q = std::round(qubit_scale * std::sqrt(ops));
    return q > static_cast<double>(floor_q) ? static_cast<std::uint32_t>(q) : floor_q;
  }

  LogicalCircuit circuit(std::uint64_t ops, std::uint64_t seed) const {
    return synth_workload(qubits_for(static_cast<double>(ops)), ops, parallelism, t_fraction, seed);
  }
};

inline void to_json(nlohmann::json& j, const WorkloadFamily& f) {
  j = {{"name", f.name},
       {"parallelism", f.parallelism},
       {"t_fraction", f.t_fraction},
       {"qubit_scale", f.qubit_scale},
       {"min_qubits", f.min_qubits}};
}

inline void from_json(const nlohmann::json& j, WorkloadFamily& f) {
  const WorkloadFamily def;
  f.name = j.at("name").get<std::string>();
  f.parallelism = j.value("parallelism", def.parallelism);
  f.t_fraction = j.value("t_fraction", def.t_fraction);
  f.qubit_scale = j.value("qubit_scale", def.qubit_scale);
  f.min_qubits = j.value("min_qubits", def.min_qubits);
}

/// The serial and parallel reference families.
inline std::vector<WorkloadFamily> default_families() {
  return {{"serial", 1.5, 0.05, 2.0, 0}, {"parallel", 66.0, 0.05, 2.0, 0}};
}

struct CalibrationOptions {
  /// Smallest calibration size; 0 means max(100, 20 x parallelism).
  std::uint64_t min_ops = 0;
  /// Largest op count that is simulated directly.
  std::uint64_t max_ops = 1000000;
  double step = 4.0;
};

inline void to_json(nlohmann::json& j, const CalibrationOptions& c) {
  j = {{"min_ops", c.min_ops}, {"max_ops", c.max_ops}, {"step", c.step}};
}

inline void from_json(const nlohmann::json& j, CalibrationOptions& c) {
  const CalibrationOptions def;
  c.min_ops = j.value("min_ops", def.min_ops);
  c.max_ops = j.value("max_ops", def.max_ops);
  c.step = j.value("step", def.step);
}

struct CalibrationPoint {
  std::uint64_t ops = 0;
  std::uint32_t qubits = 0;
  Cycle dd_cycles = 0;
  Cycle dd_critical_path = 0;
  double dd_slowdown = 1;
  Cycle planar_cycles = 0;
  std::int64_t planar_high_water = 0;
  double slowdown_residual = 0;  // log-space residual against the fitted power law
};

/// Per-family cost model. Simulates both encodings at a geometric ladder of
/// sizes (distance 3). Between ladder points, per-op costs are interpolated in
/// log-log space. Beyond the top, the braid slowdown over the critical path
/// follows a fitted power law, and the planar side reruns the largest
/// workload with cells stretched to the real machine size.
class CalibratedModel {
 public:
  CalibratedModel(WorkloadFamily family, EstimatorConfig cfg, CalibrationOptions opt = {})
      : family_(std::move(family)), cfg_(std::move(cfg)), opt_(opt) {
    if (!(family_.parallelism >= 1)) throw InvalidArgument("family parallelism must be >= 1");
    if (!(opt_.step > 1)) throw InvalidArgument("calibration step must exceed 1");
    std::uint64_t n = opt_.min_ops > 0
                          ? opt_.min_ops
                          : std::max<std::uint64_t>(100, static_cast<std::uint64_t>(std::ceil(20 * family_.parallelism)));
    if (n > opt_.max_ops) throw InvalidArgument("calibration range is empty");
    for (; n <= opt_.max_ops; n = static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * opt_.step)))
      calibrate_at(n);
    fit();
  }

  const WorkloadFamily& family() const { return family_; }
  const std::vector<CalibrationPoint>& points() const { return points_; }
  Cycle window() const { return window_; }
  double slowdown_exponent() const { return exponent_; }
  double max_abs_residual() const {
    double m = 0;
    for (const auto& p : points_) m = std::max(m, std::abs(p.slowdown_residual));
    return m;
  }

  /// Both estimates for a family member of `ops` operations at p_P.
  std::pair<ResourceEstimate, ResourceEstimate> evaluate(double ops, double p_P) {
    if (!(ops >= 1)) throw InvalidArgument("evaluate: op count must be >= 1");
    ResourceEstimate dd, pl;
    dd.encoding = Encoding::DoubleDefect;
    pl.encoding = Encoding::Planar;
    for (auto* e : {&dd, &pl}) {
      e->p_P = p_P;
      e->logical_ops = ops;
      e->p_L = required_logical_rate(ops, cfg_.success_target);
      e->d = choose_distance(cfg_.qec, p_P, e->p_L);
      e->data_tiles = family_.qubits_for(ops);
    }
    dd.cycles = static_cast<Cycle>(std::ceil(dd_cycles_per_op(ops, dd.d) * ops - 1e-6));
    pl.cycles = static_cast<Cycle>(std::ceil(planar_cycles_per_op(ops) * ops - 1e-6));
    pl.window = window_;
    account(dd, cfg_.qec);
    account(pl, cfg_.qec);
    return {dd, pl};
  }

  double ratio(double ops, double p_P) {
    auto [dd, pl] = evaluate(ops, p_P);
    return spacetime_ratio(dd, pl);
  }

  nlohmann::json report() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points_)
      pts.push_back({{"ops", p.ops},
                     {"qubits", p.qubits},
                     {"dd_cycles", p.dd_cycles},
                     {"dd_critical_path", p.dd_critical_path},
                     {"dd_slowdown", p.dd_slowdown},
                     {"planar_cycles", p.planar_cycles},
                     {"planar_high_water", p.planar_high_water},
                     {"slowdown_residual", p.slowdown_residual}});
    return {{"family", family_},
            {"window", window_name(window_)},
            {"slowdown_fit", {{"exponent", exponent_}, {"max_abs_log_residual", max_abs_residual()}}},
            {"points", pts}};
  }

 private:
  void calibrate_at(std::uint64_t ops) {
    const std::uint64_t seed = cfg_.seed + 7919 * points_.size();
    circuits_.push_back(family_.circuit(ops, seed));
    const LogicalCircuit& c = circuits_.back();
    CalibrationPoint p;
    p.ops = ops;
    p.qubits = c.num_qubits();
    const BraidSchedule b = run_double_defect(c, 3, cfg_);
    p.dd_cycles = b.schedule_length;
    p.dd_critical_path = b.critical_path;
    p.dd_slowdown = static_cast<double>(b.schedule_length) / static_cast<double>(b.critical_path);
    // The planar window is tuned once on the smallest member and then held.
    const PlanarRun r = run_planar(c, 3, cfg_, points_.empty() ? cfg_.window : window_);
    if (points_.empty()) window_ = r.window;
    p.planar_cycles = r.cycles;
    p.planar_high_water = r.epr_high_water;
    points_.push_back(p);
  }

  // Least squares of log slowdown against log ops.
  void fit() {
    const auto n = static_cast<double>(points_.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : points_) {
      const double x = std::log(static_cast<double>(p.ops)), y = std::log(p.dd_slowdown);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    exponent_ = points_.size() > 1 && den > 0 ? (n * sxy - sx * sy) / den : 0.0;
    const double icpt = (sy - exponent_ * sx) / n;
    for (auto& p : points_)
      p.slowdown_residual = std::log(p.dd_slowdown) - (icpt + exponent_ * std::log(static_cast<double>(p.ops)));
  }

  // Index i such that points_[i].ops <= ops < points_[i + 1].ops, for ops inside the ladder.
  std::size_t bracket(double ops) const {
    std::size_t i = 0;
    while (i + 2 < points_.size() && static_cast<double>(points_[i + 1].ops) <= ops) ++i;
    return i;
  }

  static double loglerp(double x0, double y0, double x1, double y1, double x) {
    if (x1 == x0) return y0;
    const double t = (std::log(x) - std::log(x0)) / (std::log(x1) - std::log(x0));
    return std::exp(std::log(y0) + t * (std::log(y1) - std::log(y0)));
  }

  double cp_per_op(std::size_t i, int d) {
    std::lock_guard<std::mutex> lock(mu_);
    auto& v = cp_cache_[d];
    if (v.empty()) {
      for (const auto& c : circuits_)
        v.push_back(static_cast<double>(build_dag(c, LatencyModel::braided(d)).critical_path_length) /
                    static_cast<double>(c.size()));
    }
    return v[i];
  }

  double dd_cycles_per_op(double ops, int d) {
    const auto& P = points_;
    const double lo = static_cast<double>(P.front().ops), hi = static_cast<double>(P.back().ops);
    if (ops <= lo) return P.front().dd_slowdown * cp_per_op(0, d);
    if (ops >= hi) {
      const double s = std::max(1.0, P.back().dd_slowdown * std::pow(ops / hi, exponent_));
      return s * cp_per_op(P.size() - 1, d);
    }
    const std::size_t i = bracket(ops);
    const double x0 = static_cast<double>(P[i].ops), x1 = static_cast<double>(P[i + 1].ops);
    return loglerp(x0, P[i].dd_slowdown, x1, P[i + 1].dd_slowdown, ops) *
           loglerp(x0, cp_per_op(i, d), x1, cp_per_op(i + 1, d), ops);
  }

  double planar_cycles_per_op(double ops) {
    const auto& P = points_;
    auto per_op = [&](std::size_t i) { return static_cast<double>(P[i].planar_cycles) / static_cast<double>(P[i].ops); };
    const double lo = static_cast<double>(P.front().ops), hi = static_cast<double>(P.back().ops);
    if (ops <= lo) return per_op(0);
    if (ops < hi) {
      const std::size_t i = bracket(ops);
      return loglerp(static_cast<double>(P[i].ops), per_op(i), static_cast<double>(P[i + 1].ops), per_op(i + 1), ops);
    }
    // Stretch the largest workload's cells to the side the full machine would have.
    const int side = natural_side(family_.qubits_for(ops));
    if (side <= natural_side(P.back().qubits)) return per_op(P.size() - 1);
    std::lock_guard<std::mutex> lock(mu_);
    auto it = stretched_.find(side);
    if (it == stretched_.end()) {
      EstimatorConfig c = cfg_;
      c.teleport.region_side = side;
      const PlanarRun r = run_planar(circuits_.back(), 3, c, window_);
      it = stretched_.emplace(side, static_cast<double>(r.cycles) / static_cast<double>(P.back().ops)).first;
    }
    return it->second;
  }

  int natural_side(std::uint32_t qubits) const {
    TeleportConfig t = cfg_.teleport;
    t.region_side = 0;
    return make_simd_layout(qubits, 3, 1, t).region_side;
  }

  WorkloadFamily family_;
  EstimatorConfig cfg_;
  CalibrationOptions opt_;
  std::vector<LogicalCircuit> circuits_;
  std::vector<CalibrationPoint> points_;
  Cycle window_ = 0;
  double exponent_ = 0;
  std::mutex mu_;
  std::map<int, std::vector<double>> cp_cache_;
  std::map<int, double> stretched_;
};

/// Half-decade op counts from lo to hi inclusive.
inline std::vector<std::uint64_t> half_decades(double lo, double hi) {
  std::vector<std::uint64_t> out;
  for (double e = std::ceil(2 * std::log10(lo) - 1e-9); e <= 2 * std::log10(hi) + 1e-9; e += 1)
    out.push_back(static_cast<std::uint64_t>(std::llround(std::pow(10.0, e / 2))));
  return out;
}

/// Both encodings of a family across op counts: the absolute scaling rows
/// and the double-defect over planar ratio.
struct ScalingRow {
  std::uint64_t ops = 0;
  ResourceEstimate dd;
  ResourceEstimate planar;
  double ratio() const { return spacetime_ratio(dd, planar); }
};

inline std::vector<ScalingRow> scaling_curve(CalibratedModel& model, double p_P, const std::vector<std::uint64_t>& sizes) {
  std::vector<ScalingRow> out;
  for (auto n : sizes) {
    auto [dd, pl] = model.evaluate(static_cast<double>(n), p_P);
    out.push_back({n, dd, pl});
  }
  return out;
}

inline std::string scaling_csv_header() { return "family,p_P,op_count,encoding,d,qubits,seconds,spacetime\n"; }

inline std::string scaling_csv_rows(const std::string& family, double p_P, const std::vector<ScalingRow>& rows) {
  std::ostringstream o;
  o.precision(12);
  for (const auto& r : rows)
    for (const ResourceEstimate* e : {&r.dd, &r.planar})
      o << family << ',' << p_P << ',' << r.ops << ',' << encoding_name(e->encoding) << ',' << e->d << ','
        << e->physical_qubits << ',' << e->wall_time_seconds << ',' << e->spacetime << '\n';
  return o.str();
}

inline std::string ratio_csv_header() { return "family,p_P,op_count,ratio\n"; }

inline std::string ratio_csv_rows(const std::string& family, double p_P, const std::vector<ScalingRow>& rows) {
  std::ostringstream o;
  o.precision(12);
  for (const auto& r : rows) o << family << ',' << p_P << ',' << r.ops << ',' << r.ratio() << '\n';
  return o.str();
}

struct CrossoverOptions {
  double lo = 1e2;
  double hi = 1e12;
  int max_evaluations = 40;
};

inline void to_json(nlohmann::json& j, const CrossoverOptions& c) {
  j = {{"lo", c.lo}, {"hi", c.hi}, {"max_evaluations", c.max_evaluations}};
}

inline void from_json(const nlohmann::json& j, CrossoverOptions& c) {
  const CrossoverOptions def;
  c.lo = j.value("lo", def.lo);
  c.hi = j.value("hi", def.hi);
  c.max_evaluations = j.value("max_evaluations", def.max_evaluations);
}

struct CrossoverPoint {
  std::string family;
  double parallelism = 0;
  double p_P = 0;
  std::optional<std::uint64_t> op_count;
  double ratio_at = 0;  // ratio at op_count
  std::uint64_t bracket_lo = 0;
  std::uint64_t bracket_hi = 0;
  double ratio_lo = 0;
  double ratio_hi = 0;
  int evaluations = 0;
  std::string note;
};

/// Log-bisection over op count on ratio - 1. Reports no crossover if the
/// ratio does not change side across [lo, hi].
inline CrossoverPoint find_crossover(CalibratedModel& model, double p_P, const CrossoverOptions& opt = {}) {
  if (!(opt.lo >= 1 && opt.hi > opt.lo)) throw InvalidArgument("find_crossover: bad search range");
  if (opt.max_evaluations < 3) throw InvalidArgument("find_crossover: need at least 3 evaluations");
  CrossoverPoint out;
  out.family = model.family().name;
  out.parallelism = model.family().parallelism;
  out.p_P = p_P;
  auto lo = static_cast<std::uint64_t>(std::ceil(opt.lo));
  auto hi = static_cast<std::uint64_t>(std::floor(opt.hi));
  double rlo = model.ratio(static_cast<double>(lo), p_P);
  double rhi = model.ratio(static_cast<double>(hi), p_P);
  out.evaluations = 2;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.ratio_lo = rlo;
  out.ratio_hi = rhi;
  if ((rlo > 1) == (rhi > 1)) {
    out.note = rlo > 1 ? "planar cheaper across the whole range" : "double-defect cheaper across the whole range";
    return out;
  }
  while (hi - lo > 1 && out.evaluations < opt.max_evaluations) {
    auto mid = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(lo) * static_cast<double>(hi))));
    mid = std::clamp(mid, lo + 1, hi - 1);
    const double r = model.ratio(static_cast<double>(mid), p_P);
    ++out.evaluations;
    if ((r > 1) == (rlo > 1)) {
      lo = mid;
      rlo = r;
    } else {
      hi = mid;
      rhi = r;
    }
  }
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.ratio_lo = rlo;
  out.ratio_hi = rhi;
  const bool take_lo = std::abs(rlo - 1) <= std::abs(rhi - 1);
  out.op_count = take_lo ? lo : hi;
  out.ratio_at = take_lo ? rlo : rhi;
  return out;
}

struct SweepCell {
  std::size_t family = 0;
  std::size_t p_index = 0;
  std::optional<CrossoverPoint> point;
  std::string error;
};

struct SweepResult {
  std::vector<WorkloadFamily> families;
  std::vector<double> p_grid;
  std::vector<SweepCell> cells;  // family-major
  std::vector<nlohmann::json> calibration;

  const SweepCell& at(std::size_t f, std::size_t p) const { return cells[f * p_grid.size() + p]; }

  /// True if the family's crossover op counts never increase with p_P (or
  /// never decrease, for `increasing`), over the cells that have one.
  bool monotone(std::size_t f, bool increasing) const {
    std::optional<std::uint64_t> prev;
    for (std::size_t p = 0; p < p_grid.size(); ++p) {
      const auto& c = at(f, p);
      if (!c.point || !c.point->op_count) continue;
      const auto v = *c.point->op_count;
      if (prev && (increasing ? v < *prev : v > *prev)) return false;
      prev = v;
    }
    return true;
  }
};

/// Crossover op count for every family at every p_P. Families calibrate and
/// cells evaluate on up to `jobs` threads; the result does not depend on it.
inline SweepResult favorability_sweep(const std::vector<WorkloadFamily>& families, const std::vector<double>& p_grid,
                                      const EstimatorConfig& cfg, const CalibrationOptions& cal = {},
                                      const CrossoverOptions& xo = {}, unsigned jobs = 1) {
  if (families.empty() || p_grid.empty()) throw InvalidArgument("sweep: need at least one family and one p_P");
  for (double p : p_grid)
    if (!(p > 0 && p < cfg.qec.p_th)) throw InvalidArgument("sweep: p_P grid must lie in (0, threshold)");
  jobs = std::max(1u, jobs);
  SweepResult out;
  out.families = families;
  out.p_grid = p_grid;
  out.cells.resize(families.size() * p_grid.size());
  out.calibration.resize(families.size());

  std::vector<std::unique_ptr<CalibratedModel>> models(families.size());
  std::vector<std::string> model_error(families.size());
  auto parallel_for = [jobs](std::size_t n, auto&& body) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i; (i = next++) < n;) body(i);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < std::min<std::size_t>(jobs, n); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  };

  parallel_for(families.size(), [&](std::size_t f) {
    try {
      models[f] = std::make_unique<CalibratedModel>(families[f], cfg, cal);
    } catch (const std::exception& e) {
      model_error[f] = e.what();
    }
  });
  parallel_for(out.cells.size(), [&](std::size_t i) {
    SweepCell& cell = out.cells[i];
    cell.family = i / p_grid.size();
    cell.p_index = i % p_grid.size();
    if (!models[cell.family]) {
      cell.error = "calibration: " + model_error[cell.family];
      return;
    }
    try {
      cell.point = find_crossover(*models[cell.family], p_grid[cell.p_index], xo);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });
  for (std::size_t f = 0; f < families.size(); ++f)
    out.calibration[f] = models[f] ? models[f]->report() : nlohmann::json{{"error", model_error[f]}};
  return out;
}

inline std::string crossover_csv(const SweepResult& s) {
  std::ostringstream o;
  o.precision(6);
  o << "family,p_P,op_count\n";
  for (const auto& c : s.cells) {
    o << s.families[c.family].name << ',' << s.p_grid[c.p_index] << ',';
    if (c.point && c.point->op_count)
      o << *c.point->op_count;
    else
      o << (c.error.empty() ? "none" : "error");
    o << '\n';
  }
  return o.str();
}

/// One row per p_P, one column per family, holding the crossover op count.
inline std::string sweep_csv(const SweepResult& s) {
  std::ostringstream o;
  o.precision(6);
  o << "p_P";
  for (const auto& f : s.families) o << ',' << f.name;
  o << '\n';
  for (std::size_t p = 0; p < s.p_grid.size(); ++p) {
    o << s.p_grid[p];
    for (std::size_t f = 0; f < s.families.size(); ++f) {
      const auto& c = s.at(f, p);
      o << ',';
      if (c.point && c.point->op_count)
        o << *c.point->op_count;
      else
        o << (c.error.empty() ? "none" : "error");
    }
    o << '\n';
  }
  return o.str();
}

inline nlohmann::json sweep_to_json(const SweepResult& s) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : s.cells) {
    nlohmann::json j = {{"family", s.families[c.family].name}, {"p_P", s.p_grid[c.p_index]}};
    if (c.point) {
      const auto& p = *c.point;
      j["op_count"] = p.op_count ? nlohmann::json(*p.op_count) : nlohmann::json(nullptr);
      j["ratio_at"] = p.ratio_at;
      j["bracket"] = {p.bracket_lo, p.bracket_hi};
      j["ratio_bracket"] = {p.ratio_lo, p.ratio_hi};
      j["evaluations"] = p.evaluations;
      if (!p.note.empty()) j["note"] = p.note;
    }
    if (!c.error.empty()) j["error"] = c.error;
    cells.push_back(j);
  }
  return {{"cells", cells}, {"calibration", s.calibration}};
}

}  // namespace surfcomm
