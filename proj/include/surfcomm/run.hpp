#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfcomm/braid_sim.hpp"
#include "surfcomm/circuit.hpp"
#include "surfcomm/estimator.hpp"
#include "surfcomm/layout.hpp"
#include "surfcomm/synth.hpp"
#include "surfcomm/teleport_sim.hpp"

namespace surfcomm {

/// Environment variable naming a config file used when --config is absent.
inline constexpr const char* kConfigEnvVar = "SURFCOMM_CONFIG";

/// A failure tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

template <class F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

inline void to_json(nlohmann::json& j, const SynthOptions& o) {
  j = {{"cnot_fraction", o.cnot_fraction}, {"partner_span", o.partner_span}, {"frontier_bias", o.frontier_bias}};
}

inline void from_json(const nlohmann::json& j, SynthOptions& o) {
  const SynthOptions def;
  o.cnot_fraction = j.value("cnot_fraction", def.cnot_fraction);
  o.partner_span = j.value("partner_span", def.partner_span);
  o.frontier_bias = j.value("frontier_bias", def.frontier_bias);
}

/// Workload used by commands that are not given a circuit file.
struct SynthSpec {
  std::uint32_t qubits = 32;
  std::uint64_t ops = 2000;
  double parallelism = 1.5;
  double t_fraction = 0.05;
  SynthOptions options;
};

inline void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"qubits", s.qubits},
       {"ops", s.ops},
       {"parallelism", s.parallelism},
       {"t_fraction", s.t_fraction},
       {"options", s.options}};
}

inline void from_json(const nlohmann::json& j, SynthSpec& s) {
  const SynthSpec def;
  s.qubits = j.value("qubits", def.qubits);
  s.ops = j.value("ops", def.ops);
  s.parallelism = j.value("parallelism", def.parallelism);
  s.t_fraction = j.value("t_fraction", def.t_fraction);
  s.options = j.value("options", def.options);
}

/// "tune", "inf" or a cycle count.
inline nlohmann::json window_to_json(Cycle w) {
  if (w < 0) return "tune";
  if (w == kInfiniteWindow) return "inf";
  return w;
}

inline Cycle window_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "tune") return -1;
    if (s == "inf") return kInfiniteWindow;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used == s.size() && v >= 0) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("window must be 'tune', 'inf' or a non-negative integer, got '" + s + "'");
  }
  if (j.is_number_integer() && j.get<long long>() >= 0) return j.get<Cycle>();
  throw InvalidArgument("window must be 'tune', 'inf' or a non-negative integer");
}

struct RunConfig {
  std::uint64_t seed = 1;
  double p_P = 1e-8;
  double success_target = 0.5;
  Cycle window = -1;
  std::vector<Cycle> windows;  // empty: powers of two past the longest transit
  double knee_fraction = 0.05;
  QecConfig qec;
  BraidSimConfig braid;
  TeleportConfig teleport;
  SynthSpec synth;
  std::vector<WorkloadFamily> families = default_families();
  std::vector<double> p_grid{1e-8, 1e-5, 1e-3};
  CalibrationOptions calibration;
  CrossoverOptions crossover;
  unsigned jobs = 1;
  std::string out = "run";

  EstimatorConfig estimator() const {
    EstimatorConfig e;
    e.qec = qec;
    e.teleport = teleport;
    e.braid = braid;
    e.braid.record_events = false;
    e.success_target = success_target;
    e.seed = seed;
    e.window = window;
    e.knee_fraction = knee_fraction;
    return e;
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  nlohmann::json windows = nlohmann::json::array();
  for (Cycle w : c.windows) windows.push_back(window_to_json(w));
  j = {{"seed", c.seed},
       {"p_P", c.p_P},
       {"success_target", c.success_target},
       {"window", window_to_json(c.window)},
       {"windows", windows},
       {"knee_fraction", c.knee_fraction},
       {"qec", c.qec},
       {"braid", c.braid},
       {"teleport", c.teleport},
       {"synth", c.synth},
       {"families", c.families},
       {"p_grid", c.p_grid},
       {"calibration", c.calibration},
       {"crossover", c.crossover},
       {"jobs", c.jobs},
       {"out", c.out}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  const RunConfig def;
  c.seed = j.value("seed", def.seed);
  c.p_P = j.value("p_P", def.p_P);
  c.success_target = j.value("success_target", def.success_target);
  c.window = j.contains("window") ? window_from_json(j.at("window")) : def.window;
  c.windows.clear();
  if (j.contains("windows"))
    for (const auto& w : j.at("windows")) {
      const Cycle v = window_from_json(w);
      if (v < 0) throw InvalidArgument("windows: 'tune' is not a window size");
      c.windows.push_back(v);
    }
  c.knee_fraction = j.value("knee_fraction", def.knee_fraction);
  c.qec = j.value("qec", def.qec);
  c.braid = j.value("braid", def.braid);
  c.teleport = j.value("teleport", def.teleport);
  c.synth = j.value("synth", def.synth);
  c.families = j.value("families", def.families);
  c.p_grid = j.value("p_grid", def.p_grid);
  c.calibration = j.value("calibration", def.calibration);
  c.crossover = j.value("crossover", def.crossover);
  c.jobs = j.value("jobs", def.jobs);
  c.out = j.value("out", def.out);
}

namespace detail {

// Rejects keys the defaults do not have, so a typo cannot silently fall back
// to a default. Arrays are taken as a whole.
inline void check_known_keys(const nlohmann::json& ref, const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) return;
  for (const auto& [k, v] : j.items()) {
    const std::string at = path.empty() ? k : path + "." + k;
    if (!ref.is_object() || !ref.contains(k)) throw InvalidArgument("unknown config key '" + at + "'");
    if (ref.at(k).is_object()) check_known_keys(ref.at(k), v, at);
  }
}

}  // namespace detail

/// The resolved configuration and the three layers it came from.
struct ResolvedConfig {
  RunConfig config;
  nlohmann::json defaults;
  std::optional<std::string> file_path;
  nlohmann::json file = nlohmann::json::object();
  nlohmann::json flags = nlohmann::json::object();

  nlohmann::json to_json() const {
    return {{"resolved", config},
            {"layers",
             {{"defaults", defaults},
              {"config_file", file_path ? nlohmann::json(*file_path) : nlohmann::json(nullptr)},
              {"file", file},
              {"flags", flags}}}};
  }
};

/// Flags override the config file, which overrides built-in defaults. The
/// config file is `file_path`, else the file named by SURFCOMM_CONFIG if set.
inline ResolvedConfig resolve_config(std::optional<std::string> file_path, const nlohmann::json& flags) {
  return in_stage("config", [&] {
    ResolvedConfig r;
    r.defaults = RunConfig{};
    if (!file_path)
      if (const char* env = std::getenv(kConfigEnvVar); env && *env) file_path = env;
    r.file_path = file_path;
    if (file_path) {
      std::ifstream in(*file_path);
      if (!in) throw InvalidArgument("cannot read config file '" + *file_path + "'");
      try {
        r.file = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("config file '" + *file_path + "' is not valid JSON: " + e.what());
      }
      if (!r.file.is_object()) throw InvalidArgument("config file must hold a JSON object");
    }
    r.flags = flags.is_null() ? nlohmann::json::object() : flags;
    detail::check_known_keys(r.defaults, r.file, "");
    detail::check_known_keys(r.defaults, r.flags, "");
    nlohmann::json merged = r.defaults;
    merged.merge_patch(r.file);
    merged.merge_patch(r.flags);
    try {
      r.config = merged.get<RunConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("bad config value: ") + e.what());
    }
    check_policy(r.config.braid.policy);
    if (!(r.config.p_P > 0 && r.config.p_P < 1)) throw InvalidArgument("p_P must lie in (0, 1)");
    if (r.config.jobs == 0) throw InvalidArgument("jobs must be at least 1");
    return r;
  });
}

/// A file produced by a command, held in memory until written.
struct Artifact {
  std::string name;
  std::string content;
};

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline LogicalCircuit read_circuit_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StageError("io", "cannot read circuit file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return in_stage("parse", [&] { return parse_qasm(ss.str()); });
}

inline LogicalCircuit synth_from(const RunConfig& c) {
  return in_stage("synth", [&] {
    return synth_workload(c.synth.qubits, c.synth.ops, c.synth.parallelism, c.synth.t_fraction, c.seed,
                          c.synth.options);
  });
}

/// The circuit file if one is given, otherwise the configured synthetic workload.
inline LogicalCircuit load_circuit(const RunConfig& c, const std::optional<std::string>& path) {
  return path ? read_circuit_file(*path) : synth_from(c);
}

inline int distance_for(const RunConfig& c, const LogicalCircuit& circ) {
  return in_stage("qec", [&] {
    return choose_distance(c.qec, c.p_P, required_logical_rate(static_cast<double>(circ.size()), c.success_target));
  });
}

inline nlohmann::json profile_json(const LogicalCircuit& c, int d) {
  const DepDag unit = build_dag(c, LatencyModel::unit());
  const DepDag braided = build_dag(c, LatencyModel::braided(d));
  const auto p = parallelism_profile(unit);
  return {{"qubits", c.num_qubits()},
          {"ops", p.total_ops},
          {"levels", p.num_levels},
          {"parallelism", p.parallelism_factor},
          {"t_count", p.t_count},
          {"cnot_count", p.twoq_count},
          {"d", d},
          {"critical_path_unit", unit.critical_path_length},
          {"critical_path_braided", braided.critical_path_length}};
}

inline std::vector<Artifact> cmd_parse(const RunConfig& cfg, const LogicalCircuit& c) {
  const int d = distance_for(cfg, c);
  return {{"dag.json", dump(dag_to_json(build_dag(c, LatencyModel::braided(d))))},
          {"profile.json", dump(profile_json(c, d))}};
}

inline std::vector<Artifact> cmd_synth(const RunConfig& cfg) {
  const LogicalCircuit c = synth_from(cfg);
  return {{"circuit.qc", to_qasm(c)}, {"profile.json", dump(profile_json(c, distance_for(cfg, c)))}};
}

inline std::uint32_t dd_factories(const RunConfig& cfg, const LogicalCircuit& c) {
  return static_cast<std::uint32_t>(factory_plan(c.num_qubits(), Encoding::DoubleDefect, cfg.qec).magic_factories);
}

inline std::vector<Artifact> cmd_place(const RunConfig& cfg, const LogicalCircuit& c) {
  return in_stage("place", [&] {
    const auto F = dd_factories(cfg, c);
    const Placement p = braid_placement(c, cfg.braid.policy, F, cfg.seed);
    const InteractionGraph g = extract_interactions(c, F);
    const Placement naive = naive_placement(c.num_qubits(), F, p.dims);
    nlohmann::json j = placement_to_json(p);
    j["cost"] = placement_cost(g, p);
    j["row_major_cost"] = placement_cost(g, naive);
    j["policy"] = cfg.braid.policy;
    return std::vector<Artifact>{{"placement.json", dump(j)}};
  });
}

inline BraidSchedule braid_run(const RunConfig& cfg, const LogicalCircuit& c, int policy, int d) {
  const auto F = dd_factories(cfg, c);
  const Placement pl = in_stage("place", [&] { return braid_placement(c, policy, F, cfg.seed); });
  return in_stage("braid", [&] {
    BraidSimConfig b = cfg.braid;
    b.policy = policy;
    return simulate_braids(build_dag(c, LatencyModel::braided(d)), pl,
                           make_code_params(Encoding::DoubleDefect, d, c.num_qubits(), cfg.qec), b);
  });
}

/// Braid simulation under the configured policy. With `all_policies`,
/// stats.csv gets one row per policy.
inline std::vector<Artifact> cmd_braid(const RunConfig& cfg, const LogicalCircuit& c, bool all_policies = false) {
  const int d = distance_for(cfg, c);
  const BraidSchedule s = braid_run(cfg, c, cfg.braid.policy, d);
  std::string stats = braid_stats_csv_header();
  if (all_policies) {
    for (int p = 0; p < kNumPolicies; ++p) {
      if (p == cfg.braid.policy) {
        stats += braid_stats_csv_row(s);
        continue;
      }
      RunConfig quiet = cfg;
      quiet.braid.record_events = false;
      stats += braid_stats_csv_row(braid_run(quiet, c, p, d));
    }
  } else {
    stats += braid_stats_csv_row(s);
  }
  return {{"schedule.json", dump(braid_schedule_to_json(s))}, {"stats.csv", stats}, {"gantt.csv", braid_gantt_csv(s)}};
}

/// Window sweep on the planar machine plus a trace at the configured window
/// (the knee when the window is "tune").
inline std::vector<Artifact> cmd_teleport(const RunConfig& cfg, const LogicalCircuit& c) {
  const int d = distance_for(cfg, c);
  return in_stage("teleport", [&] {
    const auto F = factory_plan(c.num_qubits(), Encoding::Planar, cfg.qec).magic_factories;
    const SimdLayout L = make_simd_layout(c.num_qubits(), d, F, cfg.teleport);
    const DepDag dag = build_dag(c, LatencyModel::unit());
    const SimdSchedule simd = schedule_simd(dag, L);
    std::vector<Cycle> ws = cfg.windows.empty() ? default_windows(4 * std::max<Cycle>(1, max_transit(simd, L)))
                                                : cfg.windows;
    if (std::find(ws.begin(), ws.end(), kInfiniteWindow) == ws.end()) ws.push_back(kInfiniteWindow);
    const auto pts = sweep_window(dag, simd, L, ws);
    const Cycle w = cfg.window < 0 ? find_knee(pts, cfg.knee_fraction) : cfg.window;
    const TeleportSchedule s = plan_epr_distribution(dag, simd, L, w);
    verify_teleport_schedule(dag, simd, L, s);
    nlohmann::json trace = teleport_trace_json(simd, L, s);
    trace["knee"] = window_name(find_knee(pts, cfg.knee_fraction));
    return std::vector<Artifact>{{"window_sweep.csv", window_sweep_csv(pts)}, {"teleport_trace.json", dump(trace)}};
  });
}

/// `encoding` is "planar", "double_defect" or "both".
inline std::vector<Artifact> cmd_estimate(const RunConfig& cfg, const LogicalCircuit& c,
                                          const std::string& encoding = "both") {
  std::vector<Encoding> encs;
  if (encoding == "both")
    encs = {Encoding::DoubleDefect, Encoding::Planar};
  else
    encs = {in_stage("estimate", [&] { return encoding_from_name(encoding); })};
  std::string csv = estimates_csv_header();
  nlohmann::json j = {{"estimates", nlohmann::json::array()}};
  std::vector<ResourceEstimate> got;
  for (Encoding e : encs) {
    got.push_back(in_stage("estimate", [&] { return estimate(c, e, cfg.p_P, cfg.estimator()); }));
    csv += estimates_csv_row(got.back());
    j["estimates"].push_back(estimate_to_json(got.back()));
  }
  if (got.size() == 2) j["spacetime_ratio_dd_over_planar"] = spacetime_ratio(got[0], got[1]);
  return {{"estimates.csv", csv}, {"estimate.json", dump(j)}};
}

inline std::vector<WorkloadFamily> select_families(const RunConfig& cfg, const std::vector<std::string>& names) {
  if (names.empty()) return cfg.families;
  std::vector<WorkloadFamily> out;
  for (const auto& n : names) {
    auto it = std::find_if(cfg.families.begin(), cfg.families.end(), [&](const auto& f) { return f.name == n; });
    if (it == cfg.families.end()) throw StageError("config", "no workload family named '" + n + "'");
    out.push_back(*it);
  }
  return out;
}

inline std::string crossover_row(const std::string& family, double p, const CrossoverPoint& x) {
  std::ostringstream o;
  o.precision(6);
  o << family << ',' << p << ',';
  if (x.op_count)
    o << *x.op_count;
  else
    o << "none";
  o << '\n';
  return o.str();
}

inline nlohmann::json crossover_json(const CrossoverPoint& x) {
  return {{"family", x.family},
          {"parallelism", x.parallelism},
          {"p_P", x.p_P},
          {"op_count", x.op_count ? nlohmann::json(*x.op_count) : nlohmann::json(nullptr)},
          {"ratio_at", x.ratio_at},
          {"bracket", {x.bracket_lo, x.bracket_hi}},
          {"ratio_bracket", {x.ratio_lo, x.ratio_hi}},
          {"evaluations", x.evaluations},
          {"note", x.note}};
}

/// Crossover op count per family at the configured p_P, plus the absolute
/// scaling and ratio curves across the search range.
inline std::vector<Artifact> cmd_crossover(const RunConfig& cfg, const std::vector<std::string>& family_names = {}) {
  const auto fams = select_families(cfg, family_names);
  std::string xcsv = "family,p_P,op_count\n", scsv = scaling_csv_header(), rcsv = ratio_csv_header();
  nlohmann::json j = {{"points", nlohmann::json::array()}, {"calibration", nlohmann::json::array()}};
  const auto sizes = half_decades(cfg.crossover.lo, cfg.crossover.hi);
  for (const auto& f : fams) {
    CalibratedModel m = in_stage("calibrate", [&] { return CalibratedModel(f, cfg.estimator(), cfg.calibration); });
    const auto x = in_stage("crossover", [&] { return find_crossover(m, cfg.p_P, cfg.crossover); });
    xcsv += crossover_row(f.name, cfg.p_P, x);
    j["points"].push_back(crossover_json(x));
    j["calibration"].push_back(m.report());
    const auto rows = in_stage("crossover", [&] { return scaling_curve(m, cfg.p_P, sizes); });
    scsv += scaling_csv_rows(f.name, cfg.p_P, rows);
    rcsv += ratio_csv_rows(f.name, cfg.p_P, rows);
  }
  return {{"crossover.csv", xcsv}, {"crossover.json", dump(j)}, {"scaling.csv", scsv}, {"ratio.csv", rcsv}};
}

inline std::vector<Artifact> cmd_sweep(const RunConfig& cfg, const std::vector<std::string>& family_names = {}) {
  const auto fams = select_families(cfg, family_names);
  const SweepResult s = in_stage("sweep", [&] {
    return favorability_sweep(fams, cfg.p_grid, cfg.estimator(), cfg.calibration, cfg.crossover, cfg.jobs);
  });
  nlohmann::json j = sweep_to_json(s);
  nlohmann::json mono = nlohmann::json::object();
  for (std::size_t f = 0; f < fams.size(); ++f) mono[fams[f].name] = s.monotone(f, false);
  j["boundary_nonincreasing_in_p_P"] = mono;
  return {{"sweep.csv", sweep_csv(s)}, {"crossover.csv", crossover_csv(s)}, {"sweep.json", dump(j)}};
}

/// Writes the artifacts, config.resolved.json and manifest.json into `dir`.
inline void write_run(const std::filesystem::path& dir, const std::string& command, const std::vector<std::string>& args,
                      const ResolvedConfig& rc, const std::vector<Artifact>& artifacts) {
  in_stage("io", [&] {
    std::filesystem::create_directories(dir);
    auto put = [&](const std::string& name, const std::string& content) {
      std::ofstream o(dir / name, std::ios::binary);
      if (!o) throw InvalidArgument("cannot write '" + (dir / name).string() + "'");
      o << content;
      if (!o) throw InvalidArgument("write failed for '" + (dir / name).string() + "'");
    };
    nlohmann::json files = nlohmann::json::array();
    std::vector<Artifact> all = artifacts;
    all.push_back({"config.resolved.json", dump(rc.to_json())});
    for (const auto& a : all) {
      put(a.name, a.content);
      files.push_back({{"file", a.name}, {"bytes", a.content.size()}});
    }
    put("manifest.json", dump({{"tool", "surfcomm"}, {"command", command}, {"args", args}, {"artifacts", files}}));
    return 0;
  });
}

}  // namespace surfcomm
