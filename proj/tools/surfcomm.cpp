// Command-line driver: one subcommand per pipeline stage. Every run writes
// its artifacts, config.resolved.json and manifest.json into --out.
//
// Exit status: 0 on success, 1 when a stage fails (one line on stderr,
// "surfcomm: error: <stage>: <message>"), 2 on a usage error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "surfcomm/run.hpp"

using namespace surfcomm;

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> circuit;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> pp;
  std::optional<int> policy;
  std::optional<std::string> window;
  std::vector<std::string> windows;
  std::optional<unsigned> jobs;
  std::vector<double> pp_grid;
  std::optional<std::uint64_t> max_ops;
  std::optional<std::uint32_t> qubits;
  std::optional<std::uint64_t> ops;
  std::optional<double> parallelism;
  std::optional<double> t_fraction;
  std::vector<std::string> families;
  std::vector<std::string> sets;
  std::string encoding = "both";
  bool all_policies = false;
};

// Flag values as a JSON merge patch over the config file.
nlohmann::json flag_overrides(const Flags& f) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw StageError("config", "--set expects key=value, got '" + s + "'");
    const std::string key = s.substr(0, eq), raw = s.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    nlohmann::json* at = &j;
    std::size_t start = 0;
    for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1) {
      at = &(*at)[key.substr(start, dot - start)];
      if (!at->is_object()) *at = nlohmann::json::object();
    }
    (*at)[key.substr(start)] = value;
  }
  if (f.seed) j["seed"] = *f.seed;
  if (f.out) j["out"] = *f.out;
  if (f.pp) j["p_P"] = *f.pp;
  if (f.policy) j["braid"]["policy"] = *f.policy;
  if (f.window) j["window"] = *f.window;
  if (!f.windows.empty()) j["windows"] = f.windows;
  if (f.jobs) j["jobs"] = *f.jobs;
  if (!f.pp_grid.empty()) j["p_grid"] = f.pp_grid;
  if (f.max_ops) j["calibration"]["max_ops"] = *f.max_ops;
  if (f.qubits) j["synth"]["qubits"] = *f.qubits;
  if (f.ops) j["synth"]["ops"] = *f.ops;
  if (f.parallelism) j["synth"]["parallelism"] = *f.parallelism;
  if (f.t_fraction) j["synth"]["t_fraction"] = *f.t_fraction;
  return j;
}

void add_common(CLI::App* c, Flags& f) {
  c->add_option("--config", f.config, std::string("JSON config file (default: $") + kConfigEnvVar + ")");
  c->add_option("--seed", f.seed, "Seed for synthesis and placement");
  c->add_option("--out", f.out, "Output directory");
  c->add_option("--pp", f.pp, "Physical error rate")->check(CLI::Range(0.0, 1.0));
  c->add_option("--set", f.sets, "Override any config key, e.g. --set qec.A=0.05");
}

void add_circuit(CLI::App* c, Flags& f) {
  c->add_option("--circuit", f.circuit, "Circuit file (default: synthesize from config)")->check(CLI::ExistingFile);
  c->add_option("--qubits", f.qubits, "Synthetic workload qubits")->check(CLI::PositiveNumber);
  c->add_option("--ops", f.ops, "Synthetic workload op count")->check(CLI::PositiveNumber);
  c->add_option("--parallelism", f.parallelism, "Synthetic workload parallelism factor");
  c->add_option("--t-fraction", f.t_fraction, "Synthetic workload T fraction")->check(CLI::Range(0.0, 1.0));
}

void add_policy(CLI::App* c, Flags& f) {
  c->add_option("--policy", f.policy, "Braid scheduling policy 0-6")->check(CLI::Range(0, kNumPolicies - 1));
}

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surface-code communication and resource estimation toolchain"};
  app.require_subcommand(1);
  Flags f;

  auto* parse = app.add_subcommand("parse", "Parse a circuit, export its DAG and profile");
  auto* synth = app.add_subcommand("synth", "Write a synthetic workload as a circuit file");
  auto* place = app.add_subcommand("place", "Place qubits and factories on the double-defect tile grid");
  auto* braid = app.add_subcommand("braid", "Simulate braid scheduling on the double-defect mesh");
  auto* teleport = app.add_subcommand("teleport", "Simulate EPR distribution on the planar Multi-SIMD machine");
  auto* est = app.add_subcommand("estimate", "Space-time estimate for both encodings");
  auto* xover = app.add_subcommand("crossover", "Crossover op count per workload family");
  auto* sweep = app.add_subcommand("sweep", "Crossover boundary across physical error rates");
  for (auto* c : {parse, synth, place, braid, teleport, est, xover, sweep}) add_common(c, f);
  parse->add_option("--circuit", f.circuit, "Circuit file")->check(CLI::ExistingFile)->required();
  synth->add_option("--qubits", f.qubits, "Qubits")->check(CLI::PositiveNumber);
  synth->add_option("--ops", f.ops, "Op count")->check(CLI::PositiveNumber);
  synth->add_option("--parallelism", f.parallelism, "Parallelism factor");
  synth->add_option("--t-fraction", f.t_fraction, "Fraction of T gates")->check(CLI::Range(0.0, 1.0));
  for (auto* c : {place, braid, teleport, est}) add_circuit(c, f);
  for (auto* c : {place, braid, est}) add_policy(c, f);
  braid->add_flag("--all-policies", f.all_policies, "Also run every other policy for stats.csv");
  for (auto* c : {teleport, est}) c->add_option("--window", f.window, "EPR window: tune, inf or cycles");
  teleport->add_option("--windows", f.windows, "Windows to sweep (cycles or inf)");
  est->add_option("--encoding", f.encoding, "planar, double_defect or both")
      ->check(CLI::IsMember({"planar", "double_defect", "both"}));
  for (auto* c : {xover, sweep}) {
    c->add_option("--family", f.families, "Restrict to these workload families");
    c->add_option("--max-ops", f.max_ops, "Largest directly simulated op count")->check(CLI::PositiveNumber);
  }
  sweep->add_option("--pp-grid", f.pp_grid, "Physical error rates")->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--jobs", f.jobs, "Parallel sweep cells")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "surfcomm: usage error: " << one_line(e.what()) << "\n" << app.help();
    return 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    const ResolvedConfig rc = resolve_config(f.config, flag_overrides(f));
    const RunConfig& cfg = rc.config;
    std::vector<Artifact> out;
    if (name == "parse")
      out = cmd_parse(cfg, load_circuit(cfg, f.circuit));
    else if (name == "synth")
      out = cmd_synth(cfg);
    else if (name == "place")
      out = cmd_place(cfg, load_circuit(cfg, f.circuit));
    else if (name == "braid")
      out = cmd_braid(cfg, load_circuit(cfg, f.circuit), f.all_policies);
    else if (name == "teleport")
      out = cmd_teleport(cfg, load_circuit(cfg, f.circuit));
    else if (name == "estimate")
      out = cmd_estimate(cfg, load_circuit(cfg, f.circuit), f.encoding);
    else if (name == "crossover")
      out = cmd_crossover(cfg, f.families);
    else
      out = cmd_sweep(cfg, f.families);
    std::vector<std::string> args(argv + 1, argv + argc);
    write_run(cfg.out, name, args, rc, out);
    std::cout << "wrote " << out.size() + 2 << " files to " << cfg.out << "\n";
    return 0;
  } catch (const StageError& e) {
    std::cerr << "surfcomm: error: " << one_line(e.what()) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "surfcomm: error: " << name << ": " << one_line(e.what()) << "\n";
  }
  return 1;
}
