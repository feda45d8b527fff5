#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "surfcomm/circuit.hpp"
#include "surfcomm/error.hpp"

namespace surfcomm {

/// Knobs beyond the level structure. Defaults give a Clifford+T mix with
/// nearest-neighbour-biased two-qubit interactions on a ring of qubits.
struct SynthOptions {
  /// Fraction of non-T ops that are CNOTs.
  double cnot_fraction = 0.5;
  /// Mean ring distance between CNOT partners; 0 picks partners uniformly.
  double partner_span = 4.0;
  /// Probability that a non-leading op in a level continues a qubit touched
  /// in the previous level rather than an arbitrary idle one.
  double frontier_bias = 0.7;
};

/// Layered random workload. Ops are generated level by level and the first op
/// of every level extends the deepest chain, so the ASAP level count equals
/// the number of generated levels and the parallelism factor is
/// total_ops / levels.
inline LogicalCircuit synth_workload(std::uint32_t num_qubits, std::size_t total_ops,
                                     double target_parallelism, double t_fraction,
                                     std::uint64_t seed, const SynthOptions& opt = {}) {
  if (num_qubits == 0 || total_ops == 0)
    throw InvalidArgument("synth_workload: need at least one qubit and one op");
  if (!(target_parallelism >= 1.0))
    throw InvalidArgument("synth_workload: target parallelism must be >= 1");
  if (target_parallelism > static_cast<double>(num_qubits))
    throw InvalidArgument("synth_workload: target parallelism exceeds qubit count");
  if (!(t_fraction >= 0.0 && t_fraction <= 1.0))
    throw InvalidArgument("synth_workload: t_fraction must lie in [0, 1]");

  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto pick = [&rng](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };

  const std::size_t levels = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(static_cast<double>(total_ops) / target_parallelism)),
      1, total_ops);
  const std::size_t cap = num_qubits;
  const double mean = static_cast<double>(total_ops) / static_cast<double>(levels);

  std::vector<std::size_t> width(levels);
  {
    const auto lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(mean * 0.5)));
    const auto hi = std::max(lo, std::min(cap, static_cast<std::size_t>(std::ceil(mean * 1.5))));
    std::size_t sum = 0;
    for (auto& w : width) {
      w = lo + pick(hi - lo + 1);
      sum += w;
    }
    while (sum < total_ops) {
      auto& w = width[pick(levels)];
      if (w < cap) ++w, ++sum;
    }
    while (sum > total_ops) {
      auto& w = width[pick(levels)];
      if (w > 1) --w, --sum;
    }
  }

  LogicalCircuit c(num_qubits);
  std::vector<char> used(num_qubits, 0);
  // ASAP level of the latest op on each qubit, -1 if untouched.
  std::vector<std::int64_t> last_level(num_qubits, -1);
  std::vector<QubitId> free_list;
  std::size_t carry = 0;

  auto take_free = [&](QubitId near, bool local) -> std::optional<QubitId> {
    if (local && opt.partner_span > 0.0) {
      std::geometric_distribution<int> geo(1.0 / (1.0 + opt.partner_span));
      const int step = 1 + geo(rng);
      const int sign = pick(2) ? 1 : -1;
      const auto n = static_cast<std::int64_t>(num_qubits);
      const std::int64_t target = ((static_cast<std::int64_t>(near) + sign * step) % n + n) % n;
      for (std::int64_t off = 0; off < n; ++off) {
        for (std::int64_t s : {off, -off}) {
          auto q = static_cast<QubitId>(((target + s) % n + n) % n);
          if (!used[q]) return q;
        }
      }
      return std::nullopt;
    }
    free_list.clear();
    for (QubitId q = 0; q < num_qubits; ++q)
      if (!used[q]) free_list.push_back(q);
    if (free_list.empty()) return std::nullopt;
    return free_list[pick(free_list.size())];
  };

  for (std::size_t level = 0; level < levels || carry > 0; ++level) {
    const std::size_t want = (level < levels ? width[level] : 0) + carry;
    carry = 0;
    std::fill(used.begin(), used.end(), 0);
    // Qubits whose latest op sits exactly one level down: an op on any of
    // them lands on this level.
    std::vector<QubitId> frontier;
    for (QubitId q = 0; q < num_qubits; ++q)
      if (last_level[q] == static_cast<std::int64_t>(level) - 1) frontier.push_back(q);

    for (std::size_t j = 0; j < want; ++j) {
      std::optional<QubitId> primary;
      const bool lead = (j == 0 && level > 0);
      if ((lead || uniform(0, 1) < opt.frontier_bias) && !frontier.empty())
        primary = frontier[pick(frontier.size())];
      if (!primary) primary = take_free(0, false);
      if (!primary) {
        carry = want - j;
        break;
      }
      used[*primary] = 1;
      std::erase(frontier, *primary);

      OpKind kind;
      std::optional<QubitId> partner;
      if (uniform(0, 1) < t_fraction) {
        kind = OpKind::T;
      } else if (uniform(0, 1) < opt.cnot_fraction &&
                 (partner = take_free(*primary, true)).has_value()) {
        kind = OpKind::CNOT;
        used[*partner] = 1;
        std::erase(frontier, *partner);
      } else {
        constexpr OpKind kCliffords[] = {OpKind::H, OpKind::X, OpKind::Z, OpKind::S};
        kind = kCliffords[pick(4)];
      }
      if (kind == OpKind::CNOT) {
        if (pick(2)) std::swap(*primary, *partner);
        c.add(kind, *primary, *partner);
        const std::int64_t at = std::max(last_level[*primary], last_level[*partner]) + 1;
        last_level[*primary] = last_level[*partner] = at;
      } else {
        c.add(kind, *primary);
        last_level[*primary] += 1;
      }
    }
  }
  return c;
}

}  // namespace surfcomm
