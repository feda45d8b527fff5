#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "surfcomm/error.hpp"

namespace surfcomm {

using QubitId = std::uint32_t;
using OpId = std::uint32_t;

enum class OpKind : std::uint8_t { H, X, Z, S, T, CNOT, MEASURE, PREPARE };

inline constexpr std::array<OpKind, 8> kAllOpKinds = {
    OpKind::H, OpKind::X,    OpKind::Z,       OpKind::S,
    OpKind::T, OpKind::CNOT, OpKind::MEASURE, OpKind::PREPARE};

inline constexpr std::string_view op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::H: return "h";
    case OpKind::X: return "x";
    case OpKind::Z: return "z";
    case OpKind::S: return "s";
    case OpKind::T: return "t";
    case OpKind::CNOT: return "cnot";
    case OpKind::MEASURE: return "measure";
    case OpKind::PREPARE: return "prepare";
  }
  return "?";
}

inline std::optional<OpKind> op_kind_from_name(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (OpKind k : kAllOpKinds)
    if (op_kind_name(k) == lower) return k;
  return std::nullopt;
}

inline constexpr int arity(OpKind k) { return k == OpKind::CNOT ? 2 : 1; }
inline constexpr bool consumes_magic_state(OpKind k) { return k == OpKind::T; }

struct LogicalOp {
  OpId id = 0;
  OpKind kind = OpKind::H;
  std::array<QubitId, 2> operands{0, 0};

  int num_operands() const { return arity(kind); }
  QubitId operand(int i) const { return operands[static_cast<std::size_t>(i)]; }
  bool touches(QubitId q) const {
    return operands[0] == q || (kind == OpKind::CNOT && operands[1] == q);
  }

  friend bool operator==(const LogicalOp&, const LogicalOp&) = default;
};

/// An ordered list of logical operations on `num_qubits` qubits.
/// Op ids equal their position in the list.
class LogicalCircuit {
 public:
  LogicalCircuit() = default;
  explicit LogicalCircuit(std::uint32_t num_qubits) : num_qubits_(num_qubits) {}

  std::uint32_t num_qubits() const { return num_qubits_; }
  const std::vector<LogicalOp>& ops() const { return ops_; }
  std::size_t size() const { return ops_.size(); }
  const LogicalOp& op(OpId id) const { return ops_.at(id); }

  OpId add(OpKind kind, QubitId q0, QubitId q1 = 0) {
    if (q0 >= num_qubits_ || (kind == OpKind::CNOT && q1 >= num_qubits_))
      throw InvalidArgument("operand out of range");
    if (kind == OpKind::CNOT && q0 == q1)
      throw InvalidArgument("cnot operands must be distinct");
    LogicalOp op;
    op.id = static_cast<OpId>(ops_.size());
    op.kind = kind;
    op.operands = {q0, kind == OpKind::CNOT ? q1 : 0};
    ops_.push_back(op);
    return op.id;
  }

  std::size_t count(OpKind kind) const {
    return static_cast<std::size_t>(std::count_if(
        ops_.begin(), ops_.end(), [kind](const LogicalOp& o) { return o.kind == kind; }));
  }

  friend bool operator==(const LogicalCircuit&, const LogicalCircuit&) = default;

 private:
  std::uint32_t num_qubits_ = 0;
  std::vector<LogicalOp> ops_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<std::uint64_t> parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses the line-oriented circuit format:
///
///     # comment
///     qubits 3
///     h q0
///     cnot q0 q2
///
/// Gate names are case-insensitive. Throws ParseError with the offending line.
inline LogicalCircuit parse_qasm(std::string_view text) {
  std::optional<LogicalCircuit> circuit;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    auto tokens = detail::split_ws(line);
    std::string head(tokens[0]);
    std::transform(head.begin(), head.end(), head.begin(),
                   [](unsigned char c) { return std::tolower(c); });

    if (head == "qubits") {
      if (circuit) throw ParseError(line_no, "duplicate qubit declaration");
      if (tokens.size() != 2) throw ParseError(line_no, "expected 'qubits <N>'");
      auto n = detail::parse_uint(tokens[1]);
      if (!n || *n == 0 || *n > UINT32_MAX) throw ParseError(line_no, "invalid qubit count");
      circuit.emplace(static_cast<std::uint32_t>(*n));
      continue;
    }
    if (!circuit) throw ParseError(line_no, "expected 'qubits <N>' before any gate");

    auto kind = op_kind_from_name(tokens[0]);
    if (!kind) throw ParseError(line_no, "unknown gate '" + std::string(tokens[0]) + "'");
    const int want = arity(*kind);
    if (static_cast<int>(tokens.size()) - 1 != want)
      throw ParseError(line_no, std::string(op_kind_name(*kind)) + " expects " +
                                    std::to_string(want) + " operand(s)");

    std::array<QubitId, 2> q{0, 0};
    for (int i = 0; i < want; ++i) {
      std::string_view tok = tokens[static_cast<std::size_t>(i) + 1];
      if (tok.size() < 2 || (tok[0] != 'q' && tok[0] != 'Q'))
        throw ParseError(line_no, "malformed operand '" + std::string(tok) + "'");
      auto idx = detail::parse_uint(tok.substr(1));
      if (!idx) throw ParseError(line_no, "malformed operand '" + std::string(tok) + "'");
      if (*idx >= circuit->num_qubits())
        throw ParseError(line_no, "operand q" + std::to_string(*idx) + " out of range");
      q[static_cast<std::size_t>(i)] = static_cast<QubitId>(*idx);
    }
    if (*kind == OpKind::CNOT && q[0] == q[1])
      throw ParseError(line_no, "cnot operands must be distinct");
    circuit->add(*kind, q[0], q[1]);
  }
  if (!circuit) throw ParseError(line_no, "missing 'qubits <N>' header");
  return *std::move(circuit);
}

/// Inverse of parse_qasm: canonical lower-case text, one op per line.
inline std::string to_qasm(const LogicalCircuit& c) {
  std::ostringstream out;
  out << "qubits " << c.num_qubits() << '\n';
  for (const LogicalOp& op : c.ops()) {
    out << op_kind_name(op.kind) << " q" << op.operands[0];
    if (op.kind == OpKind::CNOT) out << " q" << op.operands[1];
    out << '\n';
  }
  return out.str();
}

}  // namespace surfcomm
