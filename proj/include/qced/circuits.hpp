// Copyright 2026 The qced Contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

// Circuit intermediate representation, text-format parser, gate-set
// validator, and resource accounting.
//
// Text format (one directive per line, '#' starts a comment, mnemonics are
// case-insensitive):
//
//   qubits <n>
//   X <w> | Z <w> | H <w> | P <w> | R <w>
//   CNOT <control> <target>
//   MEASURE <w>
//   AUX
//
// AUX allocates the next wire index. A measured wire becomes classical and
// may not receive further gates.
namespace qced::circuits {

enum class GateKind { X, Z, H, P, CNOT, R, MEASURE, AUX };

inline std::string_view gate_name(GateKind k) {
  switch (k) {
    case GateKind::X: return "X";
    case GateKind::Z: return "Z";
    case GateKind::H: return "H";
    case GateKind::P: return "P";
    case GateKind::CNOT: return "CNOT";
    case GateKind::R: return "R";
    case GateKind::MEASURE: return "MEASURE";
    case GateKind::AUX: return "AUX";
  }
  return "?";
}

/// One circuit element. For AUX, wires[0] holds the newly allocated index.
struct GateOp {
  GateKind kind = GateKind::X;
  int wires[2] = {0, 0};
  int arity() const { return kind == GateKind::CNOT ? 2 : 1; }
  friend bool operator==(const GateOp& l, const GateOp& r) {
    return l.kind == r.kind && l.wires[0] == r.wires[0] &&
           (l.kind != GateKind::CNOT || l.wires[1] == r.wires[1]);
  }
};

struct Circuit {
  int initial_wires = 0;
  std::vector<GateOp> ops;
  int final_wires = 0;  // initial_wires + number of AUX ops

  int r_gate_count() const {
    return static_cast<int>(std::count_if(ops.begin(), ops.end(), [](auto& op) {
      return op.kind == GateKind::R;
    }));
  }
  int measure_count() const {
    return static_cast<int>(std::count_if(ops.begin(), ops.end(), [](auto& op) {
      return op.kind == GateKind::MEASURE;
    }));
  }
  bool is_clifford_only() const {
    return std::none_of(ops.begin(), ops.end(), [](auto& op) {
      return op.kind == GateKind::R || op.kind == GateKind::MEASURE;
    });
  }

  /// Wires still quantum after all ops, in ascending order.
  std::vector<int> live_wires_at_end() const {
    std::set<int> live;
    for (int w = 0; w < initial_wires; ++w) live.insert(w);
    int next = initial_wires;
    for (const auto& op : ops) {
      if (op.kind == GateKind::AUX) live.insert(next++);
      if (op.kind == GateKind::MEASURE) live.erase(op.wires[0]);
    }
    return {live.begin(), live.end()};
  }

  std::vector<int> measured_wires() const {
    std::vector<int> out;
    for (const auto& op : ops) {
      if (op.kind == GateKind::MEASURE) out.push_back(op.wires[0]);
    }
    return out;
  }

  friend bool operator==(const Circuit& l, const Circuit& r) {
    return l.initial_wires == r.initial_wires && l.ops == r.ops &&
           l.final_wires == r.final_wires;
  }
};

/// Interactive cost of a circuit under the delegation protocol. Every count
/// tracks the pi/8 gadget: one auxiliary qubit and one classical bit in each
/// direction per R gate; Clifford-only circuits are non-interactive.
struct ResourceReport {
  int r_gate_count = 0;
  int aux_qubits_sent = 0;
  int classical_bits_client_to_server = 0;
  int classical_bits_server_to_client = 0;
  friend bool operator==(const ResourceReport&, const ResourceReport&) = default;
};

inline ResourceReport resources(const Circuit& c) {
  const int r = c.r_gate_count();
  return {r, r, r, r};
}

struct ParseError {
  int line = 0;  // 1-based; 0 when the whole input is at fault
  std::string message;
};

struct ParseResult {
  std::optional<Circuit> circuit;
  std::vector<ParseError> errors;
  bool ok() const { return circuit.has_value() && errors.empty(); }
};

/// Checks the structural invariants: every referenced wire is live at that
/// point (allocated and not yet measured), CNOT wires distinct. Returns the
/// violations instead of throwing; idempotent.
inline std::vector<std::string> validate(const Circuit& c) {
  std::vector<std::string> violations;
  if (c.initial_wires < 0) {
    violations.push_back("negative initial wire count");
    return violations;
  }
  int aux_count = 0;
  std::set<int> measured;
  auto live = [&](int w) {
    return w >= 0 && w < c.initial_wires + aux_count && !measured.count(w);
  };
  auto complain = [&](size_t op_index, const std::string& what) {
    violations.push_back("op " + std::to_string(op_index) + " (" +
                         std::string(gate_name(c.ops[op_index].kind)) +
                         "): " + what);
  };
  for (size_t i = 0; i < c.ops.size(); ++i) {
    const GateOp& op = c.ops[i];
    switch (op.kind) {
      case GateKind::AUX:
        if (op.wires[0] != c.initial_wires + aux_count) {
          complain(i, "AUX wire index must be the next unallocated index");
        }
        ++aux_count;
        break;
      case GateKind::CNOT:
        if (op.wires[0] == op.wires[1]) {
          complain(i, "duplicate wires");
        }
        for (int j = 0; j < 2; ++j) {
          if (!live(op.wires[j])) {
            complain(i, measured.count(op.wires[j])
                            ? "wire " + std::to_string(op.wires[j]) +
                                  " already measured"
                            : "wire " + std::to_string(op.wires[j]) +
                                  " out of range");
          }
        }
        break;
      case GateKind::MEASURE:
        if (!live(op.wires[0])) {
          complain(i, measured.count(op.wires[0])
                          ? "wire " + std::to_string(op.wires[0]) +
                                " already measured"
                          : "wire " + std::to_string(op.wires[0]) +
                                " out of range");
        } else {
          measured.insert(op.wires[0]);
        }
        break;
      default:
        if (!live(op.wires[0])) {
          complain(i, measured.count(op.wires[0])
                          ? "wire " + std::to_string(op.wires[0]) +
                                " already measured"
                          : "wire " + std::to_string(op.wires[0]) +
                                " out of range");
        }
        break;
    }
  }
  if (c.final_wires != c.initial_wires + aux_count) {
    violations.push_back("final_wires != initial_wires + AUX count");
  }
  return violations;
}

namespace detail {
inline std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : line) {
    if (ch == '#') break;
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return s;
}

inline std::optional<int> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  int value = 0;
  for (char ch : s) {
    if (!std::isdigit(static_cast<unsigned char>(ch))) return std::nullopt;
    value = value * 10 + (ch - '0');
    if (value > 1'000'000) return std::nullopt;
  }
  return value;
}
}  // namespace detail

/// Parses the text format; reports every offending line with its number.
inline ParseResult parse_circuit(std::string_view text) {
  ParseResult result;
  Circuit c;
  bool have_header = false;
  int aux_count = 0;
  std::set<int> measured;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;

  auto live = [&](int w) {
    return w >= 0 && w < c.initial_wires + aux_count && !measured.count(w);
  };
  auto fail = [&](int line, std::string msg) {
    result.errors.push_back({line, std::move(msg)});
  };
  auto check_target = [&](int line, int w) {
    if (!live(w)) {
      if (measured.count(w)) {
        fail(line, "wire " + std::to_string(w) + " already measured");
      } else {
        fail(line, "wire " + std::to_string(w) + " out of range");
      }
      return false;
    }
    return true;
  };

  while (std::getline(in, raw)) {
    ++line_no;
    auto tokens = detail::tokenize(raw);
    if (tokens.empty()) continue;
    const std::string mnemonic = detail::upper(tokens[0]);
    if (!have_header) {
      if (mnemonic != "QUBITS") {
        fail(line_no, "missing 'qubits <n>' header");
        return result;
      }
      auto n = tokens.size() == 2 ? detail::parse_int(tokens[1]) : std::nullopt;
      if (!n || *n < 1) {
        fail(line_no, "'qubits' needs one positive integer argument");
        return result;
      }
      c.initial_wires = *n;
      have_header = true;
      continue;
    }
    if (mnemonic == "QUBITS") {
      fail(line_no, "duplicate 'qubits' header");
      continue;
    }
    if (mnemonic == "AUX") {
      if (tokens.size() != 1) {
        fail(line_no, "AUX takes no arguments");
        continue;
      }
      c.ops.push_back({GateKind::AUX, {c.initial_wires + aux_count, 0}});
      ++aux_count;
      continue;
    }
    GateKind kind;
    if (mnemonic == "X") kind = GateKind::X;
    else if (mnemonic == "Z") kind = GateKind::Z;
    else if (mnemonic == "H") kind = GateKind::H;
    else if (mnemonic == "P") kind = GateKind::P;
    else if (mnemonic == "R") kind = GateKind::R;
    else if (mnemonic == "CNOT") kind = GateKind::CNOT;
    else if (mnemonic == "MEASURE") kind = GateKind::MEASURE;
    else {
      fail(line_no, "unknown mnemonic '" + tokens[0] + "'");
      continue;
    }
    const size_t want = kind == GateKind::CNOT ? 2 : 1;
    if (tokens.size() != want + 1) {
      fail(line_no, mnemonic + " takes " + std::to_string(want) + " wire " +
                        (want == 1 ? "argument" : "arguments"));
      continue;
    }
    int wires[2] = {0, 0};
    bool ok = true;
    for (size_t j = 0; j < want; ++j) {
      auto w = detail::parse_int(tokens[j + 1]);
      if (!w) {
        fail(line_no, "bad wire index '" + tokens[j + 1] + "'");
        ok = false;
        break;
      }
      wires[j] = *w;
    }
    if (!ok) continue;
    if (kind == GateKind::CNOT && wires[0] == wires[1]) {
      fail(line_no, "duplicate wires");
      continue;
    }
    for (size_t j = 0; j < want; ++j) ok = check_target(line_no, wires[j]) && ok;
    if (!ok) continue;
    if (kind == GateKind::MEASURE) measured.insert(wires[0]);
    c.ops.push_back({kind, {wires[0], wires[1]}});
  }
  if (!have_header) {
    fail(0, "missing 'qubits <n>' header");
    return result;
  }
  c.final_wires = c.initial_wires + aux_count;
  if (result.errors.empty()) result.circuit = std::move(c);
  return result;
}

inline Circuit parse_circuit_or_throw(std::string_view text) {
  auto r = parse_circuit(text);
  if (!r.ok()) {
    std::string msg = "circuit parse failed:";
    for (const auto& e : r.errors) {
      msg += "\n  line " + std::to_string(e.line) + ": " + e.message;
    }
    throw std::invalid_argument(msg);
  }
  return *r.circuit;
}

/// Canonical text form; parse(serialize(c)) == c for valid circuits.
inline std::string serialize(const Circuit& c) {
  std::string out = "qubits " + std::to_string(c.initial_wires) + "\n";
  for (const auto& op : c.ops) {
    out += gate_name(op.kind);
    if (op.kind == GateKind::CNOT) {
      out += " " + std::to_string(op.wires[0]) + " " + std::to_string(op.wires[1]);
    } else if (op.kind != GateKind::AUX) {
      out += " " + std::to_string(op.wires[0]);
    }
    out += "\n";
  }
  return out;
}

/// Appends `tail`'s ops to `head`. `tail` must be phrased as a continuation:
/// its initial width equals head's final width and it references only wires
/// live after head.
inline Circuit concatenate(const Circuit& head, const Circuit& tail) {
  if (tail.initial_wires != head.final_wires) {
    throw std::invalid_argument("tail is not a continuation of head");
  }
  Circuit out = head;
  out.ops.insert(out.ops.end(), tail.ops.begin(), tail.ops.end());
  out.final_wires = head.final_wires + (tail.final_wires - tail.initial_wires);
  return out;
}

}  // namespace qced::circuits
