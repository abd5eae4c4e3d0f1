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

#include "qced/circuits.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "qced/qcore.hpp"
#include "testutil.hpp"

using namespace qced;
using circuits::GateKind;

TEST_CASE("parse well-formed circuits") {
  auto c = circuits::parse_circuit_or_throw("qubits 1\nH 0\nMEASURE 0\n");
  REQUIRE(c.initial_wires == 1);
  REQUIRE(c.ops.size() == 2);
  REQUIRE(c.ops[0].kind == GateKind::H);
  REQUIRE(c.ops[1].kind == GateKind::MEASURE);
  REQUIRE(c.final_wires == 1);

  auto c2 = circuits::parse_circuit_or_throw("qubits 2\nCNOT 0 1\nR 1\n");
  REQUIRE(c2.initial_wires == 2);
  REQUIRE(circuits::resources(c2).r_gate_count == 1);

  // Comments, blank lines, mixed case.
  auto c3 = circuits::parse_circuit_or_throw(
      "# bell pair\nQubits 2\n\nh 0   # hadamard\ncnot 0 1\n");
  REQUIRE(c3.ops.size() == 2);
  REQUIRE(c3.ops[1].kind == GateKind::CNOT);

  // AUX allocates the next wire index and the new wire is usable.
  auto c4 = circuits::parse_circuit_or_throw("qubits 1\nAUX\nCNOT 0 1\n");
  REQUIRE(c4.final_wires == 2);
  REQUIRE(c4.ops[0].wires[0] == 1);
  REQUIRE(circuits::validate(c4).empty());
}

TEST_CASE("parse errors carry line numbers") {
  auto dup = circuits::parse_circuit("qubits 1\nCNOT 0 0\n");
  REQUIRE_FALSE(dup.ok());
  REQUIRE(dup.errors.size() == 1);
  REQUIRE(dup.errors[0].line == 2);
  REQUIRE(dup.errors[0].message.find("duplicate") != std::string::npos);

  auto unknown = circuits::parse_circuit("qubits 1\nFOO 0\n");
  REQUIRE_FALSE(unknown.ok());
  REQUIRE(unknown.errors[0].line == 2);
  REQUIRE(unknown.errors[0].message.find("FOO") != std::string::npos);

  auto range = circuits::parse_circuit("qubits 2\nX 5\n");
  REQUIRE_FALSE(range.ok());
  REQUIRE(range.errors[0].message.find("out of range") != std::string::npos);

  auto reuse = circuits::parse_circuit("qubits 1\nMEASURE 0\nX 0\n");
  REQUIRE_FALSE(reuse.ok());
  REQUIRE(reuse.errors[0].line == 3);
  REQUIRE(reuse.errors[0].message.find("already measured") != std::string::npos);

  auto no_header = circuits::parse_circuit("X 0\n");
  REQUIRE_FALSE(no_header.ok());
  REQUIRE(no_header.errors[0].message.find("header") != std::string::npos);

  // Multiple bad lines each reported.
  auto multi = circuits::parse_circuit("qubits 1\nBAD 0\nZ 7\n");
  REQUIRE(multi.errors.size() == 2);
  REQUIRE(multi.errors[0].line == 2);
  REQUIRE(multi.errors[1].line == 3);
}

TEST_CASE("validate reports violations without throwing") {
  circuits::Circuit ok =
      circuits::parse_circuit_or_throw("qubits 2\nH 0\nCNOT 0 1\n");
  REQUIRE(circuits::validate(ok).empty());

  circuits::Circuit bad = ok;
  bad.ops.push_back({GateKind::MEASURE, {0, 0}});
  bad.ops.push_back({GateKind::X, {0, 0}});
  auto violations = circuits::validate(bad);
  REQUIRE(violations.size() == 1);
  REQUIRE(violations[0].find("wire 0 already measured") != std::string::npos);

  // Idempotent.
  REQUIRE(circuits::validate(bad) == violations);

  circuits::Circuit aux = circuits::parse_circuit_or_throw("qubits 1\nAUX\nH 1\n");
  REQUIRE(circuits::validate(aux).empty());

  circuits::Circuit wrong_final = ok;
  wrong_final.final_wires = 7;
  REQUIRE_FALSE(circuits::validate(wrong_final).empty());
}

TEST_CASE("resource accounting") {
  auto three_r = circuits::parse_circuit_or_throw("qubits 2\nR 0\nR 1\nR 0\n");
  REQUIRE(circuits::resources(three_r) == circuits::ResourceReport{3, 3, 3, 3});

  auto clifford =
      circuits::parse_circuit_or_throw("qubits 2\nH 0\nCNOT 0 1\nP 1\n");
  REQUIRE(circuits::resources(clifford) == circuits::ResourceReport{0, 0, 0, 0});
  REQUIRE(clifford.is_clifford_only());

  circuits::Circuit empty;
  empty.initial_wires = 1;
  empty.final_wires = 1;
  REQUIRE(circuits::resources(empty) == circuits::ResourceReport{0, 0, 0, 0});
}

TEST_CASE("serialize / parse round trip on random circuits") {
  qcore::Rng rng(404);
  testutil::RandomCircuitParams params;
  for (int trial = 0; trial < 50; ++trial) {
    auto c = testutil::random_circuit(params, rng);
    REQUIRE(circuits::validate(c).empty());
    auto back = circuits::parse_circuit(circuits::serialize(c));
    REQUIRE(back.ok());
    REQUIRE(*back.circuit == c);
  }
}

TEST_CASE("resources are additive under concatenation") {
  qcore::Rng rng(405);
  testutil::RandomCircuitParams params;
  params.max_ops = 15;
  for (int trial = 0; trial < 20; ++trial) {
    auto head = testutil::random_circuit(params, rng);
    // A continuation referencing only wires live after head.
    circuits::Circuit tail;
    tail.initial_wires = head.final_wires;
    tail.final_wires = head.final_wires;
    auto live = head.live_wires_at_end();
    if (!live.empty()) {
      for (int i = 0; i < 6; ++i) {
        const int w = live[rng.next_word() % live.size()];
        tail.ops.push_back({i % 2 ? GateKind::R : GateKind::H, {w, 0}});
      }
    }
    auto joined = circuits::concatenate(head, tail);
    REQUIRE(circuits::validate(joined).empty());
    auto sum = circuits::resources(joined);
    REQUIRE(sum.r_gate_count == circuits::resources(head).r_gate_count +
                                    circuits::resources(tail).r_gate_count);
    REQUIRE(sum.aux_qubits_sent == sum.r_gate_count);
    REQUIRE(sum.classical_bits_client_to_server == sum.r_gate_count);
    REQUIRE(sum.classical_bits_server_to_client == sum.r_gate_count);
  }
}

TEST_CASE("live wire tracking") {
  auto c = circuits::parse_circuit_or_throw(
      "qubits 3\nMEASURE 1\nAUX\nR 3\nMEASURE 0\n");
  REQUIRE(c.live_wires_at_end() == std::vector<int>{2, 3});
  REQUIRE(c.measured_wires() == std::vector<int>{1, 0});
  REQUIRE(c.r_gate_count() == 1);
  REQUIRE_FALSE(c.is_clifford_only());
}
