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

// Gate and circuit identities behind the gadget constructions, checked by
// simulation: commutation rules of X/Z/P/R, the X-teleportation circuit, the
// commute-through-control identities, the entangled auxiliary-qubit
// preparation, and the step-by-step derivation of the R gadget's key rule.

#include <catch2/catch_amalgamated.hpp>

#include "qced/qcore.hpp"
#include "testutil.hpp"

using namespace qced;
using qcore::Matrix;
using qcore::StateVector;
using testutil::matrices_equal_up_to_phase;

namespace {

Matrix g(const char* name) { return qcore::standard_gate(name).matrix; }

Matrix mpow(const Matrix& m, int e) {
  Matrix out = Matrix::Identity(2, 2);
  for (int i = 0; i < e; ++i) out = m * out;
  return out;
}

/// X^x Z^z P^p as a single-qubit matrix (left-to-right operator order).
Matrix word(int x, int z, int p) {
  return mpow(g("X"), x) * mpow(g("Z"), z) * mpow(g("P"), p);
}

struct TeleportBranch {
  int c;
  double probability;
  StateVector surviving;  // the lower wire after the upper wire is removed
};

/// CNOT with the lower wire as control into the upper (data) wire, then a
/// computational-basis measurement of the data wire.
std::vector<TeleportBranch> teleport_circuit(const StateVector& data,
                                             const StateVector& lower) {
  auto joint = data.tensor(lower);
  joint = qcore::apply_gate(joint, qcore::standard_gate("CNOT"), {1, 0});
  std::vector<TeleportBranch> out;
  for (const auto& b : qcore::measure_branches(joint, 0)) {
    out.push_back({b.outcome, b.probability,
                   qcore::remove_collapsed_wire(b.post_state, 0, b.outcome)});
  }
  return out;
}

StateVector plus_state() {
  return qcore::apply_gate(StateVector(1), qcore::standard_gate("H"), {0});
}

}  // namespace

TEST_CASE("single-qubit gate identities hold up to global phase") {
  REQUIRE(matrices_equal_up_to_phase(g("X") * g("Z"), g("Z") * g("X")));
  REQUIRE(matrices_equal_up_to_phase(g("P") * g("Z"), g("Z") * g("P")));
  REQUIRE(matrices_equal_up_to_phase(g("P") * g("X"),
                                     g("X") * g("Z") * g("P")));
  REQUIRE(matrices_equal_up_to_phase(g("R") * g("Z"), g("Z") * g("R")));
  REQUIRE(matrices_equal_up_to_phase(g("R") * g("X"),
                                     g("X") * g("Z") * g("P") * g("R")));
  REQUIRE(matrices_equal_up_to_phase(g("P") * g("P"), g("Z")));
  // P^{a xor b} = Z^{a b} P^{a + b}, with the P exponent taken mod 4.
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      CAPTURE(a, b);
      REQUIRE(matrices_equal_up_to_phase(
          mpow(g("P"), a ^ b), mpow(g("Z"), a * b) * mpow(g("P"), a + b)));
    }
  }
}

TEST_CASE("perturbing R breaks RX = XZPR") {
  Matrix r = g("R");
  r(1, 1) *= std::polar(1.0, 1e-3);
  REQUIRE_FALSE(matrices_equal_up_to_phase(r * g("X"),
                                           g("X") * g("Z") * g("P") * r, 1e-6));
}

TEST_CASE("X-teleportation circuit") {
  qcore::Rng rng(2024);
  for (int trial = 0; trial < 8; ++trial) {
    auto psi = qcore::random_state(1, rng);
    auto branches = teleport_circuit(psi, plus_state());
    REQUIRE(branches.size() == 2);
    for (const auto& b : branches) {
      CAPTURE(trial, b.c);
      REQUIRE(b.probability == Catch::Approx(0.5).margin(1e-12));
      auto want = b.c ? qcore::apply_gate(psi, qcore::standard_gate("X"), {0})
                      : psi;
      REQUIRE(qcore::fidelity_up_to_global_phase(b.surviving, want) >=
              1.0 - 1e-12);
    }
  }
}

TEST_CASE("P and Z commute with control") {
  qcore::Rng rng(99);
  for (const char* gate : {"P", "Z"}) {
    for (int trial = 0; trial < 5; ++trial) {
      auto psi = qcore::random_state(1, rng);
      auto lower =
          qcore::apply_gate(plus_state(), qcore::standard_gate(gate), {0});
      for (const auto& b : teleport_circuit(psi, lower)) {
        CAPTURE(gate, trial, b.c);
        auto want = b.c ? qcore::apply_gate(psi, qcore::standard_gate("X"), {0})
                        : psi;
        want = qcore::apply_gate(want, qcore::standard_gate(gate), {0});
        REQUIRE(qcore::fidelity_up_to_global_phase(b.surviving, want) >=
                1.0 - 1e-12);
      }
    }
  }
}

TEST_CASE("entangled circuit prepares Z^d P^y |+>") {
  for (int y = 0; y < 2; ++y) {
    auto joint = StateVector(2);
    joint = qcore::apply_gate(joint, qcore::standard_gate("H"), {0});
    joint = qcore::apply_gate(joint, qcore::standard_gate("CNOT"), {0, 1});
    if (y) joint = qcore::apply_gate(joint, qcore::standard_gate("P"), {1});
    joint = qcore::apply_gate(joint, qcore::standard_gate("H"), {1});
    auto branches = qcore::measure_branches(joint, 1);
    REQUIRE(branches.size() == 2);
    for (const auto& b : branches) {
      const int d = b.outcome;
      CAPTURE(y, d);
      REQUIRE(b.probability == Catch::Approx(0.5).margin(1e-12));
      auto surviving = qcore::remove_collapsed_wire(b.post_state, 1, d);
      auto want = plus_state();
      if (y) want = qcore::apply_gate(want, qcore::standard_gate("P"), {0});
      if (d) want = qcore::apply_gate(want, qcore::standard_gate("Z"), {0});
      REQUIRE(qcore::fidelity_up_to_global_phase(surviving, want) >=
              1.0 - 1e-12);
    }
  }
}

// The four derivation steps for the R gadget, each as a standalone circuit
// identity.

TEST_CASE("derivation step 1: double CNOT swaps with |+>") {
  qcore::Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    auto psi = qcore::random_state(1, rng);
    auto joint = psi.tensor(plus_state());
    joint = qcore::apply_gate(joint, qcore::standard_gate("CNOT"), {1, 0});
    joint = qcore::apply_gate(joint, qcore::standard_gate("CNOT"), {0, 1});
    REQUIRE(qcore::fidelity_up_to_global_phase(joint,
                                               plus_state().tensor(psi)) >=
            1.0 - 1e-12);
  }
}

TEST_CASE("derivation step 2: measuring the top wire gives X^c") {
  qcore::Rng rng(32);
  auto psi = qcore::random_state(1, rng);
  for (const auto& b : teleport_circuit(psi, plus_state())) {
    qcore::Vector want = mpow(g("X"), b.c) * psi.amplitudes();
    REQUIRE(qcore::fidelity_up_to_global_phase(b.surviving,
                                               StateVector(1, want)) >=
            1.0 - 1e-12);
  }
}

TEST_CASE("derivation step 3: teleporting R X^a Z^b |psi>") {
  // Matrix form: X^c R X^a Z^b = X^{a xor c} Z^{a xor b} P^a R up to phase.
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int c = 0; c < 2; ++c) {
        CAPTURE(a, b, c);
        REQUIRE(matrices_equal_up_to_phase(
            mpow(g("X"), c) * g("R") * word(a, b, 0),
            word(a ^ c, a ^ b, a) * g("R")));
      }
    }
  }
  // Circuit form.
  qcore::Rng rng(33);
  auto psi = qcore::random_state(1, rng);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      auto data = StateVector(1, word(a, b, 0) * psi.amplitudes());
      data = qcore::apply_gate(data, qcore::standard_gate("R"), {0});
      for (const auto& br : teleport_circuit(data, plus_state())) {
        qcore::Vector want = word(a ^ br.c, a ^ b, a) * g("R") * psi.amplitudes();
        want /= want.norm();
        REQUIRE(qcore::fidelity_up_to_global_phase(br.surviving,
                                                   StateVector(1, want)) >=
                1.0 - 1e-12);
      }
    }
  }
}

TEST_CASE("derivation step 4: P^y, Z^d and P^{a xor y} give the key rule") {
  // Algebraic chain from the appendix, line by line, up to global phase.
  for (int a = 0; a < 2; ++a) {
    for (int y = 0; y < 2; ++y) {
      for (int d = 0; d < 2; ++d) {
        for (int b = 0; b < 2; ++b) {
          for (int c = 0; c < 2; ++c) {
            CAPTURE(a, b, y, d, c);
            const Matrix lhs = mpow(g("P"), a ^ y) * mpow(g("Z"), d) *
                               mpow(g("P"), y) * word(a ^ c, a ^ b, a);
            const Matrix line2 = mpow(g("Z"), a * y) * mpow(g("P"), a + y) *
                                 mpow(g("Z"), d) * mpow(g("P"), y) *
                                 word(a ^ c, a ^ b, a);
            const Matrix line3 = mpow(g("Z"), d ^ (a * y) ^ y) * mpow(g("P"), a) *
                                 word(a ^ c, a ^ b, a);
            const Matrix line4 = mpow(g("Z"), d ^ (a * y) ^ y) *
                                 mpow(g("X"), a ^ c) *
                                 mpow(g("Z"), a * (a ^ c)) * mpow(g("P"), a) *
                                 mpow(g("Z"), a ^ b) * mpow(g("P"), a);
            const Matrix rhs =
                word(a ^ c, (a * ((c ^ y ^ 1))) ^ b ^ d ^ y, 0);
            REQUIRE(matrices_equal_up_to_phase(lhs, line2));
            REQUIRE(matrices_equal_up_to_phase(line2, line3));
            REQUIRE(matrices_equal_up_to_phase(line3, line4));
            REQUIRE(matrices_equal_up_to_phase(line4, rhs));
          }
        }
      }
    }
  }

  // Full circuit: data wire R-rotated, lower wire P^y Z^d |+> before the
  // CNOT and P^{a xor y} after measuring c.
  qcore::Rng rng(34);
  auto psi = qcore::random_state(1, rng);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int y = 0; y < 2; ++y) {
        for (int d = 0; d < 2; ++d) {
          auto data = StateVector(1, word(a, b, 0) * psi.amplitudes());
          data = qcore::apply_gate(data, qcore::standard_gate("R"), {0});
          auto lower = StateVector(
              1, mpow(g("Z"), d) * mpow(g("P"), y) * plus_state().amplitudes());
          for (const auto& br : teleport_circuit(data, lower)) {
            const int c = br.c;
            auto corrected = qcore::StateVector(
                1, mpow(g("P"), a ^ y) * br.surviving.amplitudes());
            qcore::Vector want = word(a ^ c, (a * (c ^ y ^ 1)) ^ b ^ d ^ y, 0) * g("R") *
                        psi.amplitudes();
            CAPTURE(a, b, y, d, c);
            REQUIRE(qcore::fidelity_up_to_global_phase(
                        corrected, StateVector(1, want)) >= 1.0 - 1e-12);
          }
        }
      }
    }
  }
}
