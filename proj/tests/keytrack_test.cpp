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

// Key-update rules checked against state-level simulation of each gadget:
// encrypt, let the server act on the ciphertext, update the key, decrypt,
// and compare with the gate applied to the plaintext.

#include "qced/keytrack.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "qced/qcore.hpp"
#include "testutil.hpp"

using namespace qced;
using qcore::PauliKey;
using qcore::StateVector;

namespace {

StateVector pad1(const StateVector& psi, PauliKey k) {
  const PauliKey keys[1] = {k};
  return qcore::qotp_encrypt(psi, keys);
}

StateVector unpad1(const StateVector& psi, PauliKey k) {
  const PauliKey keys[1] = {k};
  return qcore::qotp_decrypt(psi, keys);
}

/// State-level simulation of the R gadget for fixed (key, y, d) and a fixed
/// measurement branch c. Returns the surviving wire's state, or an empty
/// optional if that branch has zero probability (it never does: c is uniform).
std::optional<StateVector> r_gadget_surviving(const StateVector& psi,
                                              PauliKey key, int y, int d,
                                              int c) {
  auto data = pad1(psi, key);
  data = qcore::apply_gate(data, qcore::standard_gate("R"), {0});
  auto aux = qcore::apply_gate(StateVector(1), qcore::standard_gate("H"), {0});
  if (y) aux = qcore::apply_gate(aux, qcore::standard_gate("P"), {0});
  if (d) aux = qcore::apply_gate(aux, qcore::standard_gate("Z"), {0});
  auto joint = data.tensor(aux);
  joint = qcore::apply_gate(joint, qcore::standard_gate("CNOT"), {1, 0});
  const int x = key.a ^ y;
  if (x) joint = qcore::apply_gate(joint, qcore::standard_gate("P"), {1});
  for (const auto& b : qcore::measure_branches(joint, 0)) {
    if (b.outcome != c) continue;
    return qcore::remove_collapsed_wire(b.post_state, 0, c);
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("Pauli and Clifford key updates against simulation") {
  qcore::Rng rng(71);
  struct Case {
    const char* gate;
    PauliKey (*update)(PauliKey);
  };
  const Case cases[] = {
      {"X", keytrack::update_x},
      {"Z", keytrack::update_z},
      {"H", keytrack::update_h},
      {"P", keytrack::update_p},
  };
  for (const auto& tc : cases) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        for (int trial = 0; trial < 50; ++trial) {
          auto psi = qcore::random_state(1, rng);
          auto cipher = qcore::apply_gate(pad1(psi, {a, b}),
                                          qcore::standard_gate(tc.gate), {0});
          auto plain =
              qcore::apply_gate(psi, qcore::standard_gate(tc.gate), {0});
          auto decrypted = unpad1(cipher, tc.update({a, b}));
          CAPTURE(tc.gate, a, b, trial);
          REQUIRE(qcore::fidelity_up_to_global_phase(decrypted, plain) >=
                  1.0 - 1e-12);
        }
      }
    }
  }
}

TEST_CASE("CNOT key update against simulation, all 16 key pairs") {
  qcore::Rng rng(72);
  for (int mask = 0; mask < 16; ++mask) {
    const PauliKey ck{(mask >> 0) & 1, (mask >> 1) & 1};
    const PauliKey tk{(mask >> 2) & 1, (mask >> 3) & 1};
    for (int trial = 0; trial < 50; ++trial) {
      auto psi = qcore::random_state(2, rng);
      const PauliKey pad[2] = {ck, tk};
      auto cipher = qcore::apply_gate(qcore::qotp_encrypt(psi, pad),
                                      qcore::standard_gate("CNOT"), {0, 1});
      auto plain = qcore::apply_gate(psi, qcore::standard_gate("CNOT"), {0, 1});
      auto [ck2, tk2] = keytrack::update_cnot(ck, tk);
      const PauliKey pad2[2] = {ck2, tk2};
      auto decrypted = qcore::qotp_decrypt(cipher, pad2);
      CAPTURE(mask, trial);
      REQUIRE(qcore::fidelity_up_to_global_phase(decrypted, plain) >=
              1.0 - 1e-12);
    }
  }
  // Figure values.
  auto a = keytrack::update_cnot({1, 0}, {0, 0});
  REQUIRE(a.first == PauliKey{1, 0});
  REQUIRE(a.second == PauliKey{1, 0});
  auto b = keytrack::update_cnot({0, 0}, {0, 0});
  REQUIRE(b.first == PauliKey{0, 0});
  REQUIRE(b.second == PauliKey{0, 0});
  auto c = keytrack::update_cnot({0, 1}, {1, 1});
  REQUIRE(c.first == PauliKey{0, 0});
  REQUIRE(c.second == PauliKey{1, 1});
}

TEST_CASE("measurement and auxiliary updates") {
  REQUIRE(keytrack::update_measure({1, 0}, 0) == 1);
  REQUIRE(keytrack::update_measure({0, 1}, 1) == 1);
  REQUIRE(keytrack::update_measure({1, 1}, 1) == 0);
  REQUIRE(keytrack::update_aux() == PauliKey{0, 0});

  keytrack::KeyRegister reg;
  reg.set_key(0, {1, 0});
  reg.set_key(1, {0, 1});
  REQUIRE(reg.measure(0, 0) == 1);
  REQUIRE(reg.classical_keys.at(0) == 1);
  REQUIRE(reg.quantum_keys.count(0) == 0);
  REQUIRE_THROWS_AS(reg.measure(0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(reg.set_key(0, {0, 0}), std::invalid_argument);
}

TEST_CASE("update_h and update_p act as involutions") {
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const PauliKey k{a, b};
      REQUIRE(keytrack::update_h(keytrack::update_h(k)) == k);
      REQUIRE(keytrack::update_p(keytrack::update_p(k)) == k);
    }
  }
  REQUIRE(keytrack::update_h(PauliKey{1, 0}) == PauliKey{0, 1});
  REQUIRE(keytrack::update_p(PauliKey{1, 0}) == PauliKey{1, 1});
  REQUIRE(keytrack::update_p(PauliKey{1, 1}) == PauliKey{1, 0});
}

TEST_CASE("R-gate key rule matches the gadget on all 32 combinations") {
  // Spec-carried values of the rule itself.
  REQUIRE(keytrack::update_r({0, 0}, {1, 0}, 1) == PauliKey{1, 1});
  REQUIRE(keytrack::update_r({0, 0}, {0, 0}, 0) == PauliKey{0, 0});
  REQUIRE(keytrack::update_r({1, 0}, {0, 0}, 0) == PauliKey{1, 1});

  qcore::Rng rng(73);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int y = 0; y < 2; ++y) {
        for (int d = 0; d < 2; ++d) {
          for (int c = 0; c < 2; ++c) {
            for (int trial = 0; trial < 5; ++trial) {
              auto psi = qcore::random_state(1, rng);
              auto surviving = r_gadget_surviving(psi, {a, b}, y, d, c);
              REQUIRE(surviving.has_value());
              auto key = keytrack::update_r({a, b}, {y, d}, c);
              auto decrypted = unpad1(*surviving, key);
              auto want = qcore::apply_gate(psi, qcore::standard_gate("R"), {0});
              CAPTURE(a, b, y, d, c, trial);
              REQUIRE(qcore::fidelity_up_to_global_phase(decrypted, want) >=
                      1.0 - 1e-12);
            }
          }
        }
      }
    }
  }
}

TEST_CASE("naive R attempt is not Pauli-correctable when a = 1") {
  qcore::Rng rng(74);
  for (int b = 0; b < 2; ++b) {
    for (int trial = 0; trial < 20; ++trial) {
      auto psi = qcore::random_state(1, rng);
      auto cipher =
          qcore::apply_gate(pad1(psi, {1, b}), qcore::standard_gate("R"), {0});
      auto want = qcore::apply_gate(psi, qcore::standard_gate("R"), {0});
      for (int alpha = 0; alpha < 2; ++alpha) {
        for (int beta = 0; beta < 2; ++beta) {
          auto attempt = unpad1(cipher, {alpha, beta});
          CAPTURE(b, trial, alpha, beta);
          REQUIRE(qcore::fidelity_up_to_global_phase(attempt, want) <
                  1.0 - 1e-6);
        }
      }
    }
  }
}

TEST_CASE("client x message") {
  REQUIRE(keytrack::client_x_message({1, 0}, {1, 0}) == 0);
  REQUIRE(keytrack::client_x_message({0, 0}, {0, 0}) == 0);
  // For either key bit the marginal of x over uniform y is uniform.
  for (int a = 0; a < 2; ++a) {
    int ones = 0;
    for (int y = 0; y < 2; ++y) {
      ones += keytrack::client_x_message({a, 0}, {y, 0});
    }
    REQUIRE(ones == 1);
  }
}
