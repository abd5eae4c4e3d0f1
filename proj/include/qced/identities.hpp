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

#include <string>
#include <vector>

#include "qced/engine.hpp"
#include "qced/keytrack.hpp"
#include "qced/qcore.hpp"

// The runnable identity suite behind `verify-identities`: the commutation
// rules, the teleportation-style circuit identities, the step-by-step
// derivation of the R gadget, and the key-update tables, each checked by
// simulation and reported pass/fail.
namespace qced::identities {

struct IdentityCheck {
  std::string name;
  bool pass = false;
  double error = 0.0;  // worst deviation observed (fidelity gap or max-abs)
};

namespace detail {

using qcore::Matrix;
using qcore::StateVector;

inline Matrix g(const char* name) { return qcore::standard_gate(name).matrix; }

inline Matrix mpow(const Matrix& m, int e) {
  Matrix out = Matrix::Identity(m.rows(), m.cols());
  for (int i = 0; i < e; ++i) out = m * out;
  return out;
}

inline StateVector plus_state() {
  return qcore::apply_gate(StateVector(1), qcore::standard_gate("H"), {0});
}

struct TeleportBranch {
  int c;
  StateVector surviving;
};

inline std::vector<TeleportBranch> teleport(const StateVector& data,
                                            const StateVector& lower) {
  auto joint = data.tensor(lower);
  joint = qcore::apply_gate(joint, qcore::standard_gate("CNOT"), {1, 0});
  std::vector<TeleportBranch> out;
  for (const auto& b : qcore::measure_branches(joint, 0)) {
    out.push_back({b.outcome,
                   qcore::remove_collapsed_wire(b.post_state, 0, b.outcome)});
  }
  return out;
}

inline StateVector apply1(const StateVector& s, const char* gate) {
  return qcore::apply_gate(s, qcore::standard_gate(gate), {0});
}

}  // namespace detail

inline std::vector<IdentityCheck> verify_identities(std::uint64_t seed = 2026) {
  using namespace detail;
  std::vector<IdentityCheck> out;
  qcore::Rng rng(seed);

  auto matrix_check = [&](const std::string& name, const Matrix& lhs,
                          const Matrix& rhs) {
    const double err = qcore::matrix_distance_up_to_phase(lhs, rhs);
    out.push_back({name, err <= qcore::kAlgebraTol, err});
  };

  matrix_check("XZ = ZX", g("X") * g("Z"), g("Z") * g("X"));
  matrix_check("PZ = ZP", g("P") * g("Z"), g("Z") * g("P"));
  matrix_check("PX = XZP", g("P") * g("X"), g("X") * g("Z") * g("P"));
  matrix_check("RZ = ZR", g("R") * g("Z"), g("Z") * g("R"));
  matrix_check("RX = XZPR", g("R") * g("X"), g("X") * g("Z") * g("P") * g("R"));
  matrix_check("P^2 = Z", g("P") * g("P"), g("Z"));
  {
    double err = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        err = std::max(err, qcore::matrix_distance_up_to_phase(
                                mpow(g("P"), a ^ b),
                                mpow(g("Z"), a * b) * mpow(g("P"), a + b)));
      }
    }
    out.push_back({"P^(a xor b) = Z^(ab) P^(a+b)", err <= qcore::kAlgebraTol,
                   err});
  }

  {  // X-teleportation
    double gap = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      auto psi = qcore::random_state(1, rng);
      for (const auto& b : teleport(psi, plus_state())) {
        auto want = b.c ? apply1(psi, "X") : psi;
        gap = std::max(
            gap, 1.0 - qcore::fidelity_up_to_global_phase(b.surviving, want));
      }
    }
    out.push_back({"X-teleportation circuit", gap <= 1e-12, gap});
  }

  for (const char* gate : {"P", "Z"}) {
    double gap = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      auto psi = qcore::random_state(1, rng);
      for (const auto& b : teleport(psi, apply1(plus_state(), gate))) {
        auto want = b.c ? apply1(psi, "X") : psi;
        want = apply1(want, gate);
        gap = std::max(
            gap, 1.0 - qcore::fidelity_up_to_global_phase(b.surviving, want));
      }
    }
    out.push_back({std::string(gate) + " commutes with control", gap <= 1e-12,
                   gap});
  }

  {  // entangled preparation of Z^d P^y |+>
    double gap = 0.0;
    for (int y = 0; y < 2; ++y) {
      auto joint = qcore::StateVector(2);
      joint = qcore::apply_gate(joint, qcore::standard_gate("H"), {0});
      joint = qcore::apply_gate(joint, qcore::standard_gate("CNOT"), {0, 1});
      if (y) joint = qcore::apply_gate(joint, qcore::standard_gate("P"), {1});
      joint = qcore::apply_gate(joint, qcore::standard_gate("H"), {1});
      for (const auto& b : qcore::measure_branches(joint, 1)) {
        auto surviving = qcore::remove_collapsed_wire(b.post_state, 1, b.outcome);
        gap = std::max(gap, 1.0 - qcore::fidelity_up_to_global_phase(
                                      surviving,
                                      engine::aux_qubit_state(y, b.outcome)));
      }
    }
    out.push_back({"entangled circuit prepares Z^d P^y |+>", gap <= 1e-12, gap});
  }

  {  // derivation step 1: double CNOT swaps with |+>
    double gap = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      auto psi = qcore::random_state(1, rng);
      auto joint = psi.tensor(plus_state());
      joint = qcore::apply_gate(joint, qcore::standard_gate("CNOT"), {1, 0});
      joint = qcore::apply_gate(joint, qcore::standard_gate("CNOT"), {0, 1});
      gap = std::max(gap, 1.0 - qcore::fidelity_up_to_global_phase(
                                    joint, plus_state().tensor(psi)));
    }
    out.push_back({"derivation 1: swap against |+>", gap <= 1e-12, gap});
  }

  {  // derivation step 2 is the teleportation identity itself
    double gap = 0.0;
    auto psi = qcore::random_state(1, rng);
    for (const auto& b : teleport(psi, plus_state())) {
      qcore::Vector want = mpow(g("X"), b.c) * psi.amplitudes();
      gap = std::max(gap, 1.0 - qcore::fidelity_up_to_global_phase(
                                    b.surviving, StateVector(1, want)));
    }
    out.push_back({"derivation 2: measured byproduct X^c", gap <= 1e-12, gap});
  }

  {  // derivation step 3
    double err = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        for (int c = 0; c < 2; ++c) {
          err = std::max(
              err,
              qcore::matrix_distance_up_to_phase(
                  mpow(g("X"), c) * g("R") * mpow(g("X"), a) * mpow(g("Z"), b),
                  mpow(g("X"), a ^ c) * mpow(g("Z"), a ^ b) * mpow(g("P"), a) *
                      g("R")));
        }
      }
    }
    out.push_back({"derivation 3: X^c R X^a Z^b = X^(a xor c) Z^(a xor b) P^a R",
                   err <= qcore::kAlgebraTol, err});
  }

  {  // derivation step 4: the full gadget output label
    double gap = 0.0;
    auto psi = qcore::random_state(1, rng);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        for (int y = 0; y < 2; ++y) {
          for (int d = 0; d < 2; ++d) {
            auto data = StateVector(
                1, mpow(g("X"), a) * mpow(g("Z"), b) * psi.amplitudes());
            data = apply1(data, "R");
            auto lower = engine::aux_qubit_state(y, d);
            for (const auto& br : teleport(data, lower)) {
              const int c = br.c;
              auto corrected = StateVector(
                  1, mpow(g("P"), a ^ y) * br.surviving.amplitudes());
              qcore::Vector want =
                  mpow(g("X"), a ^ c) *
                  mpow(g("Z"), (a * (c ^ y ^ 1)) ^ b ^ d ^ y) * g("R") *
                  psi.amplitudes();
              gap = std::max(gap, 1.0 - qcore::fidelity_up_to_global_phase(
                                            corrected, StateVector(1, want)));
            }
          }
        }
      }
    }
    out.push_back({"derivation 4: P^y, Z^d, P^(a xor y) close the gadget",
                   gap <= 1e-12, gap});
  }

  {  // key-update tables for the non-interactive gadgets
    struct Case {
      const char* gate;
      qcore::PauliKey (*update)(qcore::PauliKey);
    };
    const Case cases[] = {{"X", keytrack::update_x},
                          {"Z", keytrack::update_z},
                          {"H", keytrack::update_h},
                          {"P", keytrack::update_p}};
    double gap = 0.0;
    for (const auto& tc : cases) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          for (int trial = 0; trial < 5; ++trial) {
            auto psi = qcore::random_state(1, rng);
            const qcore::PauliKey pad[1] = {{a, b}};
            auto cipher = apply1(qcore::qotp_encrypt(psi, pad), tc.gate);
            const qcore::PauliKey updated[1] = {tc.update({a, b})};
            gap = std::max(gap, 1.0 - qcore::fidelity_up_to_global_phase(
                                          qcore::qotp_decrypt(cipher, updated),
                                          apply1(psi, tc.gate)));
          }
        }
      }
    }
    for (int mask = 0; mask < 16; ++mask) {
      const qcore::PauliKey ck{(mask >> 0) & 1, (mask >> 1) & 1};
      const qcore::PauliKey tk{(mask >> 2) & 1, (mask >> 3) & 1};
      for (int trial = 0; trial < 5; ++trial) {
        auto psi = qcore::random_state(2, rng);
        const qcore::PauliKey pad[2] = {ck, tk};
        auto cipher = qcore::apply_gate(qcore::qotp_encrypt(psi, pad),
                                        qcore::standard_gate("CNOT"), {0, 1});
        auto [ck2, tk2] = keytrack::update_cnot(ck, tk);
        const qcore::PauliKey pad2[2] = {ck2, tk2};
        gap = std::max(
            gap, 1.0 - qcore::fidelity_up_to_global_phase(
                           qcore::qotp_decrypt(cipher, pad2),
                           qcore::apply_gate(psi, qcore::standard_gate("CNOT"),
                                             {0, 1})));
      }
    }
    out.push_back({"Clifford key-update tables", gap <= 1e-12, gap});
  }

  {  // R gadget: all 32 (a, b, y, d, c) combinations
    double gap = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        for (int y = 0; y < 2; ++y) {
          for (int d = 0; d < 2; ++d) {
            for (int trial = 0; trial < 2; ++trial) {
              auto psi = qcore::random_state(1, rng);
              const qcore::PauliKey pad[1] = {{a, b}};
              auto data = apply1(qcore::qotp_encrypt(psi, pad), "R");
              auto joint = data.tensor(engine::aux_qubit_state(y, d));
              joint = qcore::apply_gate(joint, qcore::standard_gate("CNOT"),
                                        {1, 0});
              if (a ^ y) {
                joint = qcore::apply_gate(joint, qcore::standard_gate("P"), {1});
              }
              for (const auto& br : qcore::measure_branches(joint, 0)) {
                auto surviving =
                    qcore::remove_collapsed_wire(br.post_state, 0, br.outcome);
                const qcore::PauliKey updated[1] = {
                    keytrack::update_r({a, b}, {y, d}, br.outcome)};
                gap = std::max(gap,
                               1.0 - qcore::fidelity_up_to_global_phase(
                                         qcore::qotp_decrypt(surviving, updated),
                                         apply1(psi, "R")));
              }
            }
          }
        }
      }
    }
    out.push_back({"R gadget key rule, all 32 cases", gap <= 1e-12, gap});
  }

  {  // naive R attempt is not Pauli-correctable when a = 1
    double best_fidelity = 0.0;
    for (int b = 0; b < 2; ++b) {
      for (int trial = 0; trial < 10; ++trial) {
        auto psi = qcore::random_state(1, rng);
        const qcore::PauliKey pad[1] = {{1, b}};
        auto cipher = apply1(qcore::qotp_encrypt(psi, pad), "R");
        auto want = apply1(psi, "R");
        for (int alpha = 0; alpha < 2; ++alpha) {
          for (int beta = 0; beta < 2; ++beta) {
            const qcore::PauliKey attempt[1] = {{alpha, beta}};
            best_fidelity = std::max(
                best_fidelity, qcore::fidelity_up_to_global_phase(
                                   qcore::qotp_decrypt(cipher, attempt), want));
          }
        }
      }
    }
    out.push_back({"no Pauli correction fixes the naive R protocol",
                   best_fidelity < 1.0 - 1e-6, best_fidelity});
  }

  return out;
}

inline bool all_pass(const std::vector<IdentityCheck>& checks) {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

}  // namespace qced::identities
