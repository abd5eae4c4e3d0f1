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

#include <map>
#include <stdexcept>
#include <string>

#include "qced/qcore.hpp"

// The client's secret: per-wire one-time-pad keys and the exact key-update
// rule for every gadget. Each server-side gate on the ciphertext corresponds
// to a permutation of the (a, b) key bits; tracking it lets the client keep a
// valid decryption key without touching the data.
//
// Additive exponents in the update rules (a+b, b+d, ...) reduce mod 2.
namespace qced::keytrack {

using qcore::PauliKey;

/// Per-R-gate client randomness, drawn uniformly and independently.
struct RGateRandomness {
  int y = 0;
  int d = 0;
};

/// X gate: X^a Z^b X = X (X^a Z^b) up to phase — key unchanged.
inline PauliKey update_x(PauliKey key) { return key; }

/// Z gate: key unchanged.
inline PauliKey update_z(PauliKey key) { return key; }

/// H gate: H X^a Z^b = X^b Z^a H — key bits swap.
inline PauliKey update_h(PauliKey key) { return {key.b, key.a}; }

/// P gate: P X^a Z^b = X^a Z^{a xor b} P up to phase.
inline PauliKey update_p(PauliKey key) { return {key.a, key.a ^ key.b}; }

/// CNOT: ((a,b),(c,d)) -> ((a, b xor d), (a xor c, d)).
inline std::pair<PauliKey, PauliKey> update_cnot(PauliKey control,
                                                 PauliKey target) {
  return {{control.a, control.b ^ target.b},
          {control.a ^ target.a, target.b}};
}

/// Measurement: the server reports a xor y for true outcome y; the plaintext
/// outcome is reported xor a.
inline int update_measure(PauliKey key, int reported) {
  return (reported ^ key.a) & 1;
}

/// Auxiliary |0> preparation enters the computation with a zero pad.
inline PauliKey update_aux() { return {0, 0}; }

/// pi/8 gadget: with client randomness (y, d) and server-reported bit c the
/// surviving wire carries X^{a xor c} Z^{a(c xor y xor 1) xor b xor d xor y} R|psi>.
inline PauliKey update_r(PauliKey key, RGateRandomness rand, int c) {
  const int a = key.a & 1;
  const int new_a = a ^ (c & 1);
  const int new_b =
      (a & ((c ^ rand.y ^ 1) & 1)) ^ key.b ^ rand.d ^ rand.y;
  return {new_a & 1, new_b & 1};
}

/// The classical bit the client sends for an R gate: x = a xor y.
inline int client_x_message(PauliKey key, RGateRandomness rand) {
  return (key.a ^ rand.y) & 1;
}

/// Keys for all live quantum wires plus the retained classical keys of
/// measured wires (so classical outcomes stay decodable from the transcript).
struct KeyRegister {
  std::map<int, PauliKey> quantum_keys;
  std::map<int, int> classical_keys;

  const PauliKey& key_for(int wire) const {
    auto it = quantum_keys.find(wire);
    if (it == quantum_keys.end()) {
      throw std::invalid_argument("no quantum key for wire " +
                                  std::to_string(wire));
    }
    return it->second;
  }

  void set_key(int wire, PauliKey key) {
    if (classical_keys.count(wire)) {
      throw std::invalid_argument("wire " + std::to_string(wire) +
                                  " is already classical");
    }
    quantum_keys[wire] = key;
  }

  /// Consumes the reported bit for a measured wire; returns the plaintext
  /// outcome and retires the wire's key to the classical map.
  int measure(int wire, int reported) {
    auto it = quantum_keys.find(wire);
    if (it == quantum_keys.end()) {
      throw std::invalid_argument("measured wire " + std::to_string(wire) +
                                  " has no quantum key");
    }
    const int plain = update_measure(it->second, reported);
    classical_keys[wire] = it->second.a;
    quantum_keys.erase(it);
    return plain;
  }

  friend bool operator==(const KeyRegister& l, const KeyRegister& r) {
    auto eq_keys = [](const auto& x, const auto& y) {
      if (x.size() != y.size()) return false;
      for (auto itx = x.begin(), ity = y.begin(); itx != x.end();
           ++itx, ++ity) {
        if (itx->first != ity->first) return false;
        if (!(itx->second == ity->second)) return false;
      }
      return true;
    };
    return eq_keys(l.quantum_keys, r.quantum_keys) &&
           l.classical_keys == r.classical_keys;
  }
};

}  // namespace qced::keytrack
