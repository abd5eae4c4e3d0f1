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

#include <bit>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qced/circuits.hpp"
#include "qced/keytrack.hpp"
#include "qced/qcore.hpp"

// Protocol execution on the encrypted register.
//
// The client one-time-pad-encrypts her register and ships it; the server
// runs the circuit gate by gate on the ciphertext. Clifford gates and |0>
// preparation need no interaction. A measurement makes the server report the
// raw (encrypted) outcome. An R gate runs the interactive gadget: the client
// sends one auxiliary qubit Z^d P^y |+> and the bit x = a xor y, the server
// teleports the R-rotated data through the auxiliary qubit (CNOT with the
// auxiliary wire as control), applies P^x, measures the old data wire and
// reports the outcome c; the auxiliary wire takes over the data wire's
// logical index and the client re-keys.
//
// Client and server are independently owned state machines that communicate
// only through explicit messages, so they can be pumped in process or run as
// separate processes over the transport framing.
namespace qced::engine {

using circuits::Circuit;
using circuits::GateKind;
using circuits::GateOp;

enum class MessageKind : std::uint8_t {
  EncryptedRegister = 0x01,
  AuxQubit = 0x02,
  ClassicalX = 0x03,
  ClassicalC = 0x04,
  ReportedMeasurement = 0x05,
  OutputRegister = 0x06,
};

enum class Direction { ClientToServer, ServerToClient };

inline Direction direction_for(MessageKind kind) {
  switch (kind) {
    case MessageKind::EncryptedRegister:
    case MessageKind::AuxQubit:
    case MessageKind::ClassicalX:
      return Direction::ClientToServer;
    case MessageKind::ClassicalC:
    case MessageKind::ReportedMeasurement:
    case MessageKind::OutputRegister:
      return Direction::ServerToClient;
  }
  throw std::invalid_argument("unknown message kind");
}

inline std::string_view kind_name(MessageKind kind) {
  switch (kind) {
    case MessageKind::EncryptedRegister: return "EncryptedRegister";
    case MessageKind::AuxQubit: return "AuxQubit";
    case MessageKind::ClassicalX: return "ClassicalX";
    case MessageKind::ClassicalC: return "ClassicalC";
    case MessageKind::ReportedMeasurement: return "ReportedMeasurement";
    case MessageKind::OutputRegister: return "OutputRegister";
  }
  return "?";
}

struct Message {
  Direction direction = Direction::ClientToServer;
  MessageKind kind = MessageKind::EncryptedRegister;
  std::vector<std::uint8_t> payload;

  static Message classical(MessageKind kind, int bit) {
    return {direction_for(kind), kind,
            {static_cast<std::uint8_t>(bit & 1)}};
  }
  friend bool operator==(const Message&, const Message&) = default;
};

// --- register wire format -------------------------------------------------
//
// SerializedRegister: one byte wire count, then 2^n IEEE-754 binary64
// little-endian (real, imaginary) pairs; total 1 + 16 * 2^n bytes.

namespace detail {
inline void put_f64_le(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
  }
}

inline double get_f64_le(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace detail

inline std::vector<std::uint8_t> serialize_register(
    const qcore::StateVector& state) {
  if (state.num_wires() > 255) throw std::invalid_argument("register too wide");
  std::vector<std::uint8_t> out;
  out.reserve(1 + 16 * static_cast<size_t>(state.dim()));
  out.push_back(static_cast<std::uint8_t>(state.num_wires()));
  for (std::int64_t i = 0; i < state.dim(); ++i) {
    detail::put_f64_le(out, state.amplitude(i).real());
    detail::put_f64_le(out, state.amplitude(i).imag());
  }
  return out;
}

inline qcore::StateVector deserialize_register(
    std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw std::invalid_argument("empty register payload");
  const int n = bytes[0];
  if (n > qcore::kMaxWires) {
    throw std::invalid_argument("register wire count exceeds the cap");
  }
  const std::int64_t dim = qcore::dim_for(n);
  if (static_cast<std::int64_t>(bytes.size()) != 1 + 16 * dim) {
    throw std::invalid_argument("register payload has wrong length");
  }
  qcore::Vector amps(dim);
  for (std::int64_t i = 0; i < dim; ++i) {
    const double re = detail::get_f64_le(bytes.data() + 1 + 16 * i);
    const double im = detail::get_f64_le(bytes.data() + 1 + 16 * i + 8);
    amps(i) = qcore::Complex{re, im};
  }
  const double n2 = amps.squaredNorm();
  if (std::abs(n2 - 1.0) > 1e-9) {
    throw std::invalid_argument("deserialized register is not normalized");
  }
  return qcore::StateVector(n, std::move(amps));
}

// --- transcript -------------------------------------------------------------

struct Transcript {
  std::vector<Message> messages;

  int count(MessageKind kind) const {
    int n = 0;
    for (const auto& m : messages) n += (m.kind == kind);
    return n;
  }

  /// One line per message: `<seq> <dir> <kind> <payload-hex>`.
  std::string dump() const {
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (size_t i = 0; i < messages.size(); ++i) {
      const auto& m = messages[i];
      out += std::to_string(i);
      out += m.direction == Direction::ClientToServer ? " c2s " : " s2c ";
      out += kind_name(m.kind);
      out += ' ';
      for (std::uint8_t b : m.payload) {
        out += hex[b >> 4];
        out += hex[b & 0xf];
      }
      out += '\n';
    }
    return out;
  }

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

// --- server state -----------------------------------------------------------

/// The server's ciphertext register. Physical tensor positions are mapped to
/// the circuit's logical wire indices; the map changes when the R gadget
/// retires a data wire and promotes the auxiliary wire in its place.
struct ServerRegister {
  qcore::StateVector state{0};
  std::vector<int> logical;  // logical id of each physical position

  int width() const { return state.num_wires(); }

  int phys_of(int logical_wire) const {
    for (size_t i = 0; i < logical.size(); ++i) {
      if (logical[i] == logical_wire) return static_cast<int>(i);
    }
    throw std::invalid_argument("logical wire " + std::to_string(logical_wire) +
                                " is not held by the server");
  }

  void init(const qcore::StateVector& received) {
    state = received;
    logical.resize(received.num_wires());
    for (size_t i = 0; i < logical.size(); ++i) logical[i] = static_cast<int>(i);
  }

  void append_zero(int logical_id) {
    state = state.tensor(qcore::StateVector(1));
    logical.push_back(logical_id);
  }

  /// Attaches a received one-qubit state at the end; returns its position.
  int attach(const qcore::StateVector& one_wire, int logical_id) {
    if (one_wire.num_wires() != 1) {
      throw std::invalid_argument("attached register must be one wire");
    }
    state = state.tensor(one_wire);
    logical.push_back(logical_id);
    return width() - 1;
  }

  void apply(const GateOp& op) {
    switch (op.kind) {
      case GateKind::X:
      case GateKind::Z:
      case GateKind::H:
      case GateKind::P:
      case GateKind::R: {
        const int w[1] = {phys_of(op.wires[0])};
        state = qcore::apply_gate(state, qcore::standard_gate(gate_name(op.kind)),
                                  std::span<const int>(w, 1));
        break;
      }
      case GateKind::CNOT: {
        const int w[2] = {phys_of(op.wires[0]), phys_of(op.wires[1])};
        state = qcore::apply_gate(state, qcore::standard_gate("CNOT"),
                                  std::span<const int>(w, 2));
        break;
      }
      default:
        throw std::invalid_argument("not a unitary gate op");
    }
  }

  void apply_1q(std::string_view gate, int logical_wire) {
    const int w[1] = {phys_of(logical_wire)};
    state = qcore::apply_gate(state, qcore::standard_gate(gate),
                              std::span<const int>(w, 1));
  }

  /// Drops a collapsed wire from the register.
  void remove(int logical_wire, int outcome) {
    const int p = phys_of(logical_wire);
    state = qcore::remove_collapsed_wire(state, p, outcome);
    logical.erase(logical.begin() + p);
  }

  void relabel(int from_logical, int to_logical) {
    logical[phys_of(from_logical)] = to_logical;
  }

  /// Register contents permuted to ascending logical order.
  qcore::StateVector to_logical_order() const {
    std::vector<size_t> perm(logical.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::sort(perm.begin(), perm.end(),
              [&](size_t l, size_t r) { return logical[l] < logical[r]; });
    const int n = width();
    qcore::Vector out(state.dim());
    for (std::int64_t i = 0; i < state.dim(); ++i) {
      std::int64_t j = 0;
      for (int w = 0; w < n; ++w) {
        if (qcore::index_bit(i, n, static_cast<int>(perm[w]))) {
          j |= std::int64_t{1} << qcore::wire_shift(n, w);
        }
      }
      out(j) = state.amplitude(i);
    }
    qcore::StateVector s(n);
    s.raw() = std::move(out);
    return s;
  }
};

/// Client-prepared auxiliary qubit Z^d P^y |+>, one of the four BB84-type
/// states (|0> +- |1>)/sqrt2, (|0> +- i|1>)/sqrt2.
inline qcore::StateVector aux_qubit_state(int y, int d) {
  qcore::StateVector s(1);
  const int w[1] = {0};
  s = qcore::apply_gate(s, qcore::standard_gate("H"), std::span<const int>(w, 1));
  if (y) {
    s = qcore::apply_gate(s, qcore::standard_gate("P"), std::span<const int>(w, 1));
  }
  if (d) {
    s = qcore::apply_gate(s, qcore::standard_gate("Z"), std::span<const int>(w, 1));
  }
  return s;
}

/// Server half of the R gadget up to (not including) the data-wire
/// measurement. Returns the physical index of the promoted auxiliary wire.
inline int r_gadget_server_prepare(ServerRegister& reg, int wire,
                                   const qcore::StateVector& aux, int x,
                                   int aux_logical_tag = -1) {
  const int aux_phys = reg.attach(aux, aux_logical_tag);
  reg.apply({GateKind::R, {wire, 0}});
  const int w2[2] = {aux_phys, reg.phys_of(wire)};
  reg.state = qcore::apply_gate(reg.state, qcore::standard_gate("CNOT"),
                                std::span<const int>(w2, 2));
  if (x) {
    const int w1[1] = {aux_phys};
    reg.state = qcore::apply_gate(reg.state, qcore::standard_gate("P"),
                                  std::span<const int>(w1, 1));
  }
  return aux_phys;
}

/// Finishes the gadget after the data wire measured `c`: retire the data
/// wire, promote the auxiliary wire to the data wire's logical index.
inline void r_gadget_server_finish(ServerRegister& reg, int wire, int c,
                                   int aux_logical_tag = -1) {
  reg.remove(wire, c);
  reg.relabel(aux_logical_tag, wire);
}

/// Spec op: apply a Clifford gate to the ciphertext; no messages.
inline void server_apply_clifford(ServerRegister& reg, const GateOp& op) {
  if (op.kind == GateKind::R || op.kind == GateKind::MEASURE ||
      op.kind == GateKind::AUX) {
    throw std::invalid_argument("not a Clifford gate op");
  }
  reg.apply(op);
}

// --- sample-mode sessions ---------------------------------------------------

enum class AuxTiming {
  at_gate,       // send each auxiliary qubit when its R gate runs
  front_loaded,  // send all auxiliary qubits right after the register
};

/// Honest client state machine (sample mode). Pump with wants_send /
/// take_message / deliver until finished().
class ClientSession {
 public:
  ClientSession(Circuit circuit, qcore::StateVector input, std::uint64_t seed,
                AuxTiming timing = AuxTiming::at_gate)
      : circuit_(std::move(circuit)),
        rng_(seed),
        timing_(timing) {
    auto violations = circuits::validate(circuit_);
    if (!violations.empty()) {
      throw std::invalid_argument("invalid circuit: " + violations.front());
    }
    if (input.num_wires() != circuit_.initial_wires) {
      throw std::invalid_argument("input width != circuit initial wires");
    }
    if (circuit_.final_wires > qcore::kMaxWires) {
      throw std::invalid_argument("circuit exceeds the simulation wire cap");
    }
    std::vector<qcore::PauliKey> pad(circuit_.initial_wires);
    for (int w = 0; w < circuit_.initial_wires; ++w) {
      pad[w] = {rng_.bit(), rng_.bit()};
      keys_.set_key(w, pad[w]);
    }
    const auto ciphertext = qcore::qotp_encrypt(input, pad);
    outbox_.push_back({Direction::ClientToServer,
                       MessageKind::EncryptedRegister,
                       serialize_register(ciphertext)});
    for (const auto& op : circuit_.ops) {
      if (op.kind == GateKind::R) {
        rand_log_.push_back({rng_.bit(), rng_.bit()});
      }
    }
    if (timing_ == AuxTiming::front_loaded) {
      for (const auto& r : rand_log_) {
        outbox_.push_back({Direction::ClientToServer, MessageKind::AuxQubit,
                           serialize_register(aux_qubit_state(r.y, r.d))});
      }
    }
    advance();
  }

  bool wants_send() const { return !outbox_.empty(); }
  bool finished() const { return done_; }

  Message take_message() {
    Message m = outbox_.front();
    outbox_.pop_front();
    transcript_.messages.push_back(m);
    return m;
  }

  void deliver(const Message& m) {
    if (m.direction != Direction::ServerToClient) {
      throw std::invalid_argument("client received a client-bound message");
    }
    transcript_.messages.push_back(m);
    inbox_.push_back(m);
    advance();
  }

  const Transcript& transcript() const { return transcript_; }
  const keytrack::KeyRegister& final_keys() const { return keys_; }
  const std::map<int, int>& plaintext_bits() const { return plaintext_; }
  const std::vector<keytrack::RGateRandomness>& randomness_log() const {
    return rand_log_;
  }

  const qcore::StateVector& ciphertext_output() const {
    require_done();
    return *ciphertext_output_;
  }
  const qcore::StateVector& decrypted_output() const {
    require_done();
    return *decrypted_output_;
  }

 private:
  void require_done() const {
    if (!done_) throw std::logic_error("session still in progress");
  }

  std::optional<Message> pop_inbox(MessageKind kind) {
    if (inbox_.empty() || inbox_.front().kind != kind) return std::nullopt;
    Message m = inbox_.front();
    inbox_.pop_front();
    return m;
  }

  void advance() {
    int aux_seen = 0;
    for (size_t i = 0; i < op_cursor_; ++i) {
      if (circuit_.ops[i].kind == GateKind::R) ++aux_seen;
    }
    while (op_cursor_ < circuit_.ops.size()) {
      const GateOp& op = circuit_.ops[op_cursor_];
      switch (op.kind) {
        case GateKind::X:
          keys_.set_key(op.wires[0], keytrack::update_x(keys_.key_for(op.wires[0])));
          break;
        case GateKind::Z:
          keys_.set_key(op.wires[0], keytrack::update_z(keys_.key_for(op.wires[0])));
          break;
        case GateKind::H:
          keys_.set_key(op.wires[0], keytrack::update_h(keys_.key_for(op.wires[0])));
          break;
        case GateKind::P:
          keys_.set_key(op.wires[0], keytrack::update_p(keys_.key_for(op.wires[0])));
          break;
        case GateKind::CNOT: {
          auto [ck, tk] = keytrack::update_cnot(keys_.key_for(op.wires[0]),
                                                keys_.key_for(op.wires[1]));
          keys_.set_key(op.wires[0], ck);
          keys_.set_key(op.wires[1], tk);
          break;
        }
        case GateKind::AUX:
          keys_.set_key(op.wires[0], keytrack::update_aux());
          break;
        case GateKind::MEASURE: {
          auto m = pop_inbox(MessageKind::ReportedMeasurement);
          if (!m) return;  // wait for the server's report
          plaintext_[op.wires[0]] = keys_.measure(op.wires[0], m->payload.at(0));
          break;
        }
        case GateKind::R: {
          const keytrack::RGateRandomness r = rand_log_[aux_seen];
          if (!r_sent_) {
            if (timing_ == AuxTiming::at_gate) {
              outbox_.push_back({Direction::ClientToServer, MessageKind::AuxQubit,
                                 serialize_register(aux_qubit_state(r.y, r.d))});
            }
            outbox_.push_back(Message::classical(
                MessageKind::ClassicalX,
                keytrack::client_x_message(keys_.key_for(op.wires[0]), r)));
            r_sent_ = true;
          }
          auto m = pop_inbox(MessageKind::ClassicalC);
          if (!m) return;  // wait for c
          keys_.set_key(op.wires[0],
                        keytrack::update_r(keys_.key_for(op.wires[0]), r,
                                           m->payload.at(0)));
          r_sent_ = false;
          ++aux_seen;
          break;
        }
      }
      ++op_cursor_;
    }
    auto m = pop_inbox(MessageKind::OutputRegister);
    if (!m) return;
    ciphertext_output_ = deserialize_register(m->payload);
    const auto live = circuit_.live_wires_at_end();
    decrypted_output_ = decrypt(*ciphertext_output_, live);
    done_ = true;
  }

  qcore::StateVector decrypt(const qcore::StateVector& out,
                             const std::vector<int>& live) const {
    std::vector<qcore::PauliKey> pad;
    pad.reserve(live.size());
    for (int w : live) pad.push_back(keys_.key_for(w));
    return qcore::qotp_decrypt(out, pad);
  }

  Circuit circuit_;
  qcore::Rng rng_;
  AuxTiming timing_;
  keytrack::KeyRegister keys_;
  std::vector<keytrack::RGateRandomness> rand_log_;
  std::map<int, int> plaintext_;
  std::deque<Message> outbox_;
  std::deque<Message> inbox_;
  Transcript transcript_;
  size_t op_cursor_ = 0;
  bool r_sent_ = false;
  bool done_ = false;
  std::optional<qcore::StateVector> ciphertext_output_;
  std::optional<qcore::StateVector> decrypted_output_;
};

/// Honest server state machine (sample mode). Holds only ciphertext and
/// protocol messages; measurement outcomes come from its own seeded source.
class ServerSession {
 public:
  ServerSession(Circuit circuit, std::uint64_t seed)
      : circuit_(std::move(circuit)), rng_(seed) {
    auto violations = circuits::validate(circuit_);
    if (!violations.empty()) {
      throw std::invalid_argument("invalid circuit: " + violations.front());
    }
  }

  bool wants_send() const { return !outbox_.empty(); }
  bool finished() const { return done_; }

  Message take_message() {
    Message m = outbox_.front();
    outbox_.pop_front();
    transcript_.messages.push_back(m);
    return m;
  }

  void deliver(const Message& m) {
    if (m.direction != Direction::ClientToServer) {
      throw std::invalid_argument("server received a server-bound message");
    }
    transcript_.messages.push_back(m);
    switch (m.kind) {
      case MessageKind::EncryptedRegister:
        reg_.init(deserialize_register(m.payload));
        have_register_ = true;
        break;
      case MessageKind::AuxQubit:
        pending_aux_.push_back(deserialize_register(m.payload));
        break;
      case MessageKind::ClassicalX:
        pending_x_.push_back(m.payload.at(0));
        break;
      default:
        throw std::invalid_argument("unexpected message kind at server");
    }
    advance();
  }

  const Transcript& transcript() const { return transcript_; }
  double path_probability() const { return path_probability_; }
  const ServerRegister& register_state() const { return reg_; }

 private:
  void advance() {
    if (!have_register_) return;
    while (op_cursor_ < circuit_.ops.size()) {
      const GateOp& op = circuit_.ops[op_cursor_];
      switch (op.kind) {
        case GateKind::AUX:
          reg_.append_zero(op.wires[0]);
          break;
        case GateKind::MEASURE: {
          const auto b =
              qcore::measure_sample(reg_.state, reg_.phys_of(op.wires[0]), rng_);
          path_probability_ *= b.probability;
          reg_.state = b.post_state;
          reg_.remove(op.wires[0], b.outcome);
          outbox_.push_back(
              Message::classical(MessageKind::ReportedMeasurement, b.outcome));
          break;
        }
        case GateKind::R: {
          if (pending_aux_.empty() || pending_x_.empty()) return;  // wait
          const auto aux = pending_aux_.front();
          const int x = pending_x_.front();
          pending_aux_.pop_front();
          pending_x_.pop_front();
          r_gadget_server_prepare(reg_, op.wires[0], aux, x);
          const auto b =
              qcore::measure_sample(reg_.state, reg_.phys_of(op.wires[0]), rng_);
          path_probability_ *= b.probability;
          reg_.state = b.post_state;
          r_gadget_server_finish(reg_, op.wires[0], b.outcome);
          outbox_.push_back(Message::classical(MessageKind::ClassicalC, b.outcome));
          break;
        }
        default:
          reg_.apply(op);
          break;
      }
      ++op_cursor_;
    }
    outbox_.push_back({Direction::ServerToClient, MessageKind::OutputRegister,
                       serialize_register(reg_.to_logical_order())});
    done_ = true;
  }

  Circuit circuit_;
  qcore::Rng rng_;
  ServerRegister reg_;
  std::deque<qcore::StateVector> pending_aux_;
  std::deque<int> pending_x_;
  std::deque<Message> outbox_;
  Transcript transcript_;
  size_t op_cursor_ = 0;
  bool have_register_ = false;
  bool done_ = false;
  double path_probability_ = 1.0;
};

// --- runs -------------------------------------------------------------------

/// Spec op: invert the pad on the returned register (Z^b X^a per wire).
inline qcore::StateVector decrypt_output(const qcore::StateVector& output,
                                         const keytrack::KeyRegister& keys,
                                         std::span<const int> live_wires) {
  if (static_cast<int>(live_wires.size()) != output.num_wires()) {
    throw std::invalid_argument("live wire list does not match the register");
  }
  std::vector<qcore::PauliKey> pad;
  pad.reserve(live_wires.size());
  for (int w : live_wires) pad.push_back(keys.key_for(w));
  return qcore::qotp_decrypt(output, pad);
}

struct SampleRun {
  qcore::StateVector ciphertext_output{0};
  qcore::StateVector decrypted_output{0};
  std::map<int, int> plaintext_bits;
  keytrack::KeyRegister final_keys;
  Transcript transcript;          // identical on both endpoints
  double path_probability = 1.0;  // product of sampled measurement weights
};

/// Pumps the two state machines through an in-memory channel.
inline SampleRun run_delegation_sampled(const Circuit& circuit,
                                        const qcore::StateVector& input,
                                        std::uint64_t client_seed,
                                        std::uint64_t server_seed,
                                        AuxTiming timing = AuxTiming::at_gate) {
  ClientSession client(circuit, input, client_seed, timing);
  ServerSession server(circuit, server_seed);
  while (!client.finished()) {
    if (client.wants_send()) {
      server.deliver(client.take_message());
    } else if (server.wants_send()) {
      client.deliver(server.take_message());
    } else {
      throw std::logic_error("protocol deadlock");
    }
  }
  SampleRun run;
  run.ciphertext_output = client.ciphertext_output();
  run.decrypted_output = client.decrypted_output();
  run.plaintext_bits = client.plaintext_bits();
  run.final_keys = client.final_keys();
  run.transcript = client.transcript();
  run.path_probability = server.path_probability();
  if (!(client.transcript() == server.transcript())) {
    throw std::logic_error("endpoint transcripts diverged");
  }
  return run;
}

/// Spec op run_delegation: one seed drives both parties (the server's
/// sampling seed is derived with splitmix64).
inline SampleRun run_delegation(const Circuit& circuit,
                                const qcore::StateVector& input,
                                std::uint64_t seed,
                                AuxTiming timing = AuxTiming::at_gate) {
  return run_delegation_sampled(circuit, input, seed,
                                detail::splitmix64(seed), timing);
}

/// One measurement-outcome branch of a branch-mode delegated run.
struct Branch {
  double probability = 1.0;
  qcore::StateVector ciphertext_output{0};
  std::map<int, int> plaintext_bits;
  keytrack::KeyRegister final_keys;
  Transcript transcript;

  qcore::StateVector decrypted_output(const Circuit& circuit) const {
    const auto live = circuit.live_wires_at_end();
    return decrypt_output(ciphertext_output, final_keys, live);
  }
};

struct BranchRun {
  std::vector<Branch> branches;
  circuits::ResourceReport resources;
};

/// Enumerates every measurement branch (weighted by probability); client
/// randomness comes deterministically from the seed exactly as in sample
/// mode, so the message prefix matches run_delegation's for the same seed.
inline BranchRun run_delegation_branches(const Circuit& circuit,
                                         const qcore::StateVector& input,
                                         std::uint64_t client_seed,
                                         AuxTiming timing = AuxTiming::at_gate) {
  auto violations = circuits::validate(circuit);
  if (!violations.empty()) {
    throw std::invalid_argument("invalid circuit: " + violations.front());
  }
  if (input.num_wires() != circuit.initial_wires) {
    throw std::invalid_argument("input width != circuit initial wires");
  }
  if (circuit.final_wires > qcore::kMaxWires) {
    throw std::invalid_argument("circuit exceeds the simulation wire cap");
  }
  qcore::Rng rng(client_seed);
  std::vector<qcore::PauliKey> pad(circuit.initial_wires);
  for (auto& key : pad) key = {rng.bit(), rng.bit()};
  std::vector<keytrack::RGateRandomness> rand_log;
  for (const auto& op : circuit.ops) {
    if (op.kind == GateKind::R) rand_log.push_back({rng.bit(), rng.bit()});
  }

  struct Work {
    double prob = 1.0;
    ServerRegister reg;
    keytrack::KeyRegister keys;
    std::map<int, int> plaintext;
    Transcript transcript;
  };
  Work root;
  const auto ciphertext = qcore::qotp_encrypt(input, pad);
  root.reg.init(ciphertext);
  for (int w = 0; w < circuit.initial_wires; ++w) root.keys.set_key(w, pad[w]);
  root.transcript.messages.push_back({Direction::ClientToServer,
                                      MessageKind::EncryptedRegister,
                                      serialize_register(ciphertext)});
  if (timing == AuxTiming::front_loaded) {
    for (const auto& r : rand_log) {
      root.transcript.messages.push_back(
          {Direction::ClientToServer, MessageKind::AuxQubit,
           serialize_register(aux_qubit_state(r.y, r.d))});
    }
  }
  std::vector<Work> branches{std::move(root)};

  int r_index = 0;
  for (const auto& op : circuit.ops) {
    switch (op.kind) {
      case GateKind::AUX:
        for (auto& b : branches) {
          b.reg.append_zero(op.wires[0]);
          b.keys.set_key(op.wires[0], keytrack::update_aux());
        }
        break;
      case GateKind::MEASURE: {
        std::vector<Work> next;
        for (auto& b : branches) {
          const auto outcomes =
              qcore::measure_branches(b.reg.state, b.reg.phys_of(op.wires[0]));
          for (const auto& o : outcomes) {
            Work child = b;
            child.prob *= o.probability;
            child.reg.state = o.post_state;
            child.reg.remove(op.wires[0], o.outcome);
            child.transcript.messages.push_back(
                Message::classical(MessageKind::ReportedMeasurement, o.outcome));
            child.plaintext[op.wires[0]] =
                child.keys.measure(op.wires[0], o.outcome);
            next.push_back(std::move(child));
          }
        }
        branches = std::move(next);
        break;
      }
      case GateKind::R: {
        const auto r = rand_log[r_index++];
        const auto aux = aux_qubit_state(r.y, r.d);
        const auto aux_payload = serialize_register(aux);
        std::vector<Work> next;
        for (auto& b : branches) {
          const int x =
              keytrack::client_x_message(b.keys.key_for(op.wires[0]), r);
          if (timing == AuxTiming::at_gate) {
            b.transcript.messages.push_back({Direction::ClientToServer,
                                             MessageKind::AuxQubit, aux_payload});
          }
          b.transcript.messages.push_back(
              Message::classical(MessageKind::ClassicalX, x));
          r_gadget_server_prepare(b.reg, op.wires[0], aux, x);
          const auto outcomes =
              qcore::measure_branches(b.reg.state, b.reg.phys_of(op.wires[0]));
          for (const auto& o : outcomes) {
            Work child = b;
            child.prob *= o.probability;
            child.reg.state = o.post_state;
            r_gadget_server_finish(child.reg, op.wires[0], o.outcome);
            child.transcript.messages.push_back(
                Message::classical(MessageKind::ClassicalC, o.outcome));
            child.keys.set_key(op.wires[0],
                               keytrack::update_r(child.keys.key_for(op.wires[0]),
                                                  r, o.outcome));
            next.push_back(std::move(child));
          }
        }
        branches = std::move(next);
        break;
      }
      default:
        for (auto& b : branches) {
          b.reg.apply(op);
          switch (op.kind) {
            case GateKind::H:
              b.keys.set_key(op.wires[0],
                             keytrack::update_h(b.keys.key_for(op.wires[0])));
              break;
            case GateKind::P:
              b.keys.set_key(op.wires[0],
                             keytrack::update_p(b.keys.key_for(op.wires[0])));
              break;
            case GateKind::CNOT: {
              auto [ck, tk] = keytrack::update_cnot(b.keys.key_for(op.wires[0]),
                                                    b.keys.key_for(op.wires[1]));
              b.keys.set_key(op.wires[0], ck);
              b.keys.set_key(op.wires[1], tk);
              break;
            }
            default:
              break;  // X and Z leave the key unchanged
          }
        }
        break;
    }
  }

  BranchRun run;
  run.resources = circuits::resources(circuit);
  for (auto& b : branches) {
    Branch out;
    out.probability = b.prob;
    out.ciphertext_output = b.reg.to_logical_order();
    out.plaintext_bits = std::move(b.plaintext);
    out.final_keys = std::move(b.keys);
    out.transcript = std::move(b.transcript);
    out.transcript.messages.push_back(
        {Direction::ServerToClient, MessageKind::OutputRegister,
         serialize_register(out.ciphertext_output)});
    run.branches.push_back(std::move(out));
  }
  return run;
}

}  // namespace qced::engine
