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

#include "qced/transport.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <future>
#include <thread>

#include "qced/circuits.hpp"
#include "qced/engine.hpp"
#include "testutil.hpp"

using namespace qced;
using engine::Message;
using engine::MessageKind;

namespace {

Message random_message(qcore::Rng& rng) {
  const MessageKind kinds[] = {
      MessageKind::EncryptedRegister, MessageKind::AuxQubit,
      MessageKind::ClassicalX,        MessageKind::ClassicalC,
      MessageKind::ReportedMeasurement, MessageKind::OutputRegister,
  };
  const auto kind = kinds[rng.next_word() % 6];
  switch (kind) {
    case MessageKind::ClassicalX:
    case MessageKind::ClassicalC:
    case MessageKind::ReportedMeasurement:
      return Message::classical(kind, rng.bit());
    case MessageKind::AuxQubit:
      return {engine::direction_for(kind), kind,
              engine::serialize_register(qcore::random_state(1, rng))};
    default: {
      const int n = 1 + static_cast<int>(rng.next_word() % 3);
      return {engine::direction_for(kind), kind,
              engine::serialize_register(qcore::random_state(n, rng))};
    }
  }
}

}  // namespace

TEST_CASE("frame round trip is the identity on every message kind") {
  qcore::Rng rng(1001);
  for (int i = 0; i < 500; ++i) {
    const auto m = random_message(rng);
    const auto frame = transport::encode(m);
    REQUIRE(frame.type_tag == static_cast<std::uint8_t>(m.kind));
    const auto back = transport::decode(frame);
    REQUIRE(back == m);
    // Byte-level framing round trip.
    const auto bytes = transport::encode_frame_bytes(frame);
    REQUIRE(bytes.size() == 5 + frame.payload.size());
    const std::uint32_t length = (std::uint32_t{bytes[0]} << 24) |
                                 (std::uint32_t{bytes[1]} << 16) |
                                 (std::uint32_t{bytes[2]} << 8) |
                                 std::uint32_t{bytes[3]};
    REQUIRE(length == 1 + frame.payload.size());
  }
  // Spec'd example: a classical x bit of 1.
  const auto frame =
      transport::encode(Message::classical(MessageKind::ClassicalX, 1));
  REQUIRE(frame.type_tag == 0x03);
  REQUIRE(frame.payload == std::vector<std::uint8_t>{0x01});
  REQUIRE(transport::encode_frame_bytes(frame) ==
          std::vector<std::uint8_t>{0, 0, 0, 2, 0x03, 0x01});
}

TEST_CASE("decode rejects malformed frames") {
  REQUIRE_THROWS_AS(transport::decode({0x07, {0x00}}), transport::TransportError);
  REQUIRE_THROWS_AS(transport::decode({0x00, {0x00}}), transport::TransportError);
  // Classical payload must be one bit.
  REQUIRE_THROWS_AS(transport::decode({0x03, {0x02}}), transport::TransportError);
  REQUIRE_THROWS_AS(transport::decode({0x03, {0x01, 0x00}}),
                    transport::TransportError);
  // Truncated register payload.
  auto good = engine::serialize_register(qcore::StateVector(1));
  good.pop_back();
  REQUIRE_THROWS_AS(transport::decode({0x01, good}), transport::TransportError);
  // Norm violation.
  auto denorm = engine::serialize_register(qcore::StateVector(1));
  std::fill(denorm.begin() + 1, denorm.begin() + 9, 0);
  REQUIRE_THROWS_AS(transport::decode({0x01, denorm}),
                    transport::TransportError);
}

TEST_CASE("handshake frames") {
  transport::Handshake hs;
  hs.circuit_hash = hash::sha256(std::string_view("qubits 1\nH 0\n"));
  hs.seed = 0x0123456789abcdefull;
  const auto frame = transport::handshake_frame(hs);
  REQUIRE(frame.type_tag == 0x06);
  REQUIRE(frame.payload.size() == 40);
  const auto back = transport::parse_handshake(frame);
  REQUIRE(back.circuit_hash == hs.circuit_hash);
  REQUIRE(back.seed == hs.seed);
  REQUIRE_THROWS_AS(transport::parse_handshake({0x06, {1, 2, 3}}),
                    transport::TransportError);
}

TEST_CASE("loopback session reproduces the in-process run") {
  auto circuit = circuits::parse_circuit_or_throw("qubits 1\nH 0\nR 0\n");
  qcore::Rng rng(71);
  auto input = qcore::random_state(1, rng);

  transport::Listener listener(0);
  const std::uint64_t client_seed = 4242;
  const std::uint64_t server_seed = 777;
  auto server = std::async(std::launch::async, [&] {
    return transport::serve_one(listener, circuit, server_seed);
  });
  auto client = transport::connect_and_run("127.0.0.1", listener.port(),
                                           circuit, input, client_seed);
  auto served = server.get();

  REQUIRE(client.server_seed == server_seed);
  REQUIRE(served.client_seed == client_seed);
  REQUIRE(client.clean_close);

  // Bit-identical transcripts: socket vs in-process with matched seeds.
  auto oracle =
      engine::run_delegation_sampled(circuit, input, client_seed, server_seed);
  REQUIRE(client.run.transcript.dump() == oracle.transcript.dump());
  REQUIRE(served.transcript.dump() == oracle.transcript.dump());
  REQUIRE(qcore::fidelity_up_to_global_phase(client.run.decrypted_output,
                                             oracle.decrypted_output) >=
          1.0 - 1e-12);
  REQUIRE(client.run.plaintext_bits == oracle.plaintext_bits);
}

TEST_CASE("Clifford session exchanges only the register and the output") {
  auto circuit = circuits::parse_circuit_or_throw("qubits 2\nH 0\nCNOT 0 1\n");
  transport::Listener listener(0);
  auto server = std::async(std::launch::async, [&] {
    return transport::serve_one(listener, circuit, 5);
  });
  auto client = transport::connect_and_run("127.0.0.1", listener.port(),
                                           circuit, qcore::StateVector(2), 6);
  auto served = server.get();
  // After the handshake: one register frame up, one output frame down, then
  // a clean close.
  REQUIRE(client.frames_sent == 1);
  REQUIRE(client.frames_received == 1);
  REQUIRE(served.frames_received == 1);
  REQUIRE(served.frames_sent == 1);
  REQUIRE(client.clean_close);
}

TEST_CASE("circuit hash mismatch aborts before any register is sent") {
  auto circuit_a = circuits::parse_circuit_or_throw("qubits 1\nH 0\n");
  auto circuit_b = circuits::parse_circuit_or_throw("qubits 1\nX 0\n");
  transport::Listener listener(0);
  auto server = std::async(std::launch::async, [&] {
    return transport::serve_one(listener, circuit_a, 5);
  });
  REQUIRE_THROWS_WITH(
      transport::connect_and_run("127.0.0.1", listener.port(), circuit_b,
                                 qcore::StateVector(1), 6),
      Catch::Matchers::ContainsSubstring("hash mismatch"));
  REQUIRE_THROWS_WITH(server.get(),
                      Catch::Matchers::ContainsSubstring("hash mismatch"));
}

TEST_CASE("keys never appear in any frame") {
  // Five live wires, so the canonical key encoding is five bytes; a chance
  // collision in the payload stream is at the 2^-40 level.
  auto circuit = circuits::parse_circuit_or_throw(
      "qubits 5\nH 0\nR 1\nCNOT 0 2\nR 3\nP 4\nR 0\n");
  qcore::Rng rng(97);
  auto input = qcore::random_product_state(5, rng);

  transport::Listener listener(0);
  auto server = std::async(std::launch::async, [&] {
    return transport::serve_one(listener, circuit, 31337);
  });
  auto client = transport::connect_and_run("127.0.0.1", listener.port(),
                                           circuit, input, 424242);
  server.get();

  std::vector<std::uint8_t> key_bytes;
  for (const auto& [wire, key] : client.run.final_keys.quantum_keys) {
    key_bytes.push_back(static_cast<std::uint8_t>((key.a << 1) | key.b));
  }
  REQUIRE(key_bytes.size() == 5);
  auto contains = [](const std::vector<std::uint8_t>& haystack,
                     const std::vector<std::uint8_t>& needle) {
    return std::search(haystack.begin(), haystack.end(), needle.begin(),
                       needle.end()) != haystack.end();
  };
  for (const auto& message : client.run.transcript.messages) {
    const auto bytes = transport::encode_frame_bytes(transport::encode(message));
    REQUIRE_FALSE(contains(bytes, key_bytes));
  }
}

TEST_CASE("read_frame reports truncation and handles EOF") {
  int fds[2];
  REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
  transport::detail::Fd a(fds[0]), b(fds[1]);
  // Whole frame arrives intact.
  transport::write_frame(a.get(), {0x03, {0x01}});
  auto frame = transport::read_frame(b.get());
  REQUIRE(frame.has_value());
  REQUIRE(frame->type_tag == 0x03);
  // Truncated frame: length promises more bytes than arrive before close.
  const std::uint8_t partial[] = {0, 0, 0, 5, 0x01};
  transport::detail::write_all(a.get(), partial);
  a.reset();
  REQUIRE_THROWS_AS(transport::read_frame(b.get()), transport::TransportError);
  // Clean EOF at a frame boundary.
  int fds2[2];
  REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds2) == 0);
  transport::detail::Fd c(fds2[0]), d(fds2[1]);
  c.reset();
  REQUIRE_FALSE(transport::read_frame(d.get()).has_value());
}
