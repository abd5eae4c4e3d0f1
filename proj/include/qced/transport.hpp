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

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qced/circuits.hpp"
#include "qced/engine.hpp"
#include "qced/hash.hpp"
#include "qced/qcore.hpp"

// Framed wire protocol and socket endpoints so the client and server state
// machines can run as separate OS processes.
//
// Frame layout: 4-byte big-endian length (= 1 + payload length), 1 type-tag
// byte, payload. Tags 0x01..0x06 are the protocol message kinds. The session
// opens with one handshake frame from each side (tag 0x06, payload = 32-byte
// SHA-256 of the canonical circuit text + 8-byte little-endian seed); both
// sides abort before any register moves if the hashes disagree.
//
// Serializing amplitudes over TCP is a simulation device standing in for the
// quantum channel; it does not model no-cloning, which is why the privacy
// audits run only in the joint-state mode of the security module.
namespace qced::transport {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Frame {
  std::uint8_t type_tag = 0;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const Frame&, const Frame&) = default;
};

inline constexpr std::uint32_t kMaxFrameLength = 1u + 16u * (1u << 14);

inline std::vector<std::uint8_t> encode_frame_bytes(const Frame& frame) {
  const std::uint32_t length = 1 + static_cast<std::uint32_t>(frame.payload.size());
  std::vector<std::uint8_t> out;
  out.reserve(4 + length);
  out.push_back(static_cast<std::uint8_t>(length >> 24));
  out.push_back(static_cast<std::uint8_t>(length >> 16));
  out.push_back(static_cast<std::uint8_t>(length >> 8));
  out.push_back(static_cast<std::uint8_t>(length));
  out.push_back(frame.type_tag);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

/// Message -> Frame: the tag is the message kind, the payload is verbatim.
inline Frame encode(const engine::Message& message) {
  return {static_cast<std::uint8_t>(message.kind), message.payload};
}

/// Frame -> Message; validates the tag, the direction-neutral payload shape
/// and (for register payloads) the norm.
inline engine::Message decode(const Frame& frame) {
  if (frame.type_tag < 0x01 || frame.type_tag > 0x06) {
    throw TransportError("unknown frame tag " + std::to_string(frame.type_tag));
  }
  const auto kind = static_cast<engine::MessageKind>(frame.type_tag);
  switch (kind) {
    case engine::MessageKind::ClassicalX:
    case engine::MessageKind::ClassicalC:
    case engine::MessageKind::ReportedMeasurement:
      if (frame.payload.size() != 1 || frame.payload[0] > 1) {
        throw TransportError("classical frame payload must be a single bit");
      }
      break;
    default:
      try {
        engine::deserialize_register(frame.payload);
      } catch (const std::invalid_argument& e) {
        throw TransportError(std::string("bad register payload: ") + e.what());
      }
      break;
  }
  return {engine::direction_for(kind), kind, frame.payload};
}

// --- handshake -----------------------------------------------------------------

struct Handshake {
  hash::Digest circuit_hash{};
  std::uint64_t seed = 0;
};

inline Frame handshake_frame(const Handshake& hs) {
  Frame f;
  f.type_tag = 0x06;
  f.payload.assign(hs.circuit_hash.begin(), hs.circuit_hash.end());
  for (int i = 0; i < 8; ++i) {
    f.payload.push_back(static_cast<std::uint8_t>((hs.seed >> (8 * i)) & 0xff));
  }
  return f;
}

inline Handshake parse_handshake(const Frame& frame) {
  if (frame.type_tag != 0x06 || frame.payload.size() != 40) {
    throw TransportError("malformed handshake frame");
  }
  Handshake hs;
  std::copy(frame.payload.begin(), frame.payload.begin() + 32,
            hs.circuit_hash.begin());
  for (int i = 0; i < 8; ++i) {
    hs.seed |= static_cast<std::uint64_t>(frame.payload[32 + i]) << (8 * i);
  }
  return hs;
}

inline hash::Digest circuit_digest(const circuits::Circuit& circuit) {
  return hash::sha256(circuits::serialize(circuit));
}

// --- sockets -------------------------------------------------------------------

namespace detail {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  Fd& operator=(Fd&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = other.fd_;
      other.fd_ = -1;
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline void set_timeout(int fd, int seconds) {
  timeval tv{};
  tv.tv_sec = seconds;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

inline void write_all(int fd, std::span<const std::uint8_t> bytes) {
  size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, 0);
    if (n <= 0) throw TransportError("send failed (timeout or peer closed)");
    off += static_cast<size_t>(n);
  }
}

/// Reads exactly n bytes; returns false on clean EOF at a frame boundary.
inline bool read_exact(int fd, std::uint8_t* out, size_t n, bool eof_ok) {
  size_t off = 0;
  while (off < n) {
    const ssize_t r = ::recv(fd, out + off, n - off, 0);
    if (r == 0) {
      if (eof_ok && off == 0) return false;
      throw TransportError("connection closed mid-frame");
    }
    if (r < 0) throw TransportError("recv failed (timeout)");
    off += static_cast<size_t>(r);
  }
  return true;
}

}  // namespace detail

inline void write_frame(int fd, const Frame& frame) {
  const auto bytes = encode_frame_bytes(frame);
  detail::write_all(fd, bytes);
}

/// Reads one frame; empty optional on clean close.
inline std::optional<Frame> read_frame(int fd) {
  std::uint8_t head[4];
  if (!detail::read_exact(fd, head, 4, /*eof_ok=*/true)) return std::nullopt;
  const std::uint32_t length = (std::uint32_t{head[0]} << 24) |
                               (std::uint32_t{head[1]} << 16) |
                               (std::uint32_t{head[2]} << 8) |
                               std::uint32_t{head[3]};
  if (length < 1 || length > kMaxFrameLength) {
    throw TransportError("frame length out of range");
  }
  Frame frame;
  std::uint8_t tag;
  detail::read_exact(fd, &tag, 1, /*eof_ok=*/false);
  frame.type_tag = tag;
  frame.payload.resize(length - 1);
  if (length > 1) {
    detail::read_exact(fd, frame.payload.data(), frame.payload.size(),
                       /*eof_ok=*/false);
  }
  return frame;
}

/// One listening socket; port 0 picks a free port.
class Listener {
 public:
  explicit Listener(std::uint16_t port) {
    fd_ = detail::Fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd_.valid()) throw TransportError("socket() failed");
    int one = 1;
    ::setsockopt(fd_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw TransportError("bind failed on port " + std::to_string(port));
    }
    if (::listen(fd_.get(), 1) != 0) throw TransportError("listen failed");
    socklen_t len = sizeof(addr);
    ::getsockname(fd_.get(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  std::uint16_t port() const { return port_; }
  int fd() const { return fd_.get(); }

 private:
  detail::Fd fd_;
  std::uint16_t port_ = 0;
};

struct ServeResult {
  engine::Transcript transcript;
  std::uint64_t client_seed = 0;
  size_t frames_received = 0;
  size_t frames_sent = 0;
};

/// Accepts one session and plays the honest server. The server samples its
/// measurements from its own seed, which it announces in the handshake.
inline ServeResult serve_one(Listener& listener, const circuits::Circuit& circuit,
                             std::uint64_t seed, int timeout_seconds = 30) {
  sockaddr_in peer{};
  socklen_t len = sizeof(peer);
  detail::Fd conn(::accept(listener.fd(), reinterpret_cast<sockaddr*>(&peer), &len));
  if (!conn.valid()) throw TransportError("accept failed");
  detail::set_timeout(conn.get(), timeout_seconds);

  ServeResult result;
  const auto my_digest = circuit_digest(circuit);

  auto first = read_frame(conn.get());
  if (!first) throw TransportError("peer closed before handshake");
  const Handshake peer_hs = parse_handshake(*first);
  result.client_seed = peer_hs.seed;
  write_frame(conn.get(), handshake_frame({my_digest, seed}));
  if (peer_hs.circuit_hash != my_digest) {
    throw TransportError("circuit hash mismatch; aborting before any register");
  }

  engine::ServerSession session(circuit, seed);
  while (true) {
    while (session.wants_send()) {
      write_frame(conn.get(), encode(session.take_message()));
      ++result.frames_sent;
    }
    if (session.finished()) break;
    auto frame = read_frame(conn.get());
    if (!frame) throw TransportError("peer closed mid-protocol");
    ++result.frames_received;
    session.deliver(decode(*frame));
  }
  result.transcript = session.transcript();
  return result;
}

struct ConnectResult {
  engine::SampleRun run;
  std::uint64_t server_seed = 0;
  size_t frames_sent = 0;
  size_t frames_received = 0;
  bool clean_close = false;
};

/// Connects, handshakes, and plays the honest client.
inline ConnectResult connect_and_run(const std::string& host, std::uint16_t port,
                                     const circuits::Circuit& circuit,
                                     const qcore::StateVector& input,
                                     std::uint64_t seed,
                                     int timeout_seconds = 30) {
  detail::Fd conn(::socket(AF_INET, SOCK_STREAM, 0));
  if (!conn.valid()) throw TransportError("socket() failed");
  detail::set_timeout(conn.get(), timeout_seconds);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw TransportError("bad host address: " + host);
  }
  if (::connect(conn.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw TransportError("connect failed to " + host + ":" + std::to_string(port));
  }

  ConnectResult result;
  const auto my_digest = circuit_digest(circuit);
  write_frame(conn.get(), handshake_frame({my_digest, seed}));
  auto reply = read_frame(conn.get());
  if (!reply) throw TransportError("peer closed before handshake");
  const Handshake peer_hs = parse_handshake(*reply);
  result.server_seed = peer_hs.seed;
  if (peer_hs.circuit_hash != my_digest) {
    throw TransportError("circuit hash mismatch; aborting before any register");
  }

  engine::ClientSession session(circuit, input, seed);
  while (!session.finished()) {
    while (session.wants_send()) {
      write_frame(conn.get(), encode(session.take_message()));
      ++result.frames_sent;
    }
    if (session.finished()) break;
    auto frame = read_frame(conn.get());
    if (!frame) throw TransportError("peer closed mid-protocol");
    ++result.frames_received;
    session.deliver(decode(*frame));
  }
  result.clean_close = !read_frame(conn.get()).has_value();

  result.run.ciphertext_output = session.ciphertext_output();
  result.run.decrypted_output = session.decrypted_output();
  result.run.plaintext_bits = session.plaintext_bits();
  result.run.final_keys = session.final_keys();
  result.run.transcript = session.transcript();
  return result;
}

}  // namespace qced::transport
