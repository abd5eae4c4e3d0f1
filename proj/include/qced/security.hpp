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

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qced/circuits.hpp"
#include "qced/engine.hpp"
#include "qced/hash.hpp"
#include "qced/keytrack.hpp"
#include "qced/qcore.hpp"

// The privacy lab: joint-state simulation of the delegation protocol against
// a scripted (possibly deviating) server, the entanglement-based and
// delayed-measurement client variants, the input-independent simulator, and
// channel comparison through Choi matrices.
//
// The induced channel of a server strategy S' maps (client input (x) server
// prior register) to whatever S' holds when the session ends, including any
// classical outcomes it recorded. Feeding half of a maximally entangled
// reference state through the interaction yields the Choi matrix; two
// channels are equal iff their Choi matrices are, which certifies diamond
// distance zero without the semidefinite optimization.
namespace qced::security {

using circuits::Circuit;
using circuits::GateKind;
using circuits::GateOp;

/// How the honest client sources its messages.
enum class ClientVariant {
  protocol1,     // one-time-pad encryption, aux qubits prepared directly
  intermediate,  // as protocol1 but x uniform and y = a xor x per R gate
  protocol2,     // teleport-encrypt; aux qubits from EPR halves, inline measures
  protocol3,     // protocol2 with every client measurement delayed to the end
  simulator,     // EPR halves and uniform bits only; never touches the input
};

/// Client message behaviour. leaky_x deliberately sends x = a instead of
/// x = a xor y; it exists to prove the audits can detect a broken client.
enum class ClientModel { honest, leaky_x };

enum class RunMode { branch, sample };

// --- joint-state branch simulator -------------------------------------------

struct SecBranch {
  double weight = 1.0;
  qcore::Vector amps;
  std::vector<int> scratch;   // classical values by slot
  std::vector<int> records;   // classical bits the strategy keeps
  keytrack::KeyRegister keys;
  std::map<int, int> plaintext;
};

/// Weighted pure-state branches over a shared wire layout. Wires are named
/// by stable handles; classical values live in per-branch scratch slots so
/// forks (measurements, coin flips) stay aligned across branches.
class SecSim {
 public:
  SecSim(RunMode mode, std::uint64_t seed) : mode_(mode), rng_(seed) {}

  void init(int wires, qcore::Vector amps) {
    qcore::check_wire_count(wires);
    if (amps.size() != qcore::dim_for(wires)) {
      throw std::invalid_argument("initial amplitude length mismatch");
    }
    order_.clear();
    next_handle_ = 0;
    for (int i = 0; i < wires; ++i) order_.push_back(next_handle_++);
    branches_.clear();
    SecBranch root;
    root.amps = std::move(amps);
    branches_.push_back(std::move(root));
  }

  int width() const { return static_cast<int>(order_.size()); }

  int pos(int handle) const {
    for (size_t i = 0; i < order_.size(); ++i) {
      if (order_[i] == handle) return static_cast<int>(i);
    }
    throw std::invalid_argument("unknown wire handle");
  }

  std::vector<SecBranch>& branches() { return branches_; }
  const std::vector<SecBranch>& branches() const { return branches_; }

  int add_zero_wire() {
    qcore::check_wire_count(width() + 1);
    for (auto& b : branches_) {
      // New wire appended at the end = least significant index bit.
      qcore::Vector out(b.amps.size() * 2);
      for (std::int64_t i = 0; i < b.amps.size(); ++i) {
        out(2 * i) = b.amps(i);
        out(2 * i + 1) = qcore::Complex{0, 0};
      }
      b.amps = std::move(out);
    }
    order_.push_back(next_handle_);
    return next_handle_++;
  }

  std::pair<int, int> add_epr_pair() {
    qcore::check_wire_count(width() + 2);
    const double s = 1.0 / std::numbers::sqrt2;
    for (auto& b : branches_) {
      qcore::Vector out = qcore::Vector::Zero(b.amps.size() * 4);
      for (std::int64_t i = 0; i < b.amps.size(); ++i) {
        out(4 * i + 0) = s * b.amps(i);  // |00>
        out(4 * i + 3) = s * b.amps(i);  // |11>
      }
      b.amps = std::move(out);
    }
    const int first = next_handle_++;
    const int second = next_handle_++;
    order_.push_back(first);
    order_.push_back(second);
    return {first, second};
  }

  void apply(const qcore::Matrix& u, std::span<const int> handles) {
    const auto positions = to_positions(handles);
    for (auto& b : branches_) {
      qcore::apply_unitary_in_place(b.amps, width(), u, positions);
    }
  }
  void apply(const qcore::Matrix& u, std::initializer_list<int> handles) {
    apply(u, std::span<const int>(handles.begin(), handles.size()));
  }

  /// Applies `u` only in branches whose scratch slot holds 1.
  void apply_if(int slot, const qcore::Matrix& u,
                std::initializer_list<int> handles) {
    const auto positions = to_positions(
        std::span<const int>(handles.begin(), handles.size()));
    for (auto& b : branches_) {
      if (b.scratch.at(slot)) {
        qcore::apply_unitary_in_place(b.amps, width(), u, positions);
      }
    }
  }

  /// New scratch slot with a per-branch computed value (no forking).
  int computed_bit(const std::function<int(const SecBranch&)>& fn) {
    const int slot = scratch_count_++;
    for (auto& b : branches_) b.scratch.push_back(fn(b) & 1);
    return slot;
  }

  int constant_bit(int v) {
    return computed_bit([v](const SecBranch&) { return v; });
  }

  /// Uniformly random client bit: forks every branch in branch mode, draws
  /// from the seeded source in sample mode.
  int random_bit() {
    const int slot = scratch_count_++;
    if (mode_ == RunMode::sample) {
      const int v = rng_.bit();
      for (auto& b : branches_) b.scratch.push_back(v);
      return slot;
    }
    std::vector<SecBranch> next;
    next.reserve(branches_.size() * 2);
    for (auto& b : branches_) {
      for (int v = 0; v < 2; ++v) {
        SecBranch child = b;
        child.weight *= 0.5;
        child.scratch.push_back(v);
        next.push_back(std::move(child));
      }
    }
    branches_ = std::move(next);
    return slot;
  }

  /// Computational-basis measurement of a wire; outcome goes to a new
  /// scratch slot. Branch mode forks by the Born weights; sample mode draws
  /// one outcome and multiplies the path weight.
  int measure(int handle, bool remove) {
    const int slot = scratch_count_++;
    const int p = pos(handle);
    std::vector<SecBranch> next;
    for (auto& b : branches_) {
      double probs[2];
      for (int o = 0; o < 2; ++o) {
        probs[o] = qcore::detail::outcome_probability(b.amps, width(), p, o);
      }
      if (mode_ == RunMode::sample) {
        int o;
        if (probs[0] <= 1e-15) {
          o = 1;
          rng_.uniform01();
        } else if (probs[1] <= 1e-15) {
          o = 0;
          rng_.uniform01();
        } else {
          o = rng_.uniform01() < probs[0] ? 0 : 1;
        }
        SecBranch child = std::move(b);
        child.weight *= probs[o];
        child.amps = qcore::detail::project(child.amps, width(), p, o, probs[o]);
        child.scratch.push_back(o);
        next.push_back(std::move(child));
      } else {
        for (int o = 0; o < 2; ++o) {
          if (probs[o] <= 1e-15) continue;
          SecBranch child = b;
          child.weight *= probs[o];
          child.amps = qcore::detail::project(child.amps, width(), p, o, probs[o]);
          child.scratch.push_back(o);
          next.push_back(std::move(child));
        }
      }
    }
    branches_ = std::move(next);
    if (remove) {
      for (auto& b : branches_) {
        const int o = b.scratch.back();
        qcore::StateVector sv(width());
        sv.raw() = std::move(b.amps);
        b.amps = qcore::remove_collapsed_wire(sv, p, o).amplitudes();
      }
      order_.erase(order_.begin() + p);
    }
    return slot;
  }

  void record(int slot) {
    for (auto& b : branches_) b.records.push_back(b.scratch.at(slot));
  }

  /// Weighted sum of the branches' reduced projectors over the kept wires
  /// (in the listed order), grouped into blocks by the recorded bits.
  std::map<std::uint64_t, qcore::Matrix> accumulate(
      std::span<const int> kept_handles) const {
    std::map<std::uint64_t, qcore::Matrix> blocks;
    const int n = width();
    const int nk = static_cast<int>(kept_handles.size());
    std::vector<int> kept_pos;
    for (int h : kept_handles) kept_pos.push_back(pos(h));
    std::vector<int> traced_pos;
    for (int p = 0; p < n; ++p) {
      if (std::find(kept_pos.begin(), kept_pos.end(), p) == kept_pos.end()) {
        traced_pos.push_back(p);
      }
    }
    const int nt = static_cast<int>(traced_pos.size());
    const std::int64_t dk = qcore::dim_for(nk);
    const std::int64_t dt = qcore::dim_for(nt);
    for (const auto& b : branches_) {
      qcore::Matrix m = qcore::Matrix::Zero(dt, dk);
      for (std::int64_t i = 0; i < b.amps.size(); ++i) {
        std::int64_t k = 0;
        for (int j = 0; j < nk; ++j) {
          if (qcore::index_bit(i, n, kept_pos[j])) {
            k |= std::int64_t{1} << (nk - 1 - j);
          }
        }
        std::int64_t t = 0;
        for (int j = 0; j < nt; ++j) {
          if (qcore::index_bit(i, n, traced_pos[j])) {
            t |= std::int64_t{1} << (nt - 1 - j);
          }
        }
        m(t, k) = b.amps(i);
      }
      std::uint64_t key = 0;
      for (size_t j = 0; j < b.records.size(); ++j) {
        key |= static_cast<std::uint64_t>(b.records[j] & 1) << j;
      }
      auto [it, inserted] = blocks.try_emplace(key, qcore::Matrix::Zero(dk, dk));
      it->second.noalias() += b.weight * (m.transpose() * m.conjugate());
    }
    return blocks;
  }

  double total_weight() const {
    double w = 0.0;
    for (const auto& b : branches_) w += b.weight;
    return w;
  }

 private:
  std::vector<int> to_positions(std::span<const int> handles) const {
    std::vector<int> out;
    out.reserve(handles.size());
    for (int h : handles) out.push_back(pos(h));
    return out;
  }

  RunMode mode_;
  qcore::Rng rng_;
  std::vector<int> order_;  // handle at each physical position
  int next_handle_ = 0;
  int scratch_count_ = 0;
  std::vector<SecBranch> branches_;
};

// --- server strategies --------------------------------------------------------

/// A scripted deviating server. It consumes exactly the message structure the
/// circuit determines and may do anything expressible in the joint simulator:
/// apply unitaries, measure, keep classical records, hold a prior register.
class ServerStrategy {
 public:
  struct Ctx {
    SecSim& sim;
    const Circuit& circuit;
    std::vector<int>& owned;    // handles the strategy holds; defines Z order
    std::map<int, int>& data;   // logical wire -> handle, honest bookkeeping
    std::vector<int> prior;     // prior-register handles (also in owned)
  };

  virtual ~ServerStrategy() = default;
  virtual std::string name() const = 0;
  virtual int prior_wires() const { return 0; }

  virtual void on_register(Ctx&) {}
  virtual void on_gate(Ctx&, const GateOp&) = 0;
  virtual void on_aux(Ctx&, int logical) = 0;
  /// Returns the scratch slot holding the reported measurement bit.
  virtual int on_measure(Ctx&, int logical) = 0;
  /// Returns the scratch slot holding the reply bit c.
  virtual int on_r(Ctx&, int logical, int aux_handle, int x_slot) = 0;
  /// Returns the handles sent back as the output register (the driver
  /// removes them from `owned`; they leave the strategy's possession).
  virtual std::vector<int> finalize(Ctx&) = 0;
};

namespace detail {
inline const qcore::Matrix& gate_matrix(std::string_view name) {
  static const std::map<std::string, qcore::GateMatrix, std::less<>> table = [] {
    std::map<std::string, qcore::GateMatrix, std::less<>> t;
    for (auto g : {"X", "Z", "H", "P", "R", "CNOT", "I"}) {
      t.emplace(g, qcore::standard_gate(g));
    }
    return t;
  }();
  return table.find(name)->second.matrix;
}

inline void erase_handle(std::vector<int>& v, int handle) {
  v.erase(std::find(v.begin(), v.end(), handle));
}
}  // namespace detail

/// Follows the protocol exactly and keeps the honest-but-curious classical
/// view (every x, c and reported bit) as records. Optionally flips each data
/// qubit on receipt, which corrupts the computation but not privacy.
class HonestStrategy : public ServerStrategy {
 public:
  explicit HonestStrategy(bool flip_on_receipt = false)
      : flip_(flip_on_receipt) {}

  std::string name() const override { return flip_ ? "bit-flip" : "honest"; }

  void on_register(Ctx& ctx) override {
    if (!flip_) return;
    for (auto& [logical, handle] : ctx.data) {
      ctx.sim.apply(detail::gate_matrix("X"), {handle});
    }
  }

  void on_gate(Ctx& ctx, const GateOp& op) override {
    if (op.kind == GateKind::CNOT) {
      ctx.sim.apply(detail::gate_matrix("CNOT"),
                    {ctx.data.at(op.wires[0]), ctx.data.at(op.wires[1])});
    } else {
      ctx.sim.apply(detail::gate_matrix(circuits::gate_name(op.kind)),
                    {ctx.data.at(op.wires[0])});
    }
  }

  void on_aux(Ctx& ctx, int logical) override {
    const int h = ctx.sim.add_zero_wire();
    ctx.data[logical] = h;
    ctx.owned.push_back(h);
  }

  int on_measure(Ctx& ctx, int logical) override {
    const int h = ctx.data.at(logical);
    const int slot = ctx.sim.measure(h, /*remove=*/true);
    ctx.sim.record(slot);
    detail::erase_handle(ctx.owned, h);
    ctx.data.erase(logical);
    return slot;
  }

  int on_r(Ctx& ctx, int logical, int aux_handle, int x_slot) override {
    const int data = ctx.data.at(logical);
    ctx.sim.apply(detail::gate_matrix("R"), {data});
    ctx.sim.apply(detail::gate_matrix("CNOT"), {aux_handle, data});
    ctx.sim.apply_if(x_slot, detail::gate_matrix("P"), {aux_handle});
    const int c_slot = ctx.sim.measure(data, /*remove=*/true);
    detail::erase_handle(ctx.owned, data);
    ctx.data[logical] = aux_handle;
    ctx.sim.record(x_slot);
    ctx.sim.record(c_slot);
    return c_slot;
  }

  std::vector<int> finalize(Ctx& ctx) override {
    std::vector<int> out;
    for (const auto& [logical, handle] : ctx.data) out.push_back(handle);
    return out;  // ascending logical order (map order)
  }

 private:
  bool flip_;
};

/// Measures every received qubit on arrival, records the outcomes, keeps
/// nothing quantum, and returns freshly prepared |0> wires as the "output".
class MeasureRecordStrategy : public ServerStrategy {
 public:
  std::string name() const override { return "measure-and-record"; }

  void on_register(Ctx& ctx) override {
    for (auto& [logical, handle] : ctx.data) {
      ctx.sim.record(ctx.sim.measure(handle, /*remove=*/true));
      detail::erase_handle(ctx.owned, handle);
    }
    ctx.data.clear();
  }

  void on_gate(Ctx&, const GateOp&) override {}
  void on_aux(Ctx&, int) override {}

  int on_measure(Ctx& ctx, int) override { return ctx.sim.constant_bit(0); }

  int on_r(Ctx& ctx, int, int aux_handle, int x_slot) override {
    ctx.sim.record(x_slot);
    const int slot = ctx.sim.measure(aux_handle, /*remove=*/true);
    detail::erase_handle(ctx.owned, aux_handle);
    ctx.sim.record(slot);
    return slot;
  }

  std::vector<int> finalize(Ctx& ctx) override {
    std::vector<int> junk;
    for (size_t i = 0; i < ctx.circuit.live_wires_at_end().size(); ++i) {
      const int h = ctx.sim.add_zero_wire();
      ctx.owned.push_back(h);
      junk.push_back(h);
    }
    return junk;
  }
};

/// Honest gadget mechanics, but entangles everything it receives with its
/// prior register through a fixed seeded 2-qubit unitary first.
class RandomUnitaryStrategy : public HonestStrategy {
 public:
  explicit RandomUnitaryStrategy(std::uint64_t seed) {
    qcore::Rng rng(seed);
    qcore::Matrix g(4, 4);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        g(r, c) = qcore::Complex{rng.gaussian(), rng.gaussian()};
      }
    }
    Eigen::HouseholderQR<qcore::Matrix> qr(g);
    qcore::Matrix q = qr.householderQ();
    u_ = q;
  }

  std::string name() const override { return "random-unitary"; }
  int prior_wires() const override { return 1; }

  void on_register(Ctx& ctx) override {
    for (auto& [logical, handle] : ctx.data) {
      ctx.sim.apply(u_, {handle, ctx.prior.at(0)});
    }
  }

  int on_r(Ctx& ctx, int logical, int aux_handle, int x_slot) override {
    ctx.sim.apply(u_, {aux_handle, ctx.prior.at(0)});
    return HonestStrategy::on_r(ctx, logical, aux_handle, x_slot);
  }

 private:
  qcore::Matrix u_;
};

/// Honest gadget mechanics plus a CNOT from every received qubit into the
/// prior register (a persistent entangling wiretap).
class EntanglePriorStrategy : public HonestStrategy {
 public:
  std::string name() const override { return "entangle-with-prior"; }
  int prior_wires() const override { return 1; }

  void on_register(Ctx& ctx) override {
    for (auto& [logical, handle] : ctx.data) {
      ctx.sim.apply(detail::gate_matrix("CNOT"), {handle, ctx.prior.at(0)});
    }
  }

  int on_r(Ctx& ctx, int logical, int aux_handle, int x_slot) override {
    ctx.sim.apply(detail::gate_matrix("CNOT"), {aux_handle, ctx.prior.at(0)});
    return HonestStrategy::on_r(ctx, logical, aux_handle, x_slot);
  }
};

/// Touches nothing: replies 0 to every interactive prompt and returns the
/// received wires untouched. Its induced channel is discard (x) identity.
class DoNothingStrategy : public ServerStrategy {
 public:
  std::string name() const override { return "do-nothing"; }
  int prior_wires() const override { return 1; }

  void on_gate(Ctx&, const GateOp&) override {}
  void on_aux(Ctx&, int) override {}
  int on_measure(Ctx& ctx, int) override { return ctx.sim.constant_bit(0); }
  int on_r(Ctx& ctx, int, int, int) override { return ctx.sim.constant_bit(0); }

  std::vector<int> finalize(Ctx& ctx) override {
    std::vector<int> out;
    for (int h : ctx.owned) {
      if (std::find(ctx.prior.begin(), ctx.prior.end(), h) == ctx.prior.end()) {
        out.push_back(h);
      }
    }
    return out;
  }
};

inline std::vector<std::unique_ptr<ServerStrategy>> standard_strategies() {
  std::vector<std::unique_ptr<ServerStrategy>> out;
  out.push_back(std::make_unique<HonestStrategy>());
  out.push_back(std::make_unique<MeasureRecordStrategy>());
  out.push_back(std::make_unique<RandomUnitaryStrategy>(0xfeedbeef));
  out.push_back(std::make_unique<EntanglePriorStrategy>());
  out.push_back(std::make_unique<DoNothingStrategy>());
  return out;
}

// --- session driver -----------------------------------------------------------

/// Channel output: density operator over (reference (x) kept server wires),
/// block-diagonal in the strategy's recorded classical bits.
struct ChannelOutput {
  int reference_wires = 0;
  int z_wires = 0;
  int record_count = 0;
  std::map<std::uint64_t, qcore::Matrix> blocks;

  std::int64_t block_dim() const {
    return qcore::dim_for(reference_wires + z_wires);
  }

  /// Dense matrix with index (kept-state index) * 2^records + record-bits.
  qcore::Matrix dense() const {
    const std::int64_t r = std::int64_t{1} << record_count;
    const std::int64_t d = block_dim() * r;
    qcore::Matrix out = qcore::Matrix::Zero(d, d);
    for (const auto& [key, m] : blocks) {
      for (std::int64_t i = 0; i < m.rows(); ++i) {
        for (std::int64_t j = 0; j < m.cols(); ++j) {
          out(i * r + static_cast<std::int64_t>(key),
              j * r + static_cast<std::int64_t>(key)) = m(i, j);
        }
      }
    }
    return out;
  }

  double trace() const {
    double t = 0.0;
    for (const auto& [key, m] : blocks) t += m.trace().real();
    return t;
  }
};

/// (1/2) Tr|A - B|, block by block (the classical records decohere the
/// cross-record sectors in both channels).
inline double channel_distance(const ChannelOutput& a, const ChannelOutput& b) {
  if (a.reference_wires != b.reference_wires || a.z_wires != b.z_wires ||
      a.record_count != b.record_count) {
    throw std::invalid_argument("channel outputs have different shapes");
  }
  std::set<std::uint64_t> keys;
  for (const auto& [k, m] : a.blocks) keys.insert(k);
  for (const auto& [k, m] : b.blocks) keys.insert(k);
  const auto zero = qcore::Matrix::Zero(a.block_dim(), a.block_dim());
  double dist = 0.0;
  for (auto k : keys) {
    const auto ita = a.blocks.find(k);
    const auto itb = b.blocks.find(k);
    dist += qcore::trace_distance(ita == a.blocks.end() ? zero : ita->second,
                                  itb == b.blocks.end() ? zero : itb->second);
  }
  return dist;
}

/// Choi matrix of an induced channel, unnormalized: for a CPTP map it is PSD
/// and its partial trace over the output is the identity on the input.
struct ChoiMatrix {
  std::int64_t input_dim = 1;
  std::int64_t output_dim = 1;
  qcore::Matrix matrix;

  bool is_cptp(std::string* why = nullptr, double tol = 1e-10) const {
    Eigen::SelfAdjointEigenSolver<qcore::Matrix> es(matrix,
                                                    Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) {
      if (why) {
        *why = "not PSD: min eigenvalue " +
               std::to_string(es.eigenvalues().minCoeff());
      }
      return false;
    }
    qcore::Matrix tr_out = qcore::Matrix::Zero(input_dim, input_dim);
    for (std::int64_t i = 0; i < input_dim; ++i) {
      for (std::int64_t j = 0; j < input_dim; ++j) {
        for (std::int64_t o = 0; o < output_dim; ++o) {
          tr_out(i, j) += matrix(i * output_dim + o, j * output_dim + o);
        }
      }
    }
    const double dev =
        (tr_out - qcore::Matrix::Identity(input_dim, input_dim))
            .cwiseAbs()
            .maxCoeff();
    if (dev > tol) {
      if (why) {
        *why = "partial trace over output deviates from identity by " +
               std::to_string(dev);
      }
      return false;
    }
    return true;
  }
};

inline ChoiMatrix to_choi(const ChannelOutput& out) {
  ChoiMatrix choi;
  choi.input_dim = qcore::dim_for(out.reference_wires);
  choi.output_dim =
      qcore::dim_for(out.z_wires) * (std::int64_t{1} << out.record_count);
  choi.matrix = static_cast<double>(choi.input_dim) * out.dense();
  return choi;
}

/// Trace distance of the normalized Choi states of two channels.
inline double choi_trace_distance(const ChoiMatrix& a, const ChoiMatrix& b) {
  if (a.input_dim != b.input_dim || a.output_dim != b.output_dim) {
    throw std::invalid_argument("Choi matrices have different shapes");
  }
  return qcore::trace_distance(a.matrix / static_cast<double>(a.input_dim),
                               b.matrix / static_cast<double>(b.input_dim));
}

struct SessionConfig {
  Circuit circuit;
  ClientVariant variant = ClientVariant::protocol1;
  ClientModel model = ClientModel::honest;
  bool with_reference = false;
  std::optional<qcore::StateVector> input;  // over initial + prior wires
  RunMode mode = RunMode::branch;
  std::uint64_t seed = 0;
};

struct ClientBranchResult {
  double probability = 1.0;
  std::optional<qcore::DensityMatrix> output;  // decrypted, when decodable
  std::map<int, int> plaintext_bits;
  keytrack::KeyRegister final_keys;
};

struct SessionResult {
  ChannelOutput channel;
  std::vector<ClientBranchResult> client_branches;
  std::vector<engine::MessageKind> message_structure;
  engine::Transcript transcript;  // classical payloads filled in sample mode
};

namespace detail {

struct DeferredR {
  int logical;
  int kept_handle;
  int x_slot;
  int c_slot;
};

struct DeferredMeasure {
  int logical;
  int slot;
};

}  // namespace detail

/// Runs one protocol session between the configured client (or simulator)
/// and the given strategy over the shared joint state.
inline SessionResult run_session(const SessionConfig& config,
                                 ServerStrategy& strategy) {
  const Circuit& q = config.circuit;
  {
    auto violations = circuits::validate(q);
    if (!violations.empty()) {
      throw std::invalid_argument("invalid circuit: " + violations.front());
    }
  }
  const int n_c = q.initial_wires;
  const int n_p = strategy.prior_wires();
  const int n_w = config.with_reference ? n_c + n_p : 0;
  const bool sim_client = config.variant == ClientVariant::simulator;

  SecSim sim(config.mode, config.seed);
  SessionResult result;

  // Initial joint state: [reference | client input | server prior].
  {
    qcore::Vector amps;
    if (config.with_reference) {
      const std::int64_t half = qcore::dim_for(n_c + n_p);
      amps = qcore::Vector::Zero(half * half);
      const double s = 1.0 / std::sqrt(static_cast<double>(half));
      for (std::int64_t i = 0; i < half; ++i) amps(i * half + i) = s;
    } else {
      if (!config.input || config.input->num_wires() != n_c + n_p) {
        throw std::invalid_argument(
            "concrete sessions need an input over initial + prior wires");
      }
      amps = config.input->amplitudes();
    }
    sim.init(n_w + n_c + n_p, std::move(amps));
  }

  std::vector<int> w_handles, c_handles, prior_handles;
  for (int i = 0; i < n_w; ++i) w_handles.push_back(i);
  for (int i = 0; i < n_c; ++i) c_handles.push_back(n_w + i);
  for (int i = 0; i < n_p; ++i) prior_handles.push_back(n_w + n_c + i);

  std::vector<int> owned = prior_handles;
  std::map<int, int> data;
  ServerStrategy::Ctx ctx{sim, q, owned, data, prior_handles};

  auto log_message = [&](engine::MessageKind kind, int payload_slot = -1) {
    result.message_structure.push_back(kind);
    engine::Message m;
    m.direction = engine::direction_for(kind);
    m.kind = kind;
    if (payload_slot >= 0 && config.mode == RunMode::sample) {
      m.payload = {static_cast<std::uint8_t>(
          sim.branches().front().scratch.at(payload_slot) & 1)};
    }
    result.transcript.messages.push_back(std::move(m));
  };

  // --- step 1: the register goes to the server ---
  std::vector<std::pair<int, int>> pending_bell;  // (C wire handle, kept half)
  for (int wl = 0; wl < n_c; ++wl) {
    switch (config.variant) {
      case ClientVariant::protocol1:
      case ClientVariant::intermediate: {
        const int a_slot = sim.random_bit();
        const int b_slot = sim.random_bit();
        sim.apply_if(b_slot, detail::gate_matrix("Z"), {c_handles[wl]});
        sim.apply_if(a_slot, detail::gate_matrix("X"), {c_handles[wl]});
        for (auto& br : sim.branches()) {
          br.keys.set_key(wl, {br.scratch[a_slot], br.scratch[b_slot]});
        }
        data[wl] = c_handles[wl];
        owned.push_back(c_handles[wl]);
        break;
      }
      case ClientVariant::protocol2:
      case ClientVariant::protocol3: {
        auto [sent, kept] = sim.add_epr_pair();
        data[wl] = sent;
        owned.push_back(sent);
        pending_bell.push_back({c_handles[wl], kept});
        break;
      }
      case ClientVariant::simulator: {
        auto [sent, kept] = sim.add_epr_pair();
        sim.measure(kept, /*remove=*/true);  // tracing out the kept half
        data[wl] = sent;
        owned.push_back(sent);
        break;
      }
    }
  }
  log_message(engine::MessageKind::EncryptedRegister);
  strategy.on_register(ctx);

  auto bell_measure = [&](int psi_handle, int kept_handle, int logical) {
    sim.apply(detail::gate_matrix("CNOT"), {psi_handle, kept_handle});
    sim.apply(detail::gate_matrix("H"), {psi_handle});
    const int a_slot = sim.measure(kept_handle, /*remove=*/true);
    const int b_slot = sim.measure(psi_handle, /*remove=*/true);
    for (auto& br : sim.branches()) {
      br.keys.set_key(logical, {br.scratch[a_slot], br.scratch[b_slot]});
    }
  };

  if (config.variant == ClientVariant::protocol2) {
    for (int wl = 0; wl < n_c; ++wl) {
      bell_measure(pending_bell[wl].first, pending_bell[wl].second, wl);
    }
  }

  // --- step 2: gadgets in circuit order ---
  std::vector<detail::DeferredR> deferred_r;
  std::vector<detail::DeferredMeasure> deferred_measure;
  const bool track_keys = config.variant == ClientVariant::protocol1 ||
                          config.variant == ClientVariant::intermediate ||
                          config.variant == ClientVariant::protocol2;

  auto update_clifford_keys = [&](const GateOp& op) {
    for (auto& br : sim.branches()) {
      switch (op.kind) {
        case GateKind::H:
          br.keys.set_key(op.wires[0],
                          keytrack::update_h(br.keys.key_for(op.wires[0])));
          break;
        case GateKind::P:
          br.keys.set_key(op.wires[0],
                          keytrack::update_p(br.keys.key_for(op.wires[0])));
          break;
        case GateKind::CNOT: {
          auto [ck, tk] = keytrack::update_cnot(br.keys.key_for(op.wires[0]),
                                                br.keys.key_for(op.wires[1]));
          br.keys.set_key(op.wires[0], ck);
          br.keys.set_key(op.wires[1], tk);
          break;
        }
        default:
          break;
      }
    }
  };

  for (const auto& op : q.ops) {
    switch (op.kind) {
      case GateKind::AUX:
        strategy.on_aux(ctx, op.wires[0]);
        if (track_keys) {
          for (auto& br : sim.branches()) {
            br.keys.set_key(op.wires[0], keytrack::update_aux());
          }
        }
        break;
      case GateKind::MEASURE: {
        const int slot = strategy.on_measure(ctx, op.wires[0]);
        log_message(engine::MessageKind::ReportedMeasurement, slot);
        if (track_keys) {
          for (auto& br : sim.branches()) {
            br.plaintext[op.wires[0]] =
                br.keys.measure(op.wires[0], br.scratch[slot]);
          }
        } else if (config.variant == ClientVariant::protocol3) {
          deferred_measure.push_back({op.wires[0], slot});
        }
        break;
      }
      case GateKind::R: {
        int aux_handle = -1;
        int x_slot = -1;
        int y_slot = -1;
        int d_slot = -1;
        int kept_handle = -1;
        switch (config.variant) {
          case ClientVariant::protocol1: {
            y_slot = sim.random_bit();
            d_slot = sim.random_bit();
            aux_handle = sim.add_zero_wire();
            sim.apply(detail::gate_matrix("H"), {aux_handle});
            sim.apply_if(y_slot, detail::gate_matrix("P"), {aux_handle});
            sim.apply_if(d_slot, detail::gate_matrix("Z"), {aux_handle});
            const bool leaky = config.model == ClientModel::leaky_x;
            const int wl = op.wires[0];
            x_slot = sim.computed_bit([&, wl, y_slot, leaky](const SecBranch& br) {
              const auto key = br.keys.key_for(wl);
              return leaky ? key.a : key.a ^ br.scratch[y_slot];
            });
            break;
          }
          case ClientVariant::intermediate: {
            // x chosen uniformly, y derived as a xor x; same aux preparation.
            x_slot = sim.random_bit();
            d_slot = sim.random_bit();
            const int wl = op.wires[0];
            y_slot = sim.computed_bit([&, wl, x_slot](const SecBranch& br) {
              return br.keys.key_for(wl).a ^ br.scratch[x_slot];
            });
            aux_handle = sim.add_zero_wire();
            sim.apply(detail::gate_matrix("H"), {aux_handle});
            sim.apply_if(y_slot, detail::gate_matrix("P"), {aux_handle});
            sim.apply_if(d_slot, detail::gate_matrix("Z"), {aux_handle});
            break;
          }
          case ClientVariant::protocol2:
          case ClientVariant::protocol3:
          case ClientVariant::simulator: {
            x_slot = sim.random_bit();
            auto [sent, kept] = sim.add_epr_pair();
            aux_handle = sent;
            kept_handle = kept;
            if (sim_client) {
              sim.measure(kept, /*remove=*/true);
              kept_handle = -1;
            }
            break;
          }
        }
        owned.push_back(aux_handle);
        log_message(engine::MessageKind::AuxQubit);
        log_message(engine::MessageKind::ClassicalX, x_slot);
        const int c_slot = strategy.on_r(ctx, op.wires[0], aux_handle, x_slot);
        log_message(engine::MessageKind::ClassicalC, c_slot);
        switch (config.variant) {
          case ClientVariant::protocol1:
          case ClientVariant::intermediate:
            for (auto& br : sim.branches()) {
              br.keys.set_key(
                  op.wires[0],
                  keytrack::update_r(br.keys.key_for(op.wires[0]),
                                     {br.scratch[y_slot], br.scratch[d_slot]},
                                     br.scratch[c_slot]));
            }
            break;
          case ClientVariant::protocol2: {
            const int wl = op.wires[0];
            // y = a xor x with the pre-gadget key; rotate the kept half.
            const int y2_slot = sim.computed_bit([&, wl, x_slot](const SecBranch& br) {
              return br.keys.key_for(wl).a ^ br.scratch[x_slot];
            });
            sim.apply_if(y2_slot, detail::gate_matrix("P"), {kept_handle});
            sim.apply(detail::gate_matrix("H"), {kept_handle});
            d_slot = sim.measure(kept_handle, /*remove=*/true);
            for (auto& br : sim.branches()) {
              br.keys.set_key(
                  wl, keytrack::update_r(br.keys.key_for(wl),
                                         {br.scratch[y2_slot], br.scratch[d_slot]},
                                         br.scratch[c_slot]));
            }
            break;
          }
          case ClientVariant::protocol3:
            deferred_r.push_back({op.wires[0], kept_handle, x_slot, c_slot});
            break;
          case ClientVariant::simulator:
            break;
        }
        break;
      }
      default:
        strategy.on_gate(ctx, op);
        if (track_keys) update_clifford_keys(op);
        break;
    }
  }

  // --- step 3: the output register comes back ---
  std::vector<int> returned = strategy.finalize(ctx);
  for (int h : returned) detail::erase_handle(owned, h);
  log_message(engine::MessageKind::OutputRegister);

  // Protocol 3: every client measurement runs only now, in protocol order.
  if (config.variant == ClientVariant::protocol3) {
    for (int wl = 0; wl < n_c; ++wl) {
      bell_measure(pending_bell[wl].first, pending_bell[wl].second, wl);
    }
    size_t ri = 0, mi = 0;
    for (const auto& op : q.ops) {
      switch (op.kind) {
        case GateKind::AUX:
          for (auto& br : sim.branches()) {
            br.keys.set_key(op.wires[0], keytrack::update_aux());
          }
          break;
        case GateKind::MEASURE: {
          const auto& dm = deferred_measure[mi++];
          for (auto& br : sim.branches()) {
            br.plaintext[dm.logical] =
                br.keys.measure(dm.logical, br.scratch[dm.slot]);
          }
          break;
        }
        case GateKind::R: {
          const auto& dr = deferred_r[ri++];
          const int wl = dr.logical;
          const int x_slot = dr.x_slot;
          const int y_slot = sim.computed_bit([&, wl, x_slot](const SecBranch& br) {
            return br.keys.key_for(wl).a ^ br.scratch[x_slot];
          });
          sim.apply_if(y_slot, detail::gate_matrix("P"), {dr.kept_handle});
          sim.apply(detail::gate_matrix("H"), {dr.kept_handle});
          const int d_slot = sim.measure(dr.kept_handle, /*remove=*/true);
          for (auto& br : sim.branches()) {
            br.keys.set_key(
                wl, keytrack::update_r(br.keys.key_for(wl),
                                       {br.scratch[y_slot], br.scratch[d_slot]},
                                       br.scratch[dr.c_slot]));
          }
          break;
        }
        default:
          update_clifford_keys(op);
          break;
      }
    }
  }

  // Client-side decryption of the returned register (concrete sessions with
  // a structurally honest return only).
  if (!config.with_reference && !sim_client) {
    const auto live = q.live_wires_at_end();
    const bool decodable = returned.size() == live.size();
    if (decodable) {
      for (size_t i = 0; i < live.size(); ++i) {
        const int wl = live[i];
        const int a_slot = sim.computed_bit(
            [&, wl](const SecBranch& br) { return br.keys.key_for(wl).a; });
        const int b_slot = sim.computed_bit(
            [&, wl](const SecBranch& br) { return br.keys.key_for(wl).b; });
        sim.apply_if(a_slot, detail::gate_matrix("X"), {returned[i]});
        sim.apply_if(b_slot, detail::gate_matrix("Z"), {returned[i]});
      }
    }
    for (auto& br : sim.branches()) {
      ClientBranchResult cb;
      cb.probability = br.weight;
      cb.plaintext_bits = br.plaintext;
      cb.final_keys = br.keys;
      result.client_branches.push_back(std::move(cb));
    }
    if (decodable && !returned.empty()) {
      // Reduce each branch onto the returned wires.
      const int n = sim.width();
      std::vector<int> kept_pos;
      for (int h : returned) kept_pos.push_back(sim.pos(h));
      std::vector<int> traced_pos;
      for (int p = 0; p < n; ++p) {
        if (std::find(kept_pos.begin(), kept_pos.end(), p) == kept_pos.end()) {
          traced_pos.push_back(p);
        }
      }
      const int nk = static_cast<int>(kept_pos.size());
      const int nt = static_cast<int>(traced_pos.size());
      size_t index = 0;
      for (auto& br : sim.branches()) {
        qcore::Matrix m =
            qcore::Matrix::Zero(qcore::dim_for(nt), qcore::dim_for(nk));
        for (std::int64_t i = 0; i < br.amps.size(); ++i) {
          std::int64_t k = 0;
          for (int j = 0; j < nk; ++j) {
            if (qcore::index_bit(i, n, kept_pos[j])) {
              k |= std::int64_t{1} << (nk - 1 - j);
            }
          }
          std::int64_t t = 0;
          for (int j = 0; j < nt; ++j) {
            if (qcore::index_bit(i, n, traced_pos[j])) {
              t |= std::int64_t{1} << (nt - 1 - j);
            }
          }
          m(t, k) = br.amps(i);
        }
        qcore::Matrix rho = m.transpose() * m.conjugate();
        result.client_branches[index].output =
            qcore::DensityMatrix(nk, std::move(rho));
        ++index;
      }
    } else if (decodable && returned.empty()) {
      for (auto& cb : result.client_branches) {
        cb.output = qcore::DensityMatrix(0, qcore::Matrix::Identity(1, 1));
      }
    }
  }

  // Channel output over (reference, kept strategy wires), grouped by records.
  std::vector<int> kept = w_handles;
  kept.insert(kept.end(), owned.begin(), owned.end());
  result.channel.reference_wires = n_w;
  result.channel.z_wires = static_cast<int>(owned.size());
  result.channel.record_count =
      sim.branches().empty()
          ? 0
          : static_cast<int>(sim.branches().front().records.size());
  for (const auto& br : sim.branches()) {
    if (static_cast<int>(br.records.size()) != result.channel.record_count) {
      throw std::logic_error("record streams diverged across branches");
    }
  }
  result.channel.blocks = sim.accumulate(kept);
  return result;
}

// --- public operations ---------------------------------------------------------

enum class ChoiMode { real, simulated };

/// Choi channel output of the interaction of `strategy` with the configured
/// client (real) or with the input-independent simulator (simulated).
inline ChannelOutput induced_channel(const Circuit& circuit,
                                     ServerStrategy& strategy,
                                     ClientVariant variant,
                                     ClientModel model = ClientModel::honest) {
  // Reference register mirrors (input, prior); cap the combined width.
  if (2 * (circuit.initial_wires + strategy.prior_wires()) > 12) {
    throw std::invalid_argument("reference + input + prior exceeds 12 wires");
  }
  SessionConfig config;
  config.circuit = circuit;
  config.variant = variant;
  config.model = model;
  config.with_reference = true;
  config.mode = RunMode::branch;
  return run_session(config, strategy).channel;
}

inline ChoiMatrix choi_of_induced_channel(const Circuit& circuit,
                                          ServerStrategy& strategy,
                                          ChoiMode mode) {
  return to_choi(induced_channel(circuit, strategy,
                                 mode == ChoiMode::real
                                     ? ClientVariant::protocol1
                                     : ClientVariant::simulator));
}

/// Everything the honest-but-curious server holds at session end for a
/// concrete input: kept wires plus recorded classical bits.
inline ChannelOutput server_view(const Circuit& circuit,
                                 const qcore::StateVector& input,
                                 ClientVariant variant) {
  HonestStrategy honest;
  SessionConfig config;
  config.circuit = circuit;
  config.variant = variant;
  config.input = input;
  config.mode = RunMode::branch;
  return run_session(config, honest).channel;
}

struct ProtocolBranch {
  double probability = 1.0;
  std::optional<qcore::DensityMatrix> output;
  std::map<int, int> plaintext_bits;
};

struct ProtocolRun {
  std::vector<ProtocolBranch> branches;
  std::vector<engine::MessageKind> message_structure;
};

inline ProtocolRun run_protocol_branches(const Circuit& circuit,
                                         const qcore::StateVector& input,
                                         ClientVariant variant) {
  HonestStrategy honest;
  SessionConfig config;
  config.circuit = circuit;
  config.variant = variant;
  config.input = input;
  config.mode = RunMode::branch;
  auto session = run_session(config, honest);
  ProtocolRun run;
  run.message_structure = std::move(session.message_structure);
  for (auto& cb : session.client_branches) {
    run.branches.push_back({cb.probability, std::move(cb.output),
                            std::move(cb.plaintext_bits)});
  }
  return run;
}

struct ProtocolSample {
  qcore::DensityMatrix output{0, qcore::Matrix::Identity(1, 1)};
  std::map<int, int> plaintext_bits;
  keytrack::KeyRegister final_keys;
  engine::Transcript transcript;
  double path_probability = 1.0;
};

namespace detail {
inline ProtocolSample sampled_run(const Circuit& circuit,
                                  const qcore::StateVector& input,
                                  std::uint64_t seed, ClientVariant variant) {
  HonestStrategy honest;
  SessionConfig config;
  config.circuit = circuit;
  config.variant = variant;
  config.input = input;
  config.mode = RunMode::sample;
  config.seed = seed;
  auto session = run_session(config, honest);
  ProtocolSample out;
  auto& cb = session.client_branches.front();
  if (cb.output) out.output = *cb.output;
  out.plaintext_bits = cb.plaintext_bits;
  out.final_keys = cb.final_keys;
  out.transcript = std::move(session.transcript);
  out.path_probability = cb.probability;
  return out;
}
}  // namespace detail

/// Entanglement-based client (teleport-encrypt, EPR-based aux qubits).
inline ProtocolSample run_protocol2(const Circuit& circuit,
                                    const qcore::StateVector& input,
                                    std::uint64_t seed) {
  return detail::sampled_run(circuit, input, seed, ClientVariant::protocol2);
}

/// Delayed-measurement client: every client measurement happens after the
/// output register is back.
inline ProtocolSample run_protocol3(const Circuit& circuit,
                                    const qcore::StateVector& input,
                                    std::uint64_t seed) {
  return detail::sampled_run(circuit, input, seed, ClientVariant::protocol3);
}

/// Intermediate R-gadget variant: the classical message x is chosen
/// uniformly and y = a xor x, with the auxiliary qubit prepared directly.
inline ProtocolSample run_intermediate_r(const Circuit& circuit,
                                         const qcore::StateVector& input,
                                         std::uint64_t seed) {
  return detail::sampled_run(circuit, input, seed, ClientVariant::intermediate);
}

/// The simulator's message plan: one EPR half per input wire standing in for
/// the encrypted register, and per R gate one EPR half plus a uniform bit.
struct SimulatorSpec {
  int register_halves = 0;
  int aux_halves = 0;
  int uniform_bits = 0;
  std::vector<engine::MessageKind> client_messages;
};

inline SimulatorSpec build_simulator(const Circuit& circuit) {
  auto violations = circuits::validate(circuit);
  if (!violations.empty()) {
    throw std::invalid_argument("invalid circuit: " + violations.front());
  }
  SimulatorSpec spec;
  spec.register_halves = circuit.initial_wires;
  spec.aux_halves = circuit.r_gate_count();
  spec.uniform_bits = circuit.r_gate_count();
  spec.client_messages.push_back(engine::MessageKind::EncryptedRegister);
  for (const auto& op : circuit.ops) {
    if (op.kind == GateKind::R) {
      spec.client_messages.push_back(engine::MessageKind::AuxQubit);
      spec.client_messages.push_back(engine::MessageKind::ClassicalX);
    }
  }
  return spec;
}

/// Density matrix of everything the client transmits, real protocol 1:
/// [register wires..., aux_1..aux_r, x_1..x_r], averaged over keys and
/// per-gate randomness for one fixed pattern of server replies.
inline qcore::DensityMatrix transmission_view(
    const Circuit& circuit, const qcore::StateVector& input,
    std::span<const int> c_pattern, ClientModel model = ClientModel::honest) {
  auto violations = circuits::validate(circuit);
  if (!violations.empty()) {
    throw std::invalid_argument("invalid circuit: " + violations.front());
  }
  if (input.num_wires() != circuit.initial_wires) {
    throw std::invalid_argument("input width != circuit initial wires");
  }
  const int n = circuit.initial_wires;
  const int r = circuit.r_gate_count();
  if (static_cast<int>(c_pattern.size()) != r) {
    throw std::invalid_argument("c pattern length must equal the R count");
  }
  qcore::check_wire_count(n + 2 * r);
  const std::int64_t dim = qcore::dim_for(n + 2 * r);
  qcore::Matrix rho = qcore::Matrix::Zero(dim, dim);
  const std::int64_t key_combos = std::int64_t{1} << (2 * n);
  const std::int64_t rand_combos = std::int64_t{1} << (2 * r);
  const double weight =
      1.0 / static_cast<double>(key_combos * rand_combos);

  std::vector<qcore::PauliKey> pad(n);
  for (std::int64_t kc = 0; kc < key_combos; ++kc) {
    for (int w = 0; w < n; ++w) {
      pad[w] = {static_cast<int>((kc >> (2 * w)) & 1),
                static_cast<int>((kc >> (2 * w + 1)) & 1)};
    }
    const auto ciphertext = qcore::qotp_encrypt(input, pad);
    for (std::int64_t rc = 0; rc < rand_combos; ++rc) {
      keytrack::KeyRegister keys;
      for (int w = 0; w < n; ++w) keys.set_key(w, pad[w]);
      std::vector<qcore::StateVector> aux_states;
      std::vector<int> x_bits;
      int j = 0;
      for (const auto& op : circuit.ops) {
        switch (op.kind) {
          case GateKind::X:
          case GateKind::Z:
            break;
          case GateKind::H:
            keys.set_key(op.wires[0],
                         keytrack::update_h(keys.key_for(op.wires[0])));
            break;
          case GateKind::P:
            keys.set_key(op.wires[0],
                         keytrack::update_p(keys.key_for(op.wires[0])));
            break;
          case GateKind::CNOT: {
            auto [ck, tk] = keytrack::update_cnot(keys.key_for(op.wires[0]),
                                                  keys.key_for(op.wires[1]));
            keys.set_key(op.wires[0], ck);
            keys.set_key(op.wires[1], tk);
            break;
          }
          case GateKind::AUX:
            keys.set_key(op.wires[0], keytrack::update_aux());
            break;
          case GateKind::MEASURE:
            keys.measure(op.wires[0], 0);  // reported bit is irrelevant here
            break;
          case GateKind::R: {
            const int y = static_cast<int>((rc >> (2 * j)) & 1);
            const int d = static_cast<int>((rc >> (2 * j + 1)) & 1);
            const auto key = keys.key_for(op.wires[0]);
            const int x =
                model == ClientModel::leaky_x ? key.a : key.a ^ y;
            aux_states.push_back(engine::aux_qubit_state(y, d));
            x_bits.push_back(x);
            keys.set_key(op.wires[0],
                         keytrack::update_r(key, {y, d}, c_pattern[j]));
            ++j;
            break;
          }
        }
      }
      qcore::StateVector view = ciphertext;
      for (const auto& aux : aux_states) view = view.tensor(aux);
      for (int x : x_bits) view = view.tensor(qcore::StateVector::basis(1, x));
      rho.noalias() +=
          weight * (view.amplitudes() * view.amplitudes().adjoint());
    }
  }
  return qcore::DensityMatrix(n + 2 * r, std::move(rho));
}

/// Marginal of the simulator's transmissions on the same wire layout:
/// EPR halves traced against their kept partners, uniform x bits.
inline qcore::DensityMatrix simulator_message_marginal(const Circuit& circuit) {
  const auto spec = build_simulator(circuit);
  const int halves = spec.register_halves + spec.aux_halves;
  // Joint pure state of all pairs: (kept_i, sent_i) alternating.
  qcore::StateVector joint(0);
  for (int i = 0; i < halves; ++i) joint = joint.tensor(qcore::epr_pair());
  auto rho_full = qcore::DensityMatrix::from_state(joint);
  std::vector<int> sent_positions;
  for (int i = 0; i < halves; ++i) sent_positions.push_back(2 * i + 1);
  auto sent = qcore::partial_trace(rho_full, sent_positions);
  // Append the uniform classical bits as an explicit mixture.
  const int r = spec.uniform_bits;
  const std::int64_t db = std::int64_t{1} << r;
  const std::int64_t dim = sent.dim() * db;
  qcore::Matrix out = qcore::Matrix::Zero(dim, dim);
  for (std::int64_t bits = 0; bits < db; ++bits) {
    for (std::int64_t i = 0; i < sent.dim(); ++i) {
      for (std::int64_t j = 0; j < sent.dim(); ++j) {
        out(i * db + bits, j * db + bits) +=
            sent.matrix()(i, j) / static_cast<double>(db);
      }
    }
  }
  return qcore::DensityMatrix(halves + r, std::move(out));
}

// --- audits ---------------------------------------------------------------------

struct AuditCheck {
  std::string metric;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct AuditReport {
  std::string circuit_hash;
  std::string strategy;
  std::vector<AuditCheck> checks;
  bool pass = true;

  void add(std::string metric, double value, double tolerance) {
    const bool ok = value <= tolerance;
    checks.push_back({std::move(metric), value, tolerance, ok});
    pass = pass && ok;
  }
};

inline std::string circuit_hash_hex(const Circuit& circuit) {
  return hash::hex(hash::sha256(circuits::serialize(circuit)));
}

enum class AuditLevel { exhaustive, monte_carlo };

/// Checks that everything the client transmits is maximally mixed once her
/// keys and per-gate randomness are averaged out, for every pattern of
/// server replies, and that the view is independent of the input.
inline AuditReport audit_ciphertext_mixedness(
    const Circuit& circuit, std::span<const qcore::StateVector> inputs,
    AuditLevel level, int mc_samples = 10000, std::uint64_t seed = 1,
    ClientModel model = ClientModel::honest) {
  AuditReport report;
  report.circuit_hash = circuit_hash_hex(circuit);
  report.strategy = "(client transmissions)";
  const int n = circuit.initial_wires;
  const int r = circuit.r_gate_count();
  if (level == AuditLevel::exhaustive && n > 3) {
    throw std::invalid_argument("exhaustive audit supports at most 3 wires");
  }
  const auto mixed = qcore::DensityMatrix::maximally_mixed(n + 2 * r);

  if (level == AuditLevel::exhaustive) {
    std::vector<qcore::DensityMatrix> first_views;
    for (size_t idx = 0; idx < inputs.size(); ++idx) {
      double worst = 0.0;
      for (std::int64_t pattern = 0; pattern < (std::int64_t{1} << r);
           ++pattern) {
        std::vector<int> cs(r);
        for (int j = 0; j < r; ++j) cs[j] = static_cast<int>((pattern >> j) & 1);
        auto view = transmission_view(circuit, inputs[idx], cs, model);
        worst = std::max(worst, qcore::trace_distance(view, mixed));
        if (idx == 0) first_views.push_back(view);
        if (idx > 0 && pattern < static_cast<std::int64_t>(first_views.size())) {
          report.add("view difference vs input 0 (pattern " +
                         std::to_string(pattern) + ", input " +
                         std::to_string(idx) + ")",
                     qcore::trace_distance(view, first_views[pattern]), 1e-10);
        }
      }
      report.add("max distance to maximally mixed (input " +
                     std::to_string(idx) + ")",
                 worst, 1e-12);
    }
  } else {
    qcore::Rng rng(seed);
    for (size_t idx = 0; idx < inputs.size(); ++idx) {
      // Pool sampled single-shot views.
      const std::int64_t dim = qcore::dim_for(n + 2 * r);
      qcore::Matrix rho = qcore::Matrix::Zero(dim, dim);
      for (int s = 0; s < mc_samples; ++s) {
        std::vector<qcore::PauliKey> pad(n);
        for (auto& k : pad) k = {rng.bit(), rng.bit()};
        keytrack::KeyRegister keys;
        for (int w = 0; w < n; ++w) keys.set_key(w, pad[w]);
        qcore::StateVector view = qcore::qotp_encrypt(inputs[idx], pad);
        std::vector<qcore::StateVector> aux_states;
        std::vector<int> x_bits;
        for (const auto& op : circuit.ops) {
          switch (op.kind) {
            case GateKind::H:
              keys.set_key(op.wires[0],
                           keytrack::update_h(keys.key_for(op.wires[0])));
              break;
            case GateKind::P:
              keys.set_key(op.wires[0],
                           keytrack::update_p(keys.key_for(op.wires[0])));
              break;
            case GateKind::CNOT: {
              auto [ck, tk] = keytrack::update_cnot(
                  keys.key_for(op.wires[0]), keys.key_for(op.wires[1]));
              keys.set_key(op.wires[0], ck);
              keys.set_key(op.wires[1], tk);
              break;
            }
            case GateKind::AUX:
              keys.set_key(op.wires[0], keytrack::update_aux());
              break;
            case GateKind::MEASURE:
              keys.measure(op.wires[0], 0);
              break;
            case GateKind::R: {
              const int y = rng.bit();
              const int d = rng.bit();
              const int c = rng.bit();
              const auto key = keys.key_for(op.wires[0]);
              aux_states.push_back(engine::aux_qubit_state(y, d));
              x_bits.push_back(model == ClientModel::leaky_x ? key.a
                                                             : key.a ^ y);
              keys.set_key(op.wires[0], keytrack::update_r(key, {y, d}, c));
              break;
            }
            default:
              break;
          }
        }
        for (const auto& aux : aux_states) view = view.tensor(aux);
        for (int x : x_bits) {
          view = view.tensor(qcore::StateVector::basis(1, x));
        }
        rho.noalias() += (view.amplitudes() * view.amplitudes().adjoint()) /
                         static_cast<double>(mc_samples);
      }
      report.add("sampled distance to maximally mixed (input " +
                     std::to_string(idx) + ", n=" + std::to_string(mc_samples) +
                     ")",
                 qcore::trace_distance(
                     qcore::DensityMatrix(n + 2 * r, std::move(rho)), mixed),
                 0.05);
    }
  }
  return report;
}

// --- suites -------------------------------------------------------------------

/// Fixed enumeration of 1-2 qubit circuits with at most two R gates used by
/// the protocol-equivalence and simulation-security checks.
inline std::vector<Circuit> equivalence_circuit_suite() {
  std::vector<Circuit> out;
  const char* singles[] = {"X", "Z", "H", "P", "R"};
  for (const char* g : singles) {
    out.push_back(circuits::parse_circuit_or_throw(std::string("qubits 1\n") +
                                                   g + " 0\n"));
  }
  for (const char* g1 : singles) {
    for (const char* g2 : singles) {
      out.push_back(circuits::parse_circuit_or_throw(
          std::string("qubits 1\n") + g1 + " 0\n" + g2 + " 0\n"));
    }
  }
  const char* firsts[] = {"H 0", "R 0", "P 1", "X 1"};
  const char* mids[] = {"CNOT 0 1", "CNOT 1 0"};
  const char* lasts[] = {"R 1", "H 1", "Z 0"};
  for (const char* f : firsts) {
    for (const char* m : mids) {
      for (const char* l : lasts) {
        out.push_back(circuits::parse_circuit_or_throw(
            std::string("qubits 2\n") + f + "\n" + m + "\n" + l + "\n"));
      }
    }
  }
  out.push_back(circuits::parse_circuit_or_throw("qubits 1\nR 0\nMEASURE 0\n"));
  out.push_back(
      circuits::parse_circuit_or_throw("qubits 1\nAUX\nCNOT 0 1\nR 1\n"));
  out.push_back(circuits::parse_circuit_or_throw("qubits 2\nR 0\nR 0\n"));
  out.push_back(circuits::parse_circuit_or_throw(
      "qubits 2\nH 0\nCNOT 0 1\nMEASURE 1\nR 0\n"));
  return out;
}

struct EquivalenceResult {
  double p1_vs_intermediate = 0.0;
  double p1_vs_p2 = 0.0;
  double p2_vs_p3 = 0.0;
  bool pass = false;
};

/// Honest-server channel equality across the client variants, following the
/// reduction chain: direct gadget, intermediate, entanglement-based,
/// delayed-measurement.
inline EquivalenceResult protocol_equivalence(const Circuit& circuit,
                                              double tol = 1e-10) {
  HonestStrategy honest;
  const auto c1 = induced_channel(circuit, honest, ClientVariant::protocol1);
  const auto ci = induced_channel(circuit, honest, ClientVariant::intermediate);
  const auto c2 = induced_channel(circuit, honest, ClientVariant::protocol2);
  const auto c3 = induced_channel(circuit, honest, ClientVariant::protocol3);
  EquivalenceResult r;
  r.p1_vs_intermediate = channel_distance(c1, ci);
  r.p1_vs_p2 = channel_distance(c1, c2);
  r.p2_vs_p3 = channel_distance(c2, c3);
  r.pass = r.p1_vs_intermediate <= tol && r.p1_vs_p2 <= tol && r.p2_vs_p3 <= tol;
  return r;
}

struct SimulationCheck {
  std::string strategy;
  double choi_distance = 0.0;
  bool pass = false;
  // Wall time of the two channel constructions; reported side by side (the
  // simulator runs with essentially the resources of the real interaction)
  // but no bound is asserted.
  double real_seconds = 0.0;
  double simulated_seconds = 0.0;
};

/// The zero-leakage claim, one scripted adversary at a time: the channel
/// induced by interacting with the real client equals the channel induced by
/// the input-independent simulator.
inline std::vector<SimulationCheck> simulation_security(
    const Circuit& circuit, double tol = 1e-10,
    ClientModel model = ClientModel::honest) {
  std::vector<SimulationCheck> out;
  for (const auto& strategy : standard_strategies()) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto real =
        induced_channel(circuit, *strategy, ClientVariant::protocol1, model);
    const auto t1 = std::chrono::steady_clock::now();
    const auto simulated =
        induced_channel(circuit, *strategy, ClientVariant::simulator);
    const auto t2 = std::chrono::steady_clock::now();
    const double dist = channel_distance(real, simulated);
    out.push_back({strategy->name(), dist, dist <= tol,
                   std::chrono::duration<double>(t1 - t0).count(),
                   std::chrono::duration<double>(t2 - t1).count()});
  }
  return out;
}

}  // namespace qced::security
