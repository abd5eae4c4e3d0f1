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

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Dense complex linear algebra for small quantum systems: state vectors,
// density matrices, gate embedding, measurement, the quantum one-time pad,
// partial traces and distance measures.
//
// Wire-order convention (fixed project-wide, asserted in the tests):
// wire 0 is the MOST significant bit of a computational-basis index, so an
// n-wire basis state |b0 b1 ... b_{n-1}> has index b0*2^{n-1} + ... + b_{n-1},
// and the tensor order is wire 0 (x) wire 1 (x) ... (x) wire n-1.
namespace qced::qcore {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

/// Tolerance for algebraic identities (unitarity, exact circuit identities).
inline constexpr double kAlgebraTol = 1e-12;
/// Tolerance for aggregate quantities (eigenvalues, key-averaged mixtures).
inline constexpr double kAggregateTol = 1e-10;
/// Dense simulation stays tractable up to this register width.
inline constexpr int kMaxWires = 14;

/// One-time-pad key for a single wire: the ciphertext is X^a Z^b |psi>.
struct PauliKey {
  int a = 0;
  int b = 0;
  friend bool operator==(const PauliKey&, const PauliKey&) = default;
};

/// Deterministic random source. Draws raw engine words so that bits and
/// uniform doubles are reproducible across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_word() { return gen_(); }
  int bit() { return static_cast<int>(gen_() & 1u); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (distribution-class-free for portability).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    do {
      u = uniform01();
    } while (u <= 0.0);
    const double v = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 2.0 * std::numbers::pi * v;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline std::int64_t dim_for(int num_wires) {
  return std::int64_t{1} << num_wires;
}

/// Bit shift of `wire` inside a basis index (wire 0 = MSB).
inline int wire_shift(int num_wires, int wire) { return num_wires - 1 - wire; }

inline int index_bit(std::int64_t index, int num_wires, int wire) {
  return static_cast<int>((index >> wire_shift(num_wires, wire)) & 1);
}

inline void check_wire_count(int num_wires) {
  if (num_wires < 0 || num_wires > kMaxWires) {
    throw std::invalid_argument("wire count out of range [0, " +
                                std::to_string(kMaxWires) +
                                "]: " + std::to_string(num_wires));
  }
}

/// Pure state of `num_wires` qubits: 2^n complex amplitudes with unit norm.
class StateVector {
 public:
  /// |00...0>
  explicit StateVector(int num_wires) : num_wires_(num_wires) {
    check_wire_count(num_wires);
    amps_ = Vector::Zero(dim_for(num_wires));
    amps_(0) = Complex{1.0, 0.0};
  }

  StateVector(int num_wires, Vector amplitudes) : num_wires_(num_wires) {
    check_wire_count(num_wires);
    if (amplitudes.size() != dim_for(num_wires)) {
      throw std::invalid_argument("amplitude vector has wrong length");
    }
    const double n2 = amplitudes.squaredNorm();
    if (std::abs(n2 - 1.0) > 1e-9) {
      throw std::invalid_argument("state vector is not normalized: |psi|^2 = " +
                                  std::to_string(n2));
    }
    amps_ = std::move(amplitudes);
  }

  static StateVector basis(int num_wires, std::int64_t index) {
    StateVector s(num_wires);
    if (index < 0 || index >= s.dim()) {
      throw std::out_of_range("basis index out of range");
    }
    s.amps_(0) = Complex{0.0, 0.0};
    s.amps_(index) = Complex{1.0, 0.0};
    return s;
  }

  int num_wires() const { return num_wires_; }
  std::int64_t dim() const { return amps_.size(); }
  const Vector& amplitudes() const { return amps_; }
  Complex amplitude(std::int64_t index) const { return amps_(index); }

  Complex inner_product(const StateVector& other) const {
    if (other.num_wires_ != num_wires_) {
      throw std::invalid_argument("state dimension mismatch");
    }
    return amps_.dot(other.amps_);  // Eigen's dot conjugates the left side
  }

  StateVector tensor(const StateVector& other) const {
    const int n = num_wires_ + other.num_wires_;
    check_wire_count(n);
    Vector out(dim() * other.dim());
    for (std::int64_t i = 0; i < dim(); ++i) {
      out.segment(i * other.dim(), other.dim()) = amps_(i) * other.amps_;
    }
    StateVector s(n);
    s.amps_ = std::move(out);
    return s;
  }

  /// Unchecked access for simulation internals that preserve the norm.
  Vector& raw() { return amps_; }

 private:
  int num_wires_;
  Vector amps_;
};

/// Mixed state: Hermitian, unit-trace, positive semidefinite matrix.
class DensityMatrix {
 public:
  DensityMatrix(int num_wires, Matrix m) : num_wires_(num_wires) {
    check_wire_count(num_wires);
    const auto d = dim_for(num_wires);
    if (m.rows() != d || m.cols() != d) {
      throw std::invalid_argument("density matrix has wrong dimensions");
    }
    mat_ = std::move(m);
  }

  static DensityMatrix from_state(const StateVector& psi) {
    return DensityMatrix(psi.num_wires(),
                         psi.amplitudes() * psi.amplitudes().adjoint());
  }

  static DensityMatrix maximally_mixed(int num_wires) {
    const auto d = dim_for(num_wires);
    return DensityMatrix(num_wires,
                         Matrix::Identity(d, d) / static_cast<double>(d));
  }

  int num_wires() const { return num_wires_; }
  std::int64_t dim() const { return mat_.rows(); }
  const Matrix& matrix() const { return mat_; }

  /// Hermitian within 1e-12, trace 1 within 1e-12, eigenvalues >= -1e-10.
  bool is_valid(std::string* why = nullptr) const {
    const double herm = (mat_ - mat_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > kAlgebraTol) {
      if (why) *why = "not Hermitian (deviation " + std::to_string(herm) + ")";
      return false;
    }
    const double tr_err = std::abs(mat_.trace() - Complex{1.0, 0.0});
    if (tr_err > kAlgebraTol) {
      if (why) *why = "trace != 1 (deviation " + std::to_string(tr_err) + ")";
      return false;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(mat_, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -kAggregateTol) {
      if (why) *why = "negative eigenvalue " + std::to_string(min_eig);
      return false;
    }
    return true;
  }

 private:
  int num_wires_;
  Matrix mat_;
};

/// A 1- or 2-qubit unitary.
struct GateMatrix {
  int arity = 1;
  Matrix matrix;

  bool is_unitary(double tol = kAlgebraTol) const {
    const auto d = matrix.rows();
    return (matrix.adjoint() * matrix - Matrix::Identity(d, d))
               .cwiseAbs()
               .maxCoeff() <= tol;
  }
};

/// Named gates of the protocol gate set. P = diag(1, i), R = diag(1, e^{i pi/4}),
/// CNOT: |j>|k> -> |j>|j xor k> with the first wire as control.
inline GateMatrix standard_gate(std::string_view name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  const Complex i{0.0, 1.0};
  if (up == "I") {
    return {1, Matrix::Identity(2, 2)};
  }
  if (up == "X") {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return {1, m};
  }
  if (up == "Z") {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return {1, m};
  }
  if (up == "H") {
    Matrix m(2, 2);
    const double s = 1.0 / std::numbers::sqrt2;
    m << s, s, s, -s;
    return {1, m};
  }
  if (up == "P") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1;
    m(1, 1) = i;
    return {1, m};
  }
  if (up == "R") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1;
    m(1, 1) = std::polar(1.0, std::numbers::pi / 4.0);
    return {1, m};
  }
  if (up == "CNOT") {
    Matrix m = Matrix::Zero(4, 4);
    m(0, 0) = 1;
    m(1, 1) = 1;
    m(2, 3) = 1;
    m(3, 2) = 1;
    return {2, m};
  }
  throw std::invalid_argument("unknown gate name: " + std::string(name));
}

/// Applies `u` (side 2^k) to `wires` of an n-wire amplitude vector in place.
/// wires[0] is the most significant bit of the gate's own index space.
inline void apply_unitary_in_place(Vector& amps, int num_wires,
                                   const Matrix& u,
                                   std::span<const int> wires) {
  const int k = static_cast<int>(wires.size());
  if (k < 1 || k > 2 || u.rows() != dim_for(k) || u.cols() != dim_for(k)) {
    throw std::invalid_argument("gate arity / wire count mismatch");
  }
  std::array<int, 2> shift{};
  std::int64_t mask = 0;
  for (int j = 0; j < k; ++j) {
    if (wires[j] < 0 || wires[j] >= num_wires) {
      throw std::out_of_range("gate wire out of range");
    }
    shift[j] = wire_shift(num_wires, wires[j]);
    mask |= std::int64_t{1} << shift[j];
  }
  if (k == 2 && wires[0] == wires[1]) {
    throw std::invalid_argument("gate wires must be distinct");
  }

  const int sub = 1 << k;
  std::array<std::int64_t, 4> idx{};
  std::array<Complex, 4> in{};
  const std::int64_t n = amps.size();
  for (std::int64_t base = 0; base < n; ++base) {
    if (base & mask) continue;
    for (int g = 0; g < sub; ++g) {
      std::int64_t ix = base;
      for (int j = 0; j < k; ++j) {
        if ((g >> (k - 1 - j)) & 1) ix |= std::int64_t{1} << shift[j];
      }
      idx[g] = ix;
      in[g] = amps(ix);
    }
    for (int r = 0; r < sub; ++r) {
      Complex acc{0.0, 0.0};
      for (int c = 0; c < sub; ++c) acc += u(r, c) * in[c];
      amps(idx[r]) = acc;
    }
  }
}

/// Applies `gate` to the given wires; the norm is preserved by unitarity.
inline StateVector apply_gate(const StateVector& state, const GateMatrix& gate,
                              std::span<const int> wires) {
  if (static_cast<int>(wires.size()) != gate.arity) {
    throw std::invalid_argument("gate arity / wire count mismatch");
  }
  Vector amps = state.amplitudes();
  apply_unitary_in_place(amps, state.num_wires(), gate.matrix, wires);
  StateVector out(state.num_wires());
  out.raw() = std::move(amps);
  return out;
}

inline StateVector apply_gate(const StateVector& state, const GateMatrix& gate,
                              std::initializer_list<int> wires) {
  return apply_gate(state, gate, std::span<const int>(wires.begin(), wires.size()));
}

/// One outcome of a computational-basis measurement on a single wire.
struct MeasurementBranch {
  int outcome = 0;
  double probability = 0.0;
  StateVector post_state;
};

namespace detail {
inline double outcome_probability(const Vector& amps, int num_wires, int wire,
                                  int outcome) {
  double p = 0.0;
  for (std::int64_t i = 0; i < amps.size(); ++i) {
    if (index_bit(i, num_wires, wire) == outcome) p += std::norm(amps(i));
  }
  return p;
}

inline Vector project(const Vector& amps, int num_wires, int wire, int outcome,
                      double prob) {
  Vector out = Vector::Zero(amps.size());
  const double scale = 1.0 / std::sqrt(prob);
  for (std::int64_t i = 0; i < amps.size(); ++i) {
    if (index_bit(i, num_wires, wire) == outcome) out(i) = amps(i) * scale;
  }
  return out;
}
}  // namespace detail

/// Both measurement outcomes with probabilities and renormalized post-states.
/// Outcomes with zero probability (below 1e-15) are omitted.
inline std::vector<MeasurementBranch> measure_branches(const StateVector& state,
                                                       int wire) {
  if (wire < 0 || wire >= state.num_wires()) {
    throw std::out_of_range("measured wire out of range");
  }
  std::vector<MeasurementBranch> out;
  for (int outcome = 0; outcome < 2; ++outcome) {
    const double p = detail::outcome_probability(state.amplitudes(),
                                                 state.num_wires(), wire, outcome);
    if (p <= 1e-15) continue;
    StateVector post(state.num_wires());
    post.raw() =
        detail::project(state.amplitudes(), state.num_wires(), wire, outcome, p);
    out.push_back({outcome, p, std::move(post)});
  }
  return out;
}

/// Draws one outcome from the seeded generator; deterministic per (state, rng).
inline MeasurementBranch measure_sample(const StateVector& state, int wire,
                                        Rng& rng) {
  auto branches = measure_branches(state, wire);
  if (branches.size() == 1) {
    rng.uniform01();  // keep the draw count independent of the state
    return branches.front();
  }
  const double u = rng.uniform01();
  return u < branches[0].probability ? branches[0] : branches[1];
}

/// Encrypts with the quantum one-time pad: X^{a_i} Z^{b_i} on each wire i.
inline StateVector qotp_encrypt(const StateVector& state,
                                std::span<const PauliKey> keys) {
  if (static_cast<int>(keys.size()) != state.num_wires()) {
    throw std::invalid_argument("key / wire count mismatch");
  }
  Vector amps = state.amplitudes();
  static const GateMatrix x = standard_gate("X");
  static const GateMatrix z = standard_gate("Z");
  for (int w = 0; w < state.num_wires(); ++w) {
    const int wire[1] = {w};
    if (keys[w].b) apply_unitary_in_place(amps, state.num_wires(), z.matrix, wire);
    if (keys[w].a) apply_unitary_in_place(amps, state.num_wires(), x.matrix, wire);
  }
  StateVector out(state.num_wires());
  out.raw() = std::move(amps);
  return out;
}

/// Inverse pad: Z^{b_i} X^{a_i} on each wire i.
inline StateVector qotp_decrypt(const StateVector& state,
                                std::span<const PauliKey> keys) {
  if (static_cast<int>(keys.size()) != state.num_wires()) {
    throw std::invalid_argument("key / wire count mismatch");
  }
  Vector amps = state.amplitudes();
  static const GateMatrix x = standard_gate("X");
  static const GateMatrix z = standard_gate("Z");
  for (int w = 0; w < state.num_wires(); ++w) {
    const int wire[1] = {w};
    if (keys[w].a) apply_unitary_in_place(amps, state.num_wires(), x.matrix, wire);
    if (keys[w].b) apply_unitary_in_place(amps, state.num_wires(), z.matrix, wire);
  }
  StateVector out(state.num_wires());
  out.raw() = std::move(amps);
  return out;
}

/// Uniform mixture over all 4^{|wires|} pad choices on the given wires.
inline DensityMatrix average_over_keys(const StateVector& state,
                                       std::span<const int> wires) {
  if (wires.empty()) {
    throw std::invalid_argument("key-average over an empty wire set");
  }
  const int k = static_cast<int>(wires.size());
  const auto d = state.dim();
  Matrix rho = Matrix::Zero(d, d);
  const std::int64_t combos = std::int64_t{1} << (2 * k);
  const double weight = 1.0 / static_cast<double>(combos);
  std::vector<PauliKey> keys(state.num_wires());
  for (std::int64_t c = 0; c < combos; ++c) {
    for (auto& key : keys) key = PauliKey{};
    for (int j = 0; j < k; ++j) {
      keys[wires[j]].a = static_cast<int>((c >> (2 * j)) & 1);
      keys[wires[j]].b = static_cast<int>((c >> (2 * j + 1)) & 1);
    }
    const StateVector padded = qotp_encrypt(state, keys);
    rho.noalias() += weight * (padded.amplitudes() * padded.amplitudes().adjoint());
  }
  return DensityMatrix(state.num_wires(), std::move(rho));
}

/// Mixed-state variant: twirls an existing density matrix over the pad.
inline DensityMatrix average_over_keys(const DensityMatrix& rho,
                                       std::span<const int> wires) {
  if (wires.empty()) {
    throw std::invalid_argument("key-average over an empty wire set");
  }
  const int k = static_cast<int>(wires.size());
  const int n = rho.num_wires();
  Matrix out = Matrix::Zero(rho.dim(), rho.dim());
  const std::int64_t combos = std::int64_t{1} << (2 * k);
  const double weight = 1.0 / static_cast<double>(combos);
  static const GateMatrix x = standard_gate("X");
  static const GateMatrix z = standard_gate("Z");
  for (std::int64_t c = 0; c < combos; ++c) {
    Matrix pad = Matrix::Identity(rho.dim(), rho.dim());
    for (int j = 0; j < k; ++j) {
      // Build the padded columns by acting on each basis vector.
      const int a = static_cast<int>((c >> (2 * j)) & 1);
      const int b = static_cast<int>((c >> (2 * j + 1)) & 1);
      const int wire[1] = {wires[j]};
      for (std::int64_t col = 0; col < pad.cols(); ++col) {
        Vector v = pad.col(col);
        if (b) apply_unitary_in_place(v, n, z.matrix, wire);
        if (a) apply_unitary_in_place(v, n, x.matrix, wire);
        pad.col(col) = v;
      }
    }
    out.noalias() += weight * (pad * rho.matrix() * pad.adjoint());
  }
  return DensityMatrix(n, std::move(out));
}

/// Reduced density matrix on `keep` (ascending wire order preserved).
inline DensityMatrix partial_trace(const DensityMatrix& rho,
                                   std::span<const int> keep) {
  if (keep.empty()) {
    throw std::invalid_argument("partial trace must keep at least one wire");
  }
  const int n = rho.num_wires();
  std::vector<int> keep_sorted(keep.begin(), keep.end());
  std::sort(keep_sorted.begin(), keep_sorted.end());
  if (std::adjacent_find(keep_sorted.begin(), keep_sorted.end()) !=
          keep_sorted.end() ||
      keep_sorted.front() < 0 || keep_sorted.back() >= n) {
    throw std::invalid_argument("invalid kept-wire subset");
  }
  std::vector<int> traced;
  for (int w = 0; w < n; ++w) {
    if (!std::binary_search(keep_sorted.begin(), keep_sorted.end(), w)) {
      traced.push_back(w);
    }
  }
  const int nk = static_cast<int>(keep_sorted.size());
  const int nt = static_cast<int>(traced.size());
  const std::int64_t dk = dim_for(nk);
  const std::int64_t dt = dim_for(nt);
  auto compose = [&](std::int64_t kept_idx, std::int64_t traced_idx) {
    std::int64_t full = 0;
    for (int j = 0; j < nk; ++j) {
      if ((kept_idx >> (nk - 1 - j)) & 1) {
        full |= std::int64_t{1} << wire_shift(n, keep_sorted[j]);
      }
    }
    for (int j = 0; j < nt; ++j) {
      if ((traced_idx >> (nt - 1 - j)) & 1) {
        full |= std::int64_t{1} << wire_shift(n, traced[j]);
      }
    }
    return full;
  };
  Matrix out = Matrix::Zero(dk, dk);
  for (std::int64_t r = 0; r < dk; ++r) {
    for (std::int64_t c = 0; c < dk; ++c) {
      Complex acc{0.0, 0.0};
      for (std::int64_t t = 0; t < dt; ++t) {
        acc += rho.matrix()(compose(r, t), compose(c, t));
      }
      out(r, c) = acc;
    }
  }
  return DensityMatrix(nk, std::move(out));
}

/// (1/2) Tr|A - B| for Hermitian A, B via eigenvalues of the difference.
inline double trace_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("trace distance: dimension mismatch");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a - b, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline double trace_distance(const DensityMatrix& rho,
                             const DensityMatrix& sigma) {
  return trace_distance(rho.matrix(), sigma.matrix());
}

/// |<psi|phi>|^2 — insensitive to global phase by construction.
inline double fidelity_up_to_global_phase(const StateVector& psi,
                                          const StateVector& phi) {
  return std::norm(psi.inner_product(phi));
}

/// max |A - e^{i theta} B| with theta chosen to align the largest entry of B.
inline double matrix_distance_up_to_phase(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("matrix dimension mismatch");
  }
  Eigen::Index r = 0, c = 0;
  b.cwiseAbs().maxCoeff(&r, &c);
  if (std::abs(b(r, c)) < 1e-15) return (a - b).cwiseAbs().maxCoeff();
  const Complex ratio = a(r, c) / b(r, c);
  if (std::abs(ratio) < 1e-15) return (a - b).cwiseAbs().maxCoeff();
  return (a - (ratio / std::abs(ratio)) * b).cwiseAbs().maxCoeff();
}

/// <psi| rho |psi>.
inline double fidelity_to_pure(const DensityMatrix& rho,
                               const StateVector& psi) {
  if (rho.dim() != psi.dim()) {
    throw std::invalid_argument("fidelity: dimension mismatch");
  }
  const Complex v = (psi.amplitudes().adjoint() * rho.matrix() *
                     psi.amplitudes())(0, 0);
  return v.real();
}

/// (|00> + |11>)/sqrt(2)
inline StateVector epr_pair() {
  Vector v = Vector::Zero(4);
  v(0) = 1.0 / std::numbers::sqrt2;
  v(3) = 1.0 / std::numbers::sqrt2;
  StateVector s(2);
  s.raw() = std::move(v);
  return s;
}

/// Haar-ish random pure state from the seeded generator.
inline StateVector random_state(int num_wires, Rng& rng) {
  check_wire_count(num_wires);
  Vector v(dim_for(num_wires));
  for (std::int64_t i = 0; i < v.size(); ++i) {
    v(i) = Complex{rng.gaussian(), rng.gaussian()};
  }
  v /= v.norm();
  StateVector s(num_wires);
  s.raw() = std::move(v);
  return s;
}

/// Random single-qubit product state on each wire.
inline StateVector random_product_state(int num_wires, Rng& rng) {
  StateVector s(0);
  for (int w = 0; w < num_wires; ++w) s = s.tensor(random_state(1, rng));
  return s;
}

/// Removes a wire that has collapsed to `outcome` (its other amplitudes must
/// carry no weight); returns the state on the remaining wires.
inline StateVector remove_collapsed_wire(const StateVector& state, int wire,
                                         int outcome) {
  const int n = state.num_wires();
  if (wire < 0 || wire >= n) throw std::out_of_range("wire out of range");
  const int sh = wire_shift(n, wire);
  Vector out(dim_for(n - 1));
  double dropped = 0.0;
  for (std::int64_t i = 0; i < state.dim(); ++i) {
    const int bit = static_cast<int>((i >> sh) & 1);
    if (bit != outcome) {
      dropped += std::norm(state.amplitude(i));
      continue;
    }
    const std::int64_t low = i & ((std::int64_t{1} << sh) - 1);
    const std::int64_t high = i >> (sh + 1);
    out((high << sh) | low) = state.amplitude(i);
  }
  if (dropped > 1e-9) {
    throw std::invalid_argument("wire is not collapsed to the stated outcome");
  }
  out /= out.norm();
  StateVector s(n - 1);
  s.raw() = std::move(out);
  return s;
}

/// Moves the wire at position `from` to position `to`, shifting the others.
inline StateVector move_wire(const StateVector& state, int from, int to) {
  const int n = state.num_wires();
  if (from < 0 || from >= n || to < 0 || to >= n) {
    throw std::out_of_range("wire out of range");
  }
  if (from == to) return state;
  std::vector<int> order;  // order[j] = old position of new wire j
  for (int w = 0; w < n; ++w) {
    if (w != from) order.push_back(w);
  }
  order.insert(order.begin() + to, from);
  Vector out(state.dim());
  for (std::int64_t i = 0; i < state.dim(); ++i) {
    std::int64_t j = 0;
    for (int w = 0; w < n; ++w) {
      if (index_bit(i, n, order[w])) j |= std::int64_t{1} << wire_shift(n, w);
    }
    out(j) = state.amplitude(i);
  }
  StateVector s(n);
  s.raw() = std::move(out);
  return s;
}

}  // namespace qced::qcore
