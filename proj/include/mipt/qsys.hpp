// Copyright 2026 The mipt Authors
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

// Multi-qubit operator algebra for the central spin model.
//
// Ordering convention: qubit 0 is the central spin and the leftmost
// (most significant) tensor factor. Qubit q of an n-qubit register lives in
// bit (n - 1 - q) of the basis index. Single-qubit basis: sigma_plus|0> = |1>.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mipt/errors.hpp"

namespace mipt {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Matrix2 = Eigen::Matrix2cd;

inline constexpr double kDefaultStateTolerance = 1e-8;

namespace pauli {

inline Matrix2 identity() { return Matrix2::Identity(); }

inline Matrix2 x() {
  Matrix2 m;
  m << 0, 1, 1, 0;
  return m;
}

inline Matrix2 y() {
  Matrix2 m;
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}

inline Matrix2 z() {
  Matrix2 m;
  m << 1, 0, 0, -1;
  return m;
}

/// Raising operator, sigma_plus|0> = |1>.
inline Matrix2 plus() {
  Matrix2 m;
  m << 0, 0, 1, 0;
  return m;
}

inline Matrix2 minus() { return plus().adjoint(); }

/// |outcome><outcome|
inline Matrix2 projector(int outcome) {
  Matrix2 m = Matrix2::Zero();
  m(outcome, outcome) = 1;
  return m;
}

}  // namespace pauli

/// Square complex matrix on an n-qubit Hilbert space (n >= 1).
class DenseOperator {
 public:
  explicit DenseOperator(Matrix m) : m_(std::move(m)) {
    detail::require(m_.rows() == m_.cols(), "DenseOperator: matrix is not square");
    const auto d = static_cast<std::uint64_t>(m_.rows());
    detail::require(d >= 2 && std::has_single_bit(d),
                    "DenseOperator: dimension " + std::to_string(d) + " is not 2^n with n >= 1");
    detail::require(m_.allFinite(), "DenseOperator: non-finite entries");
    qubits_ = std::countr_zero(d);
  }

  static DenseOperator identity(int qubits) {
    detail::require(qubits >= 1, "DenseOperator::identity: qubits must be >= 1");
    return DenseOperator(Matrix::Identity(Eigen::Index{1} << qubits, Eigen::Index{1} << qubits));
  }

  static DenseOperator zero(int qubits) {
    detail::require(qubits >= 1, "DenseOperator::zero: qubits must be >= 1");
    return DenseOperator(Matrix::Zero(Eigen::Index{1} << qubits, Eigen::Index{1} << qubits));
  }

  [[nodiscard]] int qubits() const { return qubits_; }
  [[nodiscard]] Eigen::Index dim() const { return m_.rows(); }
  [[nodiscard]] const Matrix& matrix() const { return m_; }

  [[nodiscard]] DenseOperator adjoint() const { return DenseOperator(m_.adjoint()); }

  friend DenseOperator operator*(const DenseOperator& a, const DenseOperator& b) {
    detail::require(a.dim() == b.dim(), "DenseOperator: dimension mismatch in product");
    return DenseOperator(a.m_ * b.m_);
  }
  friend DenseOperator operator+(const DenseOperator& a, const DenseOperator& b) {
    detail::require(a.dim() == b.dim(), "DenseOperator: dimension mismatch in sum");
    return DenseOperator(a.m_ + b.m_);
  }
  friend DenseOperator operator-(const DenseOperator& a, const DenseOperator& b) {
    detail::require(a.dim() == b.dim(), "DenseOperator: dimension mismatch in difference");
    return DenseOperator(a.m_ - b.m_);
  }
  friend DenseOperator operator*(Complex s, const DenseOperator& a) { return DenseOperator(s * a.m_); }

 private:
  Matrix m_;
  int qubits_ = 0;
};

/// A (x) B with A the leftmost factor.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline DenseOperator kron(const DenseOperator& a, const DenseOperator& b) {
  return DenseOperator(kron(a.matrix(), b.matrix()));
}

// --- state diagnostics on raw matrices ---------------------------------------

inline double hermiticity_error(const Matrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of the Hermitian part of m.
inline double min_eigenvalue(const Matrix& m) {
  const Matrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Hermitian, unit-trace, positive semidefinite operator.
class DensityMatrix {
 public:
  explicit DensityMatrix(DenseOperator op, double tolerance = kDefaultStateTolerance)
      : op_(std::move(op)), tolerance_(tolerance) {
    detail::require(tolerance_ >= 0, "DensityMatrix: negative tolerance");
    const Matrix& m = op_.matrix();
    detail::require(hermiticity_error(m) <= tolerance_, "DensityMatrix: not Hermitian");
    detail::require(std::abs(m.trace() - Complex(1)) <= tolerance_, "DensityMatrix: trace is not 1");
    detail::require(min_eigenvalue(m) >= -tolerance_, "DensityMatrix: not positive semidefinite");
  }

  explicit DensityMatrix(Matrix m, double tolerance = kDefaultStateTolerance)
      : DensityMatrix(DenseOperator(std::move(m)), tolerance) {}

  /// Wraps an operator whose invariants hold by construction; skips the O(d^3) checks.
  static DensityMatrix trusted(DenseOperator op, double tolerance = kDefaultStateTolerance) {
    return DensityMatrix(std::move(op), tolerance, Trusted{});
  }
  static DensityMatrix trusted(Matrix m, double tolerance = kDefaultStateTolerance) {
    return trusted(DenseOperator(std::move(m)), tolerance);
  }

  /// |psi><psi| for a normalized state vector.
  static DensityMatrix pure(const Eigen::VectorXcd& psi) {
    detail::require(std::abs(psi.norm() - 1.0) <= 1e-10, "DensityMatrix::pure: vector not normalized");
    return trusted(Matrix(psi * psi.adjoint()));
  }

  static DensityMatrix maximally_mixed(int qubits) {
    const auto d = Eigen::Index{1} << qubits;
    return trusted(Matrix(Matrix::Identity(d, d) / static_cast<double>(d)));
  }

  [[nodiscard]] const DenseOperator& op() const { return op_; }
  [[nodiscard]] const Matrix& matrix() const { return op_.matrix(); }
  [[nodiscard]] int qubits() const { return op_.qubits(); }
  [[nodiscard]] Eigen::Index dim() const { return op_.dim(); }
  [[nodiscard]] double tolerance() const { return tolerance_; }

 private:
  struct Trusted {};
  DensityMatrix(DenseOperator op, double tolerance, Trusted) : op_(std::move(op)), tolerance_(tolerance) {}

  DenseOperator op_;
  double tolerance_;
};

inline DensityMatrix kron(const DensityMatrix& a, const DensityMatrix& b) {
  return DensityMatrix::trusted(kron(a.matrix(), b.matrix()), std::max(a.tolerance(), b.tolerance()));
}

// --- model parameters --------------------------------------------------------

struct SystemSpec {
  int bath_size = 1;
  double coupling = 1.0;
  double eps_central = 0.0;
  double eps_bath = 0.0;
  bool rotating_frame = true;
  // nullopt measures every qubit.
  std::optional<std::vector<int>> measured;

  [[nodiscard]] int qubits() const { return bath_size + 1; }

  [[nodiscard]] std::vector<int> measured_qubits() const {
    if (!measured) {
      std::vector<int> all(static_cast<std::size_t>(qubits()));
      for (int q = 0; q < qubits(); ++q) all[static_cast<std::size_t>(q)] = q;
      return all;
    }
    std::vector<int> m = *measured;
    std::sort(m.begin(), m.end());
    m.erase(std::unique(m.begin(), m.end()), m.end());
    return m;
  }

  void validate() const {
    detail::require(bath_size >= 1, "SystemSpec: bath size L must be >= 1");
    detail::require(std::isfinite(coupling) && std::isfinite(eps_central) && std::isfinite(eps_bath),
                    "SystemSpec: non-finite parameter");
    if (measured) {
      detail::require(!measured->empty(), "SystemSpec: measured set is empty");
      for (int q : *measured)
        detail::require(q >= 0 && q < qubits(), "SystemSpec: measured qubit " + std::to_string(q) + " out of range");
    }
  }
};

struct NoiseSpec {
  enum class Axis { x, y };

  double gamma_d = 0.0;
  double gamma_em = 0.0;
  double gamma_abs = 0.0;
  double gamma_er = 0.0;
  Axis gate_error_axis = Axis::x;

  [[nodiscard]] bool is_zero() const {
    return gamma_d == 0.0 && gamma_em == 0.0 && gamma_abs == 0.0 && gamma_er == 0.0;
  }

  void validate() const {
    for (double r : {gamma_d, gamma_em, gamma_abs, gamma_er})
      detail::require(std::isfinite(r) && r >= 0.0, "NoiseSpec: rates must be finite and >= 0");
  }
};

enum class JumpKind { projective, noise };

/// Prefactor of the projective jump operators. `completeness` uses 1/sqrt(m)
/// so that sum_a L_a^dag L_a = I; `paper` uses 1/sqrt(2^(L+1)).
enum class JumpNormalization { completeness, paper };

struct JumpOperatorSet {
  std::vector<DenseOperator> ops;
  double normalization = 1.0;
  JumpKind kind = JumpKind::projective;

  [[nodiscard]] bool empty() const { return ops.empty(); }
  [[nodiscard]] std::size_t size() const { return ops.size(); }

  /// sum_a L_a^dag L_a
  [[nodiscard]] Matrix completeness_sum() const {
    detail::require(!ops.empty(), "JumpOperatorSet: empty set has no dimension");
    Matrix s = Matrix::Zero(ops.front().dim(), ops.front().dim());
    for (const auto& op : ops) s += op.matrix().adjoint() * op.matrix();
    return s;
  }
};

// --- constructors ------------------------------------------------------------

/// I (x) ... (x) op2 (x) ... (x) I with op2 on `site`.
inline DenseOperator embed_single_qubit_op(const Matrix2& op2, int site, int n) {
  detail::require(n >= 1, "embed_single_qubit_op: n must be >= 1");
  detail::require(site >= 0 && site < n, "embed_single_qubit_op: site " + std::to_string(site) +
                                             " out of range for " + std::to_string(n) + " qubits");
  const auto left = Eigen::Index{1} << site;
  const auto right = Eigen::Index{1} << (n - 1 - site);
  return DenseOperator(kron(kron(Matrix::Identity(left, left), Matrix(op2)), Matrix::Identity(right, right)));
}

inline DenseOperator build_hamiltonian(const SystemSpec& spec) {
  spec.validate();
  const int n = spec.qubits();
  const DenseOperator sp_c = embed_single_qubit_op(pauli::plus(), 0, n);
  const DenseOperator sm_c = embed_single_qubit_op(pauli::minus(), 0, n);
  Matrix h = Matrix::Zero(sp_c.dim(), sp_c.dim());
  for (int j = 1; j < n; ++j) {
    const DenseOperator sp_j = embed_single_qubit_op(pauli::plus(), j, n);
    const DenseOperator sm_j = embed_single_qubit_op(pauli::minus(), j, n);
    h += spec.coupling * (sp_c.matrix() * sm_j.matrix() + sm_c.matrix() * sp_j.matrix());
  }
  if (!spec.rotating_frame) {
    h += spec.eps_central * embed_single_qubit_op(pauli::z(), 0, n).matrix();
    for (int j = 1; j < n; ++j) h += spec.eps_bath * embed_single_qubit_op(pauli::z(), j, n).matrix();
  }
  return DenseOperator(std::move(h));
}

namespace detail {

/// Sorted, deduplicated, range-checked qubit list.
inline std::vector<int> normalize_qubit_set(std::span<const int> qubits, int n, const char* who) {
  std::vector<int> out(qubits.begin(), qubits.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  require(!out.empty(), std::string(who) + ": empty qubit set");
  for (int q : out) require(q >= 0 && q < n, std::string(who) + ": qubit " + std::to_string(q) + " out of range");
  return out;
}

}  // namespace detail

/// Reduced matrix on `keep` (ascending qubit order) for any square 2^n matrix.
inline Matrix partial_trace(const Matrix& m, std::span<const int> keep) {
  const auto d = static_cast<std::uint64_t>(m.rows());
  detail::require(m.rows() == m.cols() && d >= 2 && std::has_single_bit(d), "partial_trace: not a 2^n matrix");
  const int n = std::countr_zero(d);
  const std::vector<int> kept = detail::normalize_qubit_set(keep, n, "partial_trace");
  std::vector<int> traced;
  for (int q = 0, k = 0; q < n; ++q) {
    if (k < static_cast<int>(kept.size()) && kept[static_cast<std::size_t>(k)] == q)
      ++k;
    else
      traced.push_back(q);
  }

  // Scatter tables: basis index contributions of kept and traced sub-indices.
  auto scatter = [n](const std::vector<int>& qs) {
    const std::size_t count = std::size_t{1} << qs.size();
    std::vector<Eigen::Index> table(count, 0);
    for (std::size_t s = 0; s < count; ++s) {
      Eigen::Index full = 0;
      for (std::size_t b = 0; b < qs.size(); ++b) {
        // sub-index bit (size-1-b) corresponds to qs[b]
        if ((s >> (qs.size() - 1 - b)) & 1U) full |= Eigen::Index{1} << (n - 1 - qs[b]);
      }
      table[s] = full;
    }
    return table;
  };
  const auto keep_idx = scatter(kept);
  const auto trace_idx = scatter(traced);

  const auto dk = static_cast<Eigen::Index>(keep_idx.size());
  Matrix out = Matrix::Zero(dk, dk);
  for (Eigen::Index i = 0; i < dk; ++i)
    for (Eigen::Index j = 0; j < dk; ++j) {
      Complex acc = 0;
      for (Eigen::Index t : trace_idx) acc += m(keep_idx[static_cast<std::size_t>(i)] | t, keep_idx[static_cast<std::size_t>(j)] | t);
      out(i, j) = acc;
    }
  return out;
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep) {
  return DensityMatrix::trusted(partial_trace(rho.matrix(), keep), rho.tolerance());
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<int> keep) {
  return partial_trace(rho, std::span<const int>(keep.begin(), keep.size()));
}

inline JumpOperatorSet build_projective_jumps(const SystemSpec& spec,
                                              JumpNormalization norm = JumpNormalization::completeness) {
  spec.validate();
  const int n = spec.qubits();
  const std::vector<int> measured = spec.measured_qubits();
  const double c = norm == JumpNormalization::completeness
                       ? 1.0 / std::sqrt(static_cast<double>(measured.size()))
                       : 1.0 / std::sqrt(std::ldexp(1.0, n));
  JumpOperatorSet set;
  set.kind = JumpKind::projective;
  set.normalization = c;
  for (int q : measured)
    for (int outcome : {0, 1}) set.ops.push_back(embed_single_qubit_op(c * pauli::projector(outcome), q, n));
  return set;
}

/// One operator per qubit for each nonzero rate, with sqrt(rate) absorbed.
/// Family order: dephasing (sigma_z), emission (sigma_plus), absorption
/// (sigma_minus), gate error (sigma_x or sigma_y).
inline JumpOperatorSet build_noise_jumps(const SystemSpec& spec, const NoiseSpec& noise) {
  spec.validate();
  noise.validate();
  const int n = spec.qubits();
  JumpOperatorSet set;
  set.kind = JumpKind::noise;
  const Matrix2 gate_axis = noise.gate_error_axis == NoiseSpec::Axis::x ? pauli::x() : pauli::y();
  const std::pair<double, Matrix2> families[] = {
      {noise.gamma_d, pauli::z()},
      {noise.gamma_em, pauli::plus()},
      {noise.gamma_abs, pauli::minus()},
      {noise.gamma_er, gate_axis},
  };
  for (const auto& [rate, op] : families) {
    if (rate == 0.0) continue;
    for (int q = 0; q < n; ++q) set.ops.push_back(embed_single_qubit_op(std::sqrt(rate) * op, q, n));
  }
  return set;
}

/// 4x4 SWAP on the two central-spin copies of the doubled space
/// (left copy qubits [0..L], right copy [L+1..2L+1]) left after tracing out
/// both bath copies: X|a>_L|b>_R = |b>_L|a>_R.
inline DenseOperator build_dual_swap([[maybe_unused]] int bath_size) {
  Matrix x = Matrix::Zero(4, 4);
  x(0, 0) = 1;
  x(1, 2) = 1;
  x(2, 1) = 1;
  x(3, 3) = 1;
  return DenseOperator(std::move(x));
}

/// Tr[X (M)] for the SWAP X between the two equal halves of M's register.
inline Complex swap_expectation(const Matrix& m) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(m.rows()))));
  detail::require(d * d == m.rows() && m.rows() == m.cols(), "swap_expectation: register is not two equal halves");
  Complex acc = 0;
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) acc += m(a * d + b, b * d + a);
  return acc;
}

// --- doubled space -----------------------------------------------------------

enum class Copy { left, right };

inline DenseOperator lift_to_copy(const DenseOperator& op, Copy copy) {
  const auto id = Matrix::Identity(op.dim(), op.dim());
  return DenseOperator(copy == Copy::left ? kron(op.matrix(), id) : kron(Matrix(id), op.matrix()));
}

/// H (x) I + I (x) H
inline DenseOperator build_dual_hamiltonian(const DenseOperator& h) {
  return lift_to_copy(h, Copy::left) + lift_to_copy(h, Copy::right);
}

/// J_a = L_{a,left} L_{a,right} = L_a (x) L_a.
inline JumpOperatorSet build_dual_jumps(const JumpOperatorSet& jumps) {
  JumpOperatorSet out;
  out.kind = jumps.kind;
  out.normalization = jumps.normalization * jumps.normalization;
  for (const auto& op : jumps.ops) out.ops.push_back(kron(op, op));
  return out;
}

/// Each single-copy noise operator acting independently on the left and right copy.
inline JumpOperatorSet build_dual_noise(const JumpOperatorSet& noise) {
  JumpOperatorSet out;
  out.kind = JumpKind::noise;
  out.normalization = noise.normalization;
  for (const auto& op : noise.ops) {
    out.ops.push_back(lift_to_copy(op, Copy::left));
    out.ops.push_back(lift_to_copy(op, Copy::right));
  }
  return out;
}

}  // namespace mipt
