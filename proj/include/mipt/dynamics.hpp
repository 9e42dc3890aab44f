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

// Time evolution under the trace-normalized measurement Lindblad equation
//
//   drho/dt = -i[H, rho] + gamma * sum_a L_a rho L_a^dag / Tr(sum_b L_b rho L_b^dag)
//             - gamma/2 * sum_a {L_a^dag L_a, rho} + sum_k D[N_k](rho),
//
// its doubled-space variant, a fixed-step RK4 driver, the discrete Kraus step
// and a discrete-time quantum-jump unraveling used as an oracle.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mipt/errors.hpp"
#include "mipt/qsys.hpp"
#include "mipt/random.hpp"

namespace mipt {

using SparseOp = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

inline constexpr double kMinJumpDenominator = 1e-14;

namespace detail {

inline SparseOp to_sparse(const Matrix& m) { return m.sparseView(Complex(0.0), 0.0); }

inline bool is_diagonal(const Matrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != Complex(0.0)) return false;
  return true;
}

/// At most one nonzero per row and per column (Paulis, ladder operators,
/// projectors). Row i of L reads column src[i] with value val[i]; src[i] < 0
/// marks an empty row.
struct MonomialOp {
  std::vector<Eigen::Index> src;
  Eigen::VectorXcd val;
};

inline std::optional<MonomialOp> as_monomial(const Matrix& m) {
  MonomialOp op{std::vector<Eigen::Index>(static_cast<std::size_t>(m.rows()), -1), Eigen::VectorXcd::Zero(m.rows())};
  std::vector<bool> col_used(static_cast<std::size_t>(m.cols()), false);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) == Complex(0.0)) continue;
      if (op.src[static_cast<std::size_t>(i)] >= 0 || col_used[static_cast<std::size_t>(j)]) return std::nullopt;
      op.src[static_cast<std::size_t>(i)] = j;
      op.val(i) = m(i, j);
      col_used[static_cast<std::size_t>(j)] = true;
    }
  return op;
}

/// A jump set prepared for repeated application to Hermitian states. Diagonal
/// sets collapse into elementwise weights:
///   (sum_a L_a rho L_a^dag)_rc = W_rc rho_rc,  ({K, rho})_rc = (k_r + k_c) rho_rc.
/// Monomial sets gather permuted entries and also have a diagonal K.
class CompiledJumps {
 public:
  CompiledJumps() = default;

  explicit CompiledJumps(const JumpOperatorSet& set) {
    if (set.empty()) return;
    const Eigen::Index d = set.ops.front().dim();
    for (const auto& op : set.ops) require(op.dim() == d, "jump operators have mismatched dimensions");
    dim_ = d;
    diagonal_ = true;
    for (const auto& op : set.ops) diagonal_ = diagonal_ && is_diagonal(op.matrix());
    if (diagonal_) {
      Eigen::VectorXd k = Eigen::VectorXd::Zero(d);
      weight_ = Matrix::Zero(d, d);
      for (const auto& op : set.ops) {
        const Eigen::VectorXcd l = op.matrix().diagonal();
        weight_ += l * l.adjoint();
        k += l.cwiseAbs2();
      }
      ksum_ = k.replicate(1, d) + k.transpose().replicate(d, 1);
      return;
    }
    std::vector<MonomialOp> mono;
    for (const auto& op : set.ops) {
      auto m = as_monomial(op.matrix());
      if (!m) break;
      mono.push_back(std::move(*m));
    }
    if (mono.size() == set.ops.size()) {
      Eigen::VectorXd k = Eigen::VectorXd::Zero(d);
      for (const auto& m : mono)
        for (Eigen::Index i = 0; i < d; ++i)
          if (m.src[static_cast<std::size_t>(i)] >= 0) k(m.src[static_cast<std::size_t>(i)]) += std::norm(m.val(i));
      ksum_ = k.replicate(1, d) + k.transpose().replicate(d, 1);
      mono_ = std::move(mono);
      monomial_ = true;
    } else {
      Matrix k = Matrix::Zero(d, d);
      for (const auto& op : set.ops) {
        ops_.push_back(to_sparse(op.matrix()));
        k += op.matrix().adjoint() * op.matrix();
      }
      k_ = to_sparse(k);
    }
  }

  [[nodiscard]] bool empty() const { return dim_ == 0; }
  [[nodiscard]] Eigen::Index dim() const { return dim_; }
  [[nodiscard]] bool diagonal() const { return diagonal_; }

  /// sum_a L_a rho L_a^dag
  [[nodiscard]] Matrix sandwich(const Matrix& rho) const {
    if (diagonal_) return weight_.cwiseProduct(rho);
    if (monomial_) {
      Matrix out = Matrix::Zero(rho.rows(), rho.cols());
      add_monomial_sandwich(out, rho);
      return out;
    }
    Matrix out = Matrix::Zero(rho.rows(), rho.cols());
    for (const auto& l : ops_) {
      const Matrix b = l * rho;
      out += (l * b.adjoint()).adjoint();
    }
    return out;
  }

  /// Tr(sum_a L_a rho L_a^dag)
  [[nodiscard]] double sandwich_trace(const Matrix& rho) const {
    if (diagonal_) return (weight_.diagonal().cwiseProduct(rho.diagonal())).sum().real();
    return sandwich(rho).trace().real();
  }

  /// out += scale * {K, rho}, K = sum_a L_a^dag L_a; rho Hermitian.
  void add_anticommutator(Matrix& out, const Matrix& rho, double scale) const {
    if (diagonal_ || monomial_) {
      out.array() += scale * ksum_.array().cast<Complex>() * rho.array();
      return;
    }
    const Matrix a = k_ * rho;
    out += scale * (a + a.adjoint());
  }

  /// out += sum_a L_a rho L_a^dag, monomial sets only.
  void add_monomial_sandwich(Matrix& out, const Matrix& rho) const {
    const Eigen::Index d = rho.rows();
    for (const auto& m : mono_)
      for (Eigen::Index j = 0; j < d; ++j) {
        const Eigen::Index sj = m.src[static_cast<std::size_t>(j)];
        if (sj < 0) continue;
        const Complex vj = std::conj(m.val(j));
        const Complex* rcol = rho.col(sj).data();
        Complex* ocol = out.col(j).data();
        for (Eigen::Index i = 0; i < d; ++i) {
          const Eigen::Index si = m.src[static_cast<std::size_t>(i)];
          if (si >= 0) ocol[i] += m.val(i) * vj * rcol[si];
        }
      }
  }

  [[nodiscard]] bool monomial() const { return monomial_; }

  /// Column j of out += scale_num * W o rho + scale_anti * (k_r + k_c) o rho (diagonal sets).
  void add_fused_diagonal_column(Matrix& out, const Matrix& rho, Eigen::Index j, double scale_num,
                                 double scale_anti) const {
    out.col(j).array() +=
        (scale_num * weight_.col(j).array() + scale_anti * ksum_.col(j).array().cast<Complex>()) *
        rho.col(j).array();
  }

 private:
  Eigen::Index dim_ = 0;
  bool diagonal_ = false;
  bool monomial_ = false;
  Matrix weight_;
  std::vector<MonomialOp> mono_;
  Eigen::MatrixXd ksum_;
  std::vector<SparseOp> ops_;
  SparseOp k_;
};

}  // namespace detail

namespace detail {

/// Gamma-independent parts of a generator, shared between generators that
/// differ only in the measurement rate. The Hamiltonian is kept in both row
/// and column compressed form so the commutator needs no transposes.
struct CompiledModel {
  SparseOp hamiltonian;
  Eigen::SparseMatrix<Complex, Eigen::ColMajor> hamiltonian_cols;
  CompiledJumps jumps;
  CompiledJumps noise;

  CompiledModel(const Matrix& h, const JumpOperatorSet& j, const JumpOperatorSet& n)
      : hamiltonian(to_sparse(h)), hamiltonian_cols(hamiltonian), jumps(j), noise(n) {}

  /// Turns out.col(j) = (H rho).col(j) into column j of -i[H, rho].
  void finish_commutator_column(const Matrix& rho, Eigen::Index j, Matrix& out) const {
    using ColIt = Eigen::SparseMatrix<Complex, Eigen::ColMajor>::InnerIterator;
    auto oj = out.col(j);
    for (ColIt it(hamiltonian_cols, j); it; ++it) oj.noalias() -= it.value() * rho.col(it.row());
    oj *= Complex(0.0, -1.0);
  }
};

}  // namespace detail

/// Right-hand side of the measurement Lindblad equation, compiled once and
/// applied many times. Copies share the compiled operators. The noise terms
/// assume a Hermitian input (they use (L rho) L^dag = (L (L rho)^dag)^dag).
class LindbladGenerator {
 public:
  LindbladGenerator(const DenseOperator& hamiltonian, const JumpOperatorSet& jumps, double gamma,
                    const JumpOperatorSet& noise = {})
      : model_(std::make_shared<const detail::CompiledModel>(hamiltonian.matrix(), jumps, noise)),
        gamma_(gamma) {
    detail::require(std::isfinite(gamma) && gamma >= 0.0, "LindbladGenerator: gamma must be finite and >= 0");
    detail::require(model_->jumps.empty() || model_->jumps.dim() == hamiltonian.dim(),
                    "LindbladGenerator: jump operators do not match the Hamiltonian dimension");
    detail::require(model_->noise.empty() || model_->noise.dim() == hamiltonian.dim(),
                    "LindbladGenerator: noise operators do not match the Hamiltonian dimension");
  }

  /// Doubled-space generator: H_D is already doubled, `jumps` and `noise` are
  /// single-copy sets lifted here (J_a = L_a (x) L_a, noise per copy).
  static LindbladGenerator dual(const DenseOperator& dual_hamiltonian, const JumpOperatorSet& jumps, double gamma,
                                const JumpOperatorSet& noise = {}) {
    const JumpOperatorSet dj = jumps.empty() ? JumpOperatorSet{} : build_dual_jumps(jumps);
    const JumpOperatorSet dn = noise.empty() ? JumpOperatorSet{} : build_dual_noise(noise);
    return LindbladGenerator(dual_hamiltonian, dj, gamma, dn);
  }

  [[nodiscard]] LindbladGenerator with_gamma(double gamma) const {
    detail::require(std::isfinite(gamma) && gamma >= 0.0, "LindbladGenerator: gamma must be finite and >= 0");
    LindbladGenerator g = *this;
    g.gamma_ = gamma;
    return g;
  }

  [[nodiscard]] Eigen::Index dim() const { return model_->hamiltonian.rows(); }
  [[nodiscard]] double gamma() const { return gamma_; }

  [[nodiscard]] Matrix operator()(const Matrix& rho) const {
    const auto& m = *model_;
    const Eigen::Index d = rho.rows();
    Matrix out = m.hamiltonian * rho;
    const bool measure = gamma_ != 0.0 && !m.jumps.empty();
    double den = 1.0;
    if (measure) {
      den = m.jumps.sandwich_trace(rho);
      if (!(den > kMinJumpDenominator))
        throw RuntimeFailure("measurement term undefined: Tr(sum L rho L^dag) = " + std::to_string(den));
    }
    const bool fused = measure && m.jumps.diagonal();
    for (Eigen::Index j = 0; j < d; ++j) {
      m.finish_commutator_column(rho, j, out);
      if (fused) m.jumps.add_fused_diagonal_column(out, rho, j, gamma_ / den, -0.5 * gamma_);
    }
    if (measure && !fused) {
      out += (gamma_ / den) * m.jumps.sandwich(rho);
      m.jumps.add_anticommutator(out, rho, -0.5 * gamma_);
    }
    if (!m.noise.empty()) {
      if (m.noise.monomial())
        m.noise.add_monomial_sandwich(out, rho);
      else
        out += m.noise.sandwich(rho);
      m.noise.add_anticommutator(out, rho, -0.5);
    }
    return out;
  }

 private:
  std::shared_ptr<const detail::CompiledModel> model_;
  double gamma_;
};

inline DenseOperator lindblad_rhs(const DensityMatrix& rho, const DenseOperator& hamiltonian,
                                  const JumpOperatorSet& jumps, double gamma, const JumpOperatorSet& noise = {}) {
  detail::require(rho.dim() == hamiltonian.dim(), "lindblad_rhs: state and Hamiltonian dimensions differ");
  return DenseOperator(LindbladGenerator(hamiltonian, jumps, gamma, noise)(rho.matrix()));
}

inline DenseOperator dual_lindblad_rhs(const DensityMatrix& rho_d, const DenseOperator& dual_hamiltonian,
                                       const JumpOperatorSet& jumps, double gamma,
                                       const JumpOperatorSet& noise = {}) {
  detail::require(rho_d.dim() == dual_hamiltonian.dim(), "dual_lindblad_rhs: state and H_D dimensions differ");
  return DenseOperator(LindbladGenerator::dual(dual_hamiltonian, jumps, gamma, noise)(rho_d.matrix()));
}

// --- fixed-step integration --------------------------------------------------

struct EvolutionConfig {
  double dt = 0.01;
  double t_final = 15.0;
  double gamma = 0.0;
  bool renormalize_trace = true;
  // Steps between recorded snapshots; 0 records only the final state.
  long record_stride = 0;
  double positivity_tolerance = 1e-6;
  bool check_positivity = true;

  [[nodiscard]] long steps() const { return std::lround(t_final / dt); }

  void validate() const {
    detail::require(std::isfinite(dt) && dt > 0.0, "EvolutionConfig: dt must be > 0");
    detail::require(std::isfinite(t_final) && t_final >= 0.0, "EvolutionConfig: t_final must be >= 0");
    detail::require(std::abs(static_cast<double>(steps()) * dt - t_final) <= 1e-9 * std::max(1.0, t_final),
                    "EvolutionConfig: t_final is not a whole number of steps");
    detail::require(record_stride >= 0, "EvolutionConfig: record_stride must be >= 0");
    detail::require(std::isfinite(gamma) && gamma >= 0.0, "EvolutionConfig: gamma must be >= 0");
  }
};

struct Snapshot {
  long step;
  double time;
  DensityMatrix state;
};

/// Worst values seen along an evolution. `max_trace_drift` is |Tr rho - 1|
/// right after each step, before renormalization; `max_trace_error` is the
/// same for the state actually carried forward. Hermiticity and eigenvalues
/// are sampled at snapshots.
struct EvolutionStats {
  double max_trace_drift = 0.0;
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  EvolutionStats stats;

  [[nodiscard]] const DensityMatrix& final_state() const { return snapshots.back().state; }
};

template <class Rhs>
concept Generator = requires(const Rhs& f, const Matrix& m) {
  { f(m) } -> std::convertible_to<Matrix>;
};

/// One classical fourth-order Runge-Kutta step.
template <Generator Rhs>
Matrix rk4_step(const Rhs& rhs, const Matrix& rho, double dt) {
  const Matrix k1 = rhs(rho);
  const Matrix k2 = rhs(rho + (0.5 * dt) * k1);
  const Matrix k3 = rhs(rho + (0.5 * dt) * k2);
  const Matrix k4 = rhs(rho + dt * k3);
  return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Fixed-step RK4 with optional per-step trace renormalization. Every step
/// checks finiteness and the diagonal; full eigenvalue checks run at each
/// snapshot. Throws RuntimeFailure when positivity is violated.
template <Generator Rhs>
Trajectory evolve(const DensityMatrix& rho0, const Rhs& rhs, const EvolutionConfig& config) {
  config.validate();
  const long steps = config.steps();
  const double tol = config.positivity_tolerance;
  Trajectory out;
  Matrix rho = rho0.matrix();

  auto record = [&](long step) {
    const double h = hermiticity_error(rho);
    out.stats.max_hermiticity_error = std::max(out.stats.max_hermiticity_error, h);
    if (config.check_positivity) {
      const double lmin = min_eigenvalue(rho);
      out.stats.min_eigenvalue = std::min(out.stats.min_eigenvalue, lmin);
      if (lmin < -tol)
        throw RuntimeFailure("positivity violated at t = " + std::to_string(step * config.dt) +
                             ": min eigenvalue " + std::to_string(lmin) + " (dt too large?)");
    }
    out.snapshots.push_back({step, static_cast<double>(step) * config.dt,
                             DensityMatrix::trusted(rho, rho0.tolerance())});
  };

  if (config.record_stride > 0) record(0);
  for (long step = 1; step <= steps; ++step) {
    rho = rk4_step(rhs, rho, config.dt);
    if (!rho.allFinite())
      throw RuntimeFailure("non-finite state at t = " + std::to_string(step * config.dt) + " (dt too large?)");
    const Complex tr = rho.trace();
    out.stats.max_trace_drift = std::max(out.stats.max_trace_drift, std::abs(tr - Complex(1.0)));
    if (config.renormalize_trace) rho /= tr.real();
    out.stats.max_trace_error = std::max(out.stats.max_trace_error, std::abs(rho.trace() - Complex(1.0)));
    if (config.check_positivity && rho.diagonal().real().minCoeff() < -tol)
      throw RuntimeFailure("positivity violated at t = " + std::to_string(step * config.dt) +
                           ": negative population (dt too large?)");
    const bool at_stride = config.record_stride > 0 && step % config.record_stride == 0;
    if (at_stride || step == steps) record(step);
  }
  if (steps == 0 && config.record_stride == 0) record(0);
  return out;
}

/// One discrete measurement step:
///   rho -> gamma dt * sum L rho L^dag / Tr(...) + (1 - gamma dt)(rho - i[H, rho] dt),
/// renormalized to unit trace.
inline DensityMatrix kraus_step(const DensityMatrix& rho, const DenseOperator& hamiltonian,
                                const JumpOperatorSet& jumps, double gamma, double dt) {
  detail::require(dt > 0.0 && gamma >= 0.0, "kraus_step: need dt > 0 and gamma >= 0");
  detail::require(gamma * dt <= 1.0, "kraus_step: gamma * dt must be <= 1");
  detail::require(rho.dim() == hamiltonian.dim(), "kraus_step: dimension mismatch");
  const Matrix& r = rho.matrix();
  const Matrix& h = hamiltonian.matrix();
  const double p = gamma * dt;
  Matrix out = (1.0 - p) * (r - Complex(0.0, dt) * (h * r - r * h));
  if (p > 0.0 && !jumps.empty()) {
    Matrix m = Matrix::Zero(r.rows(), r.cols());
    for (const auto& l : jumps.ops) m += l.matrix() * r * l.matrix().adjoint();
    const double den = m.trace().real();
    if (!(den > kMinJumpDenominator)) throw RuntimeFailure("kraus_step: vanishing jump denominator");
    out += (p / den) * m;
  }
  out /= out.trace().real();
  return DensityMatrix::trusted(std::move(out), rho.tolerance());
}

// --- discrete-time unraveling ------------------------------------------------

enum class EnsembleMode { exact, monte_carlo };

/// Outcome codes per (step, measured qubit), in that order.
enum OutcomeCode : std::uint8_t { kNotMeasured = 0, kOutcome0 = 1, kOutcome1 = 2 };

struct TrajectoryRecord {
  double weight;
  DensityMatrix state;                 // reduced state of the central spin
  std::vector<std::uint8_t> outcomes;  // measurement record identifying the branch
};

struct TrajectoryEnsemble {
  std::vector<TrajectoryRecord> records;
  EnsembleMode mode = EnsembleMode::exact;
  std::size_t sample_count = 0;
};

struct UnravelingConfig {
  double gamma = 0.0;
  double dt = 0.01;
  double t_final = 0.0;
  EnsembleMode mode = EnsembleMode::exact;
  std::uint64_t seed = 0;
  std::size_t sample_count = 10000;
  std::size_t max_branches = std::size_t{1} << 18;
  double prune_below = 1e-12;

  [[nodiscard]] long steps() const { return std::lround(t_final / dt); }

  void validate() const {
    detail::require(dt > 0.0 && t_final >= 0.0, "UnravelingConfig: need dt > 0 and t_final >= 0");
    detail::require(gamma >= 0.0 && gamma * dt <= 1.0, "UnravelingConfig: need 0 <= gamma * dt <= 1");
    detail::require(mode == EnsembleMode::exact || sample_count >= 1, "UnravelingConfig: sample_count must be >= 1");
  }
};

namespace detail {

/// P_o rho P_o for qubit q of an n-qubit register (masking rows and columns).
inline Matrix project_qubit(const Matrix& rho, int q, int n, int outcome) {
  const Eigen::Index mask = Eigen::Index{1} << (n - 1 - q);
  const Eigen::Index want = outcome ? mask : 0;
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  for (Eigen::Index j = 0; j < rho.cols(); ++j) {
    if ((j & mask) != want) continue;
    for (Eigen::Index i = 0; i < rho.rows(); ++i)
      if ((i & mask) == want) out(i, j) = rho(i, j);
  }
  return out;
}

inline double outcome_probability(const Matrix& rho, int q, int n, int outcome) {
  const Eigen::Index mask = Eigen::Index{1} << (n - 1 - q);
  const Eigen::Index want = outcome ? mask : 0;
  double p = 0.0;
  for (Eigen::Index i = 0; i < rho.rows(); ++i)
    if ((i & mask) == want) p += rho(i, i).real();
  return p;
}

inline Matrix step_unitary(const DenseOperator& h, double dt) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix());
  const Eigen::VectorXcd phases =
      (es.eigenvalues().cast<Complex>() * Complex(0.0, -dt)).array().exp().matrix();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

/// Discrete-time unraveling: each step, every measured qubit is projectively
/// measured with probability gamma*dt (Born-rule outcome); a step without any
/// measurement applies exp(-iH dt). Exact mode enumerates the branching tree;
/// Monte Carlo mode samples trajectories, one seeded stream per sample.
inline TrajectoryEnsemble trajectory_ensemble(const SystemSpec& spec, const DensityMatrix& rho0,
                                              const UnravelingConfig& config) {
  spec.validate();
  config.validate();
  const int n = spec.qubits();
  detail::require(rho0.qubits() == n, "trajectory_ensemble: state does not match the system size");
  const std::vector<int> measured = spec.measured_qubits();
  const Matrix u = detail::step_unitary(build_hamiltonian(spec), config.dt);
  const long steps = config.steps();
  const double pm = config.gamma * config.dt;
  const int central[] = {0};

  TrajectoryEnsemble ens;
  ens.mode = config.mode;

  if (config.mode == EnsembleMode::exact) {
    struct Branch {
      double p;
      Matrix rho;
      std::vector<std::uint8_t> outcomes;
      bool measured_this_step;
    };
    std::vector<Branch> branches{{1.0, rho0.matrix(), {}, false}};
    for (long s = 0; s < steps; ++s) {
      for (auto& b : branches) b.measured_this_step = false;
      for (int q : measured) {
        std::vector<Branch> next;
        next.reserve(branches.size() * 3);
        for (auto& b : branches) {
          for (int o : {0, 1}) {
            const double po = detail::outcome_probability(b.rho, q, n, o);
            const double p = b.p * pm * po;
            if (p < config.prune_below) continue;
            Branch c{p, detail::project_qubit(b.rho, q, n, o) / po, b.outcomes, true};
            c.outcomes.push_back(o ? kOutcome1 : kOutcome0);
            next.push_back(std::move(c));
          }
          const double p_skip = b.p * (1.0 - pm);
          if (p_skip >= config.prune_below) {
            b.p = p_skip;
            b.outcomes.push_back(kNotMeasured);
            next.push_back(std::move(b));
          }
        }
        if (next.size() > config.max_branches)
          throw RuntimeFailure("trajectory_ensemble: branch count " + std::to_string(next.size()) +
                               " exceeds the limit " + std::to_string(config.max_branches));
        branches = std::move(next);
      }
      for (auto& b : branches)
        if (!b.measured_this_step) b.rho = u * b.rho * u.adjoint();
    }
    ens.records.reserve(branches.size());
    for (auto& b : branches)
      ens.records.push_back({b.p, DensityMatrix::trusted(partial_trace(b.rho, central), rho0.tolerance()),
                             std::move(b.outcomes)});
    return ens;
  }

  ens.sample_count = config.sample_count;
  const double w = 1.0 / static_cast<double>(config.sample_count);
  ens.records.reserve(config.sample_count);
  for (std::size_t k = 0; k < config.sample_count; ++k) {
    Engine rng = make_engine(config.seed, k);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Matrix rho = rho0.matrix();
    std::vector<std::uint8_t> outcomes;
    outcomes.reserve(static_cast<std::size_t>(steps) * measured.size());
    for (long s = 0; s < steps; ++s) {
      bool any = false;
      for (int q : measured) {
        if (uniform(rng) >= pm) {
          outcomes.push_back(kNotMeasured);
          continue;
        }
        any = true;
        const double p0 = detail::outcome_probability(rho, q, n, 0);
        const int o = uniform(rng) < p0 ? 0 : 1;
        const double po = o ? 1.0 - p0 : p0;
        rho = detail::project_qubit(rho, q, n, o) / po;
        outcomes.push_back(o ? kOutcome1 : kOutcome0);
      }
      if (!any) rho = u * rho * u.adjoint();
    }
    ens.records.push_back({w, DensityMatrix::trusted(partial_trace(rho, central), rho0.tolerance()),
                           std::move(outcomes)});
  }
  return ens;
}

}  // namespace mipt
