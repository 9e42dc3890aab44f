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

// Entanglement diagnostics, all in bits.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mipt/dynamics.hpp"
#include "mipt/errors.hpp"
#include "mipt/qsys.hpp"

namespace mipt {

enum class EntropyKind { von_neumann, mutual, dual_renyi, ensemble_renyi };

struct EntropyValue {
  double value;
  EntropyKind kind;
};

inline constexpr double kEigenvalueClamp = 1e-12;
inline constexpr double kMaxImaginaryResidue = 1e-9;

/// -sum lambda log2 lambda over eigenvalues of a Hermitian matrix, with
/// eigenvalues below 1e-12 treated as zero.
inline double von_neumann_bits(const Matrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (double lambda : es.eigenvalues())
    if (lambda > kEigenvalueClamp) s -= lambda * std::log2(lambda);
  return std::max(s, 0.0);
}

inline EntropyValue von_neumann(const DensityMatrix& rho) {
  return {von_neumann_bits(rho.matrix()), EntropyKind::von_neumann};
}

/// S(rho_a) + S(rho_b) - S(rho_ab) for the bipartition a | complement.
inline EntropyValue mutual_entropy(const DensityMatrix& rho_ab, std::span<const int> a) {
  const int n = rho_ab.qubits();
  const std::vector<int> part_a = detail::normalize_qubit_set(a, n, "mutual_entropy");
  detail::require(static_cast<int>(part_a.size()) < n, "mutual_entropy: partition must be a proper subset");
  std::vector<int> part_b;
  for (int q = 0; q < n; ++q)
    if (!std::binary_search(part_a.begin(), part_a.end(), q)) part_b.push_back(q);
  const double s_a = von_neumann_bits(partial_trace(rho_ab.matrix(), part_a));
  const double s_b = von_neumann_bits(partial_trace(rho_ab.matrix(), part_b));
  const double s_ab = von_neumann_bits(rho_ab.matrix());
  return {std::max(s_a + s_b - s_ab, 0.0), EntropyKind::mutual};
}

inline EntropyValue mutual_entropy(const DensityMatrix& rho_ab, std::initializer_list<int> a) {
  return mutual_entropy(rho_ab, std::span<const int>(a.begin(), a.size()));
}

/// Tr rho^2
inline double purity(const Matrix& rho) {
  // Tr(rho rho) = sum_ij rho_ij rho_ji = sum_ij |rho_ij|^2 for Hermitian rho.
  return (rho.cwiseProduct(rho.transpose())).sum().real();
}

inline double purity(const DensityMatrix& rho) { return purity(rho.matrix()); }

/// Which single-copy subsystem the SWAP acts on after the complement is traced out.
enum class DualSide { central, bath };

/// -log2 Tr_{A_L,A_R}[X_A Tr_{B_L,B_R} rho_D] on the doubled register
/// (left copy qubits [0..L], right copy [L+1..2L+1]).
inline EntropyValue dual_renyi(const Matrix& rho_d, const SystemSpec& spec, DualSide side = DualSide::central) {
  spec.validate();
  const int n = spec.qubits();
  detail::require(rho_d.rows() == (Eigen::Index{1} << (2 * n)), "dual_renyi: state is not on the doubled register");
  std::vector<int> keep;
  if (side == DualSide::central) {
    keep = {0, n};
  } else {
    for (int q = 1; q < n; ++q) keep.push_back(q);
    for (int q = 1; q < n; ++q) keep.push_back(n + q);
  }
  const Matrix reduced = partial_trace(rho_d, keep);
  const Complex overlap = side == DualSide::central
                              ? (build_dual_swap(spec.bath_size).matrix() * reduced).trace()
                              : swap_expectation(reduced);
  if (std::abs(overlap.imag()) > kMaxImaginaryResidue)
    throw RuntimeFailure("dual_renyi: SWAP expectation has imaginary part " + std::to_string(overlap.imag()));
  if (!(overlap.real() > 0.0))
    throw RuntimeFailure("dual_renyi: non-positive SWAP expectation " + std::to_string(overlap.real()));
  return {std::max(-std::log2(overlap.real()), 0.0), EntropyKind::dual_renyi};
}

inline EntropyValue dual_renyi(const DensityMatrix& rho_d, const SystemSpec& spec, DualSide side = DualSide::central) {
  return dual_renyi(rho_d.matrix(), spec, side);
}

namespace detail {

struct EnsembleSums {
  double numerator = 0.0;    // sum p~_i-unnormalized * purity
  double denominator = 0.0;  // sum p_i^2 (or pair counts)
};

/// Exact mode: sums over p_i^2. Monte Carlo mode: records with the same
/// measurement record are one branch; c(c-1) pair counts estimate p_i^2 without bias.
inline EnsembleSums ensemble_sums(const TrajectoryEnsemble& ens, std::size_t begin, std::size_t end) {
  EnsembleSums sums;
  if (ens.mode == EnsembleMode::exact) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& r = ens.records[i];
      sums.numerator += r.weight * r.weight * purity(r.state);
      sums.denominator += r.weight * r.weight;
    }
    return sums;
  }
  struct Group {
    double count = 0;
    double purity = 0;
  };
  std::map<std::vector<std::uint8_t>, Group> groups;
  for (std::size_t i = begin; i < end; ++i) {
    auto& g = groups[ens.records[i].outcomes];
    if (g.count == 0) g.purity = purity(ens.records[i].state);
    g.count += 1;
  }
  for (const auto& [key, g] : groups) {
    const double pairs = g.count * (g.count - 1.0);
    sums.numerator += pairs * g.purity;
    sums.denominator += pairs;
  }
  return sums;
}

}  // namespace detail

/// -log2( sum_i p~_i Tr rho_{a,i}^2 ), p~_i = p_i^2 / sum p^2.
inline EntropyValue ensemble_renyi(const TrajectoryEnsemble& ens) {
  detail::require(!ens.records.empty(), "ensemble_renyi: empty ensemble");
  const auto sums = detail::ensemble_sums(ens, 0, ens.records.size());
  if (!(sums.denominator > 0.0))
    throw ValidationError(ens.mode == EnsembleMode::exact
                              ? "ensemble_renyi: all weights are zero"
                              : "ensemble_renyi: no repeated measurement record among samples");
  return {std::max(-std::log2(sums.numerator / sums.denominator), 0.0), EntropyKind::ensemble_renyi};
}

struct Estimate {
  double value;
  double std_error;
};

/// Ensemble Renyi entropy with a delete-one-block jackknife standard error
/// (Monte Carlo mode; exact ensembles return zero error).
inline Estimate ensemble_renyi_estimate(const TrajectoryEnsemble& ens, std::size_t blocks = 20) {
  const double full = ensemble_renyi(ens).value;
  if (ens.mode == EnsembleMode::exact) return {full, 0.0};
  detail::require(blocks >= 2 && ens.records.size() >= blocks, "ensemble_renyi_estimate: too few samples");
  const std::size_t n = ens.records.size();
  std::vector<double> leave_out;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * n / blocks;
    const std::size_t hi = (b + 1) * n / blocks;
    // Recount without block b. Pair counts do not decompose additively, so rebuild.
    TrajectoryEnsemble sub;
    sub.mode = ens.mode;
    sub.records.reserve(n - (hi - lo));
    for (std::size_t i = 0; i < n; ++i)
      if (i < lo || i >= hi) sub.records.push_back(ens.records[i]);
    const auto sums = detail::ensemble_sums(sub, 0, sub.records.size());
    if (sums.denominator > 0.0) leave_out.push_back(-std::log2(sums.numerator / sums.denominator));
  }
  detail::require(leave_out.size() >= 2, "ensemble_renyi_estimate: too few repeated records");
  double mean = 0.0;
  for (double v : leave_out) mean += v;
  mean /= static_cast<double>(leave_out.size());
  double ss = 0.0;
  for (double v : leave_out) ss += (v - mean) * (v - mean);
  const auto g = static_cast<double>(leave_out.size());
  return {full, std::sqrt((g - 1.0) / g * ss)};
}

}  // namespace mipt
