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


// Reference implementations used only by the tests. They are written from
// scratch with loops over basis labels and share no code with the library.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

inline int bit(long index, int qubit, int n) { return static_cast<int>((index >> (n - 1 - qubit)) & 1); }

/// exp(A) by scaling and squaring with a 30-term Taylor series.
inline Matrix expm(const Matrix& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::ldexp(1.0, squarings) > 0.25) ++squarings;
  const Matrix s = a / std::ldexp(1.0, squarings);
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * s / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

/// Single-qubit operator acting on `site`, identity elsewhere, by direct
/// matrix elements: <i|O|j> = op[b_i][b_j] if all other bits agree.
inline Matrix embed(const Eigen::Matrix2cd& op, int site, int n) {
  const long d = 1L << n;
  Matrix out = Matrix::Zero(d, d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) {
      bool others_equal = true;
      for (int q = 0; q < n; ++q)
        if (q != site && bit(i, q, n) != bit(j, q, n)) others_equal = false;
      if (others_equal) out(i, j) = op(bit(i, site, n), bit(j, site, n));
    }
  return out;
}

/// Partial trace keeping `keep` (in ascending order), summing over every
/// label of the traced qubits.
inline Matrix partial_trace(const Matrix& rho, const std::vector<int>& keep) {
  const int n = static_cast<int>(std::lround(std::log2(static_cast<double>(rho.rows()))));
  const int k = static_cast<int>(keep.size());
  Matrix out = Matrix::Zero(1L << k, 1L << k);
  auto reduced = [&](long index) {
    long r = 0;
    for (int q : keep) r = (r << 1) | bit(index, q, n);
    return r;
  };
  auto traced_equal = [&](long i, long j) {
    for (int q = 0; q < n; ++q) {
      bool kept = false;
      for (int kq : keep) kept = kept || kq == q;
      if (!kept && bit(i, q, n) != bit(j, q, n)) return false;
    }
    return true;
  };
  for (long i = 0; i < rho.rows(); ++i)
    for (long j = 0; j < rho.cols(); ++j)
      if (traced_equal(i, j)) out(reduced(i), reduced(j)) += rho(i, j);
  return out;
}

/// Central spin flip-flop Hamiltonian from explicit basis-state hopping.
inline Matrix central_spin_hamiltonian(int bath, double g) {
  const int n = bath + 1;
  const long d = 1L << n;
  Matrix h = Matrix::Zero(d, d);
  for (long s = 0; s < d; ++s)
    for (int j = 1; j < n; ++j)
      if (bit(s, 0, n) != bit(s, j, n)) {
        const long t = s ^ (1L << (n - 1)) ^ (1L << (n - 1 - j));
        h(t, s) += g;
      }
  return h;
}

inline double purity(const Matrix& rho) { return (rho * rho).trace().real(); }

/// Diagonal projector onto outcome o of qubit q.
inline Matrix projector(int q, int n, int o) {
  const long d = 1L << n;
  Matrix p = Matrix::Zero(d, d);
  for (long i = 0; i < d; ++i)
    if (bit(i, q, n) == o) p(i, i) = 1.0;
  return p;
}

struct PairSums {
  double weighted_purity = 0.0;  // sum p^2 Tr rho_a^2
  double weight_squares = 0.0;   // sum p^2
  double weight_total = 0.0;     // sum p
  long leaves = 0;
};

/// Depth-first enumeration of the discrete measurement tree: each step each
/// measured qubit is measured with probability gamma*dt; a step with no
/// measurement applies exp(-iH dt). Returns sums needed for the ensemble
/// Renyi entropy of the central spin.
inline PairSums enumerate_tree(int bath, const Matrix& rho0, double gamma, double dt, int steps,
                               const std::vector<int>& measured) {
  const int n = bath + 1;
  const Matrix u = expm(Complex(0.0, -dt) * central_spin_hamiltonian(bath, 1.0));
  const double pm = gamma * dt;
  PairSums sums;
  std::function<void(int, std::size_t, bool, double, const Matrix&)> walk =
      [&](int step, std::size_t slot, bool any, double p, const Matrix& rho) {
        if (p < 1e-12) return;
        if (slot == measured.size()) {
          const Matrix next = any ? rho : Matrix(u * rho * u.adjoint());
          if (step + 1 == steps) {
            const double pur = purity(partial_trace(next, {0}));
            sums.weighted_purity += p * p * pur;
            sums.weight_squares += p * p;
            sums.weight_total += p;
            ++sums.leaves;
            return;
          }
          walk(step + 1, 0, false, p, next);
          return;
        }
        const int q = measured[slot];
        walk(step, slot + 1, any, p * (1.0 - pm), rho);
        for (int o : {0, 1}) {
          const Matrix proj = projector(q, n, o);
          const Matrix post = proj * rho * proj;
          const double po = post.trace().real();
          if (po <= 0.0) continue;
          walk(step, slot + 1, true, p * pm * po, post / po);
        }
      };
  if (steps == 0) {
    const double pur = purity(partial_trace(rho0, {0}));
    return {pur, 1.0, 1.0, 1};
  }
  walk(0, 0, false, 1.0, rho0);
  return sums;
}

}  // namespace oracle
