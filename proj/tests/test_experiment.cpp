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


#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "mipt/experiment.hpp"

namespace {

using mipt::Matrix;
using mipt::SweepConfig;
using mipt::SweepPoint;
using mipt::SweepResult;
using mipt::ValidationError;

SweepConfig small_sweep(int l, mipt::EntropyKind kind) {
  SweepConfig c;
  c.spec.bath_size = l;
  c.entropy = kind;
  c.gamma_grid = {0.0, 0.2, 0.4};
  c.repetitions = 3;
  c.t_final = 2.0;
  return c;
}

SweepResult curve_of(std::vector<std::pair<double, double>> pts) {
  SweepResult r;
  for (auto [g, s] : pts) r.points.push_back(SweepPoint{g, s, 0.0, 1, {}});
  return r;
}

TEST(RandomMixedState, DeterministicFullRankUnitTrace) {
  const auto a = mipt::random_mixed_state(3, 42);
  const auto b = mipt::random_mixed_state(3, 42);
  EXPECT_EQ(a.matrix(), b.matrix());
  EXPECT_NE(a.matrix(), mipt::random_mixed_state(3, 43).matrix());
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix());
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  EXPECT_NEAR(es.eigenvalues().sum(), 1.0, 1e-14);
  EXPECT_THROW(mipt::random_mixed_state(0, 1), ValidationError);
}

TEST(RandomMixedState, EnsembleMeanIsMaximallyMixed) {
  const int n = 2;
  const int samples = 1000;
  const Eigen::Index d = 4;
  Matrix sum = Matrix::Zero(d, d);
  Eigen::MatrixXd sum_sq_re = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd sum_sq_im = Eigen::MatrixXd::Zero(d, d);
  for (int s = 0; s < samples; ++s) {
    const Matrix m = mipt::random_mixed_state(n, mipt::derive_seed(5, static_cast<std::uint64_t>(s))).matrix();
    sum += m;
    sum_sq_re += m.real().cwiseAbs2();
    sum_sq_im += m.imag().cwiseAbs2();
  }
  const Matrix mean = sum / samples;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const double target = i == j ? 0.25 : 0.0;
      const double var_re = sum_sq_re(i, j) / samples - mean(i, j).real() * mean(i, j).real();
      const double se_re = std::sqrt(var_re / samples);
      EXPECT_LT(std::abs(mean(i, j).real() - target), 3.0 * se_re + 1e-15) << i << "," << j;
      if (i != j) {
        const double var_im = sum_sq_im(i, j) / samples - mean(i, j).imag() * mean(i, j).imag();
        EXPECT_LT(std::abs(mean(i, j).imag()), 3.0 * std::sqrt(var_im / samples)) << i << "," << j;
      }
    }
}

TEST(Seeds, DerivedStreamsAreDistinctAndStable) {
  EXPECT_EQ(mipt::derive_seed(1, 0), mipt::derive_seed(1, 0));
  EXPECT_NE(mipt::derive_seed(1, 0), mipt::derive_seed(1, 1));
  EXPECT_NE(mipt::derive_seed(1, 0), mipt::derive_seed(2, 0));
}

TEST(CriticalRate, Definition) {
  EXPECT_FALSE(mipt::critical_rate(curve_of({{0.1, 0.5}, {0.2, 0.2}}), 1e-3).has_value());
  const auto r = mipt::critical_rate(curve_of({{0.1, 0.05}, {0.2, 0.0005}}), 1e-3);
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(*r, 0.2);
  EXPECT_THROW(mipt::critical_rate(SweepResult{}, 1e-3), ValidationError);
}

TEST(SweepConfig, Validation) {
  SweepConfig c = small_sweep(1, mipt::EntropyKind::mutual);
  EXPECT_NO_THROW(c.validate());
  c.gamma_grid = {0.1, 0.1};
  EXPECT_THROW(c.validate(), ValidationError);
  c.gamma_grid = {-0.1, 0.1};
  EXPECT_THROW(c.validate(), ValidationError);
  c.gamma_grid = {};
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_sweep(1, mipt::EntropyKind::mutual);
  c.repetitions = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_sweep(1, mipt::EntropyKind::von_neumann);
  EXPECT_THROW(c.validate(), ValidationError);
  const auto grid = mipt::default_gamma_grid();
  ASSERT_EQ(grid.size(), 51u);
  EXPECT_EQ(grid.front(), 0.0);
  EXPECT_EQ(grid.back(), 0.5);
}

TEST(ResidualEntropyCurve, ShapeAndUnmeasuredPoint) {
  const auto r = mipt::residual_entropy_curve(small_sweep(1, mipt::EntropyKind::mutual));
  ASSERT_EQ(r.points.size(), 3u);
  for (const auto& p : r.points) EXPECT_EQ(p.n_reps, 3);
  EXPECT_GT(r.points[0].mean_entropy, 0.0);
  EXPECT_FALSE(r.partial);
  const auto d = mipt::residual_entropy_curve(small_sweep(1, mipt::EntropyKind::dual_renyi));
  EXPECT_GT(d.points[0].mean_entropy, 0.0);
}

TEST(ResidualEntropyCurve, MonotoneInRateWithinTwoStandardErrors) {
  SweepConfig c;
  c.spec.bath_size = 2;
  c.repetitions = 50;
  c.gamma_grid.clear();
  for (int i = 0; i <= 10; ++i) c.gamma_grid.push_back(0.05 * i);
  const auto r = mipt::residual_entropy_curve(c);
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    const auto& a = r.points[i - 1];
    const auto& b = r.points[i];
    EXPECT_LE(b.mean_entropy, a.mean_entropy + 2.0 * std::hypot(a.std_error, b.std_error)) << "gamma " << b.gamma;
  }
}

TEST(ResidualEntropyCurve, IndependentOfWorkerCount) {
  const SweepConfig c = small_sweep(2, mipt::EntropyKind::mutual);
  const auto a = mipt::residual_entropy_curve(c, 1);
  const auto b = mipt::residual_entropy_curve(c, 3);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].mean_entropy, b.points[i].mean_entropy);
    EXPECT_EQ(a.points[i].std_error, b.points[i].std_error);
  }
}

TEST(MemoryBudget, RefusesLargeDoubledRegisters) {
  SweepConfig c = small_sweep(5, mipt::EntropyKind::dual_renyi);
  // 12-qubit doubled register: 4096^2 entries of 16 bytes, twelve working copies.
  EXPECT_EQ(mipt::estimate_memory_bytes(c, 1), std::size_t{4096} * 4096 * 16 * 12);
  try {
    (void)mipt::residual_entropy_curve(c, 1);
    FAIL() << "expected a refusal";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("MiB"), std::string::npos);
  }
  c.entropy = mipt::EntropyKind::mutual;
  EXPECT_NO_THROW(mipt::check_memory_budget(c, 1));
}

TEST(ParallelFor, RunsEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(100, 0);
  mipt::parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(mipt::parallel_for(10, 3,
                                  [](std::size_t i) {
                                    if (i == 7) throw mipt::RuntimeFailure("boom");
                                  }),
               mipt::RuntimeFailure);
}

TEST(Channels, NamesRoundTrip) {
  for (auto c : {mipt::NoiseChannel::dephasing, mipt::NoiseChannel::emission, mipt::NoiseChannel::absorption,
                 mipt::NoiseChannel::gate_error})
    EXPECT_EQ(mipt::parse_channel(mipt::channel_name(c)), c);
  EXPECT_THROW(mipt::parse_channel("relax"), ValidationError);
  const auto n = mipt::add_channel({}, mipt::NoiseChannel::emission, 0.02);
  EXPECT_EQ(n.gamma_em, 0.02);
  EXPECT_TRUE(mipt::add_channel({}, mipt::NoiseChannel::dephasing, 0.0).is_zero());
}

TEST(FitLine, ExactAndNoisyData) {
  const std::vector<double> x{0, 1, 2, 3};
  const std::vector<double> y{1, 0.5, 0, -0.5};
  const auto f = mipt::fit_line(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-15);
  EXPECT_NEAR(f.intercept, 1.0, 1e-15);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-15);
  const std::vector<double> y2{1, 0.4, 0.1, -0.5};
  EXPECT_LT(mipt::fit_line(x, y2).r_squared, 1.0);
  EXPECT_THROW(mipt::fit_line(std::vector<double>{1}, std::vector<double>{1}), ValidationError);
  EXPECT_THROW(mipt::fit_line(std::vector<double>{1, 1}, std::vector<double>{1, 2}), ValidationError);
}

TEST(Displacement, ZeroRateIsExactlyOneAndNoiseLowersEntropy) {
  SweepConfig c = small_sweep(1, mipt::EntropyKind::dual_renyi);
  c.t_final = 5.0;
  c.repetitions = 4;
  const std::vector<double> rates{0.0, 0.05, 0.1};
  const auto r = mipt::displacement_sweep(c, mipt::NoiseChannel::emission, rates, 0.05);
  ASSERT_EQ(r.points.size(), 3u);
  EXPECT_EQ(r.points[0].one_minus_d, 1.0);
  EXPECT_EQ(r.points[0].std_error, 0.0);
  EXPECT_GT(r.clean_entropy, c.entropy_floor);
  for (const auto& p : r.points) {
    EXPECT_LE(p.one_minus_d, 1.0 + 2.0 * p.std_error);
    EXPECT_GE(p.one_minus_d, 0.0 - 2.0 * p.std_error);
  }
}

TEST(Displacement, UndefinedWhenCleanEntropyIsBelowFloor) {
  SweepConfig c = small_sweep(1, mipt::EntropyKind::dual_renyi);
  c.repetitions = 2;
  c.entropy_floor = 50.0;
  const std::vector<double> rates{0.0, 0.01};
  try {
    (void)mipt::displacement_sweep(c, mipt::NoiseChannel::dephasing, rates, 0.05);
    FAIL() << "expected a configuration error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("displacement undefined"), std::string::npos);
  }
  EXPECT_THROW(mipt::displacement_sweep(c, mipt::NoiseChannel::dephasing, std::vector<double>{}, 0.05),
               ValidationError);
  EXPECT_THROW(mipt::displacement_sweep(c, mipt::NoiseChannel::dephasing, std::vector<double>{-0.1}, 0.05),
               ValidationError);
}

}  // namespace
