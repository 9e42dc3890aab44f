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

// Numerical experiments: random mixed initial states, residual-entropy
// sweeps over the measurement rate, critical-rate extraction and the
// noise-displacement study.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mipt/dynamics.hpp"
#include "mipt/entropy.hpp"
#include "mipt/errors.hpp"
#include "mipt/qsys.hpp"
#include "mipt/random.hpp"

namespace mipt {

/// Hilbert-Schmidt random state: rho = G G^dag / Tr(G G^dag) with G a matrix of
/// independent standard complex Gaussians. Full rank with probability one.
inline DensityMatrix random_mixed_state(int qubits, std::uint64_t seed) {
  detail::require(qubits >= 1, "random_mixed_state: qubits must be >= 1");
  const auto d = Eigen::Index{1} << qubits;
  Engine rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      g(i, j) = Complex(re, im);
    }
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix::trusted(std::move(rho));
}

/// Runs fn(i) for i in [0, count) on `workers` threads. Results must be
/// written by index; the first exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const auto n_threads = static_cast<std::size_t>(std::max(1, workers));
  if (n_threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, count); ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
  }
  if (error) std::rethrow_exception(error);
}

inline int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// --- sweeps ------------------------------------------------------------------

/// 0, 0.01, ..., 0.5
inline std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 50; ++i) g.push_back(i / 100.0);
  return g;
}

struct SweepConfig {
  SystemSpec spec;
  std::vector<double> gamma_grid = default_gamma_grid();
  int repetitions = 20;
  double t_final = 15.0;
  double dt = 0.01;
  EntropyKind entropy = EntropyKind::mutual;
  double entropy_floor = 1e-3;
  std::uint64_t seed = 1;
  NoiseSpec noise;
  JumpNormalization normalization = JumpNormalization::completeness;
  bool renormalize_trace = true;
  DualSide dual_side = DualSide::central;
  std::size_t memory_budget_bytes = std::size_t{1} << 30;

  [[nodiscard]] bool doubled() const { return entropy == EntropyKind::dual_renyi; }

  [[nodiscard]] EvolutionConfig evolution(double gamma) const {
    EvolutionConfig e;
    e.dt = dt;
    e.t_final = t_final;
    e.gamma = gamma;
    e.renormalize_trace = renormalize_trace;
    return e;
  }

  void validate() const {
    spec.validate();
    noise.validate();
    detail::require(!gamma_grid.empty(), "SweepConfig: empty gamma grid");
    for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
      detail::require(std::isfinite(gamma_grid[i]) && gamma_grid[i] >= 0.0, "SweepConfig: gamma values must be >= 0");
      if (i > 0) detail::require(gamma_grid[i] > gamma_grid[i - 1], "SweepConfig: gamma grid must be strictly ascending");
    }
    detail::require(repetitions >= 1, "SweepConfig: repetitions must be >= 1");
    detail::require(entropy == EntropyKind::mutual || entropy == EntropyKind::dual_renyi,
                    "SweepConfig: entropy must be mutual or dual-renyi");
    detail::require(entropy_floor > 0.0, "SweepConfig: entropy floor must be > 0");
    evolution(0.0).validate();
  }
};

/// Working-set estimate for one evolution: the (possibly doubled) density
/// matrix is dim^2 complex entries and the RK4 driver plus compiled jump
/// weights hold about twelve such arrays.
inline std::size_t estimate_memory_bytes(const SweepConfig& config, int workers = 1) {
  const int register_qubits = config.doubled() ? 2 * config.spec.qubits() : config.spec.qubits();
  const double dim = std::ldexp(1.0, register_qubits);
  const double per_worker = dim * dim * 16.0 * 12.0;
  return static_cast<std::size_t>(per_worker * std::max(1, workers));
}

inline void check_memory_budget(const SweepConfig& config, int workers) {
  const std::size_t need = estimate_memory_bytes(config, workers);
  if (need > config.memory_budget_bytes) {
    const int register_qubits = config.doubled() ? 2 * config.spec.qubits() : config.spec.qubits();
    throw ValidationError("memory budget exceeded: a " + std::to_string(register_qubits) +
                          "-qubit register (dimension " + std::to_string(1ULL << register_qubits) +
                          ") needs about " + std::to_string(need / (1024 * 1024)) + " MiB with " +
                          std::to_string(std::max(1, workers)) + " worker(s); budget is " +
                          std::to_string(config.memory_budget_bytes / (1024 * 1024)) + " MiB");
  }
}

struct SweepPoint {
  double gamma = 0.0;
  double mean_entropy = 0.0;
  double std_error = 0.0;
  int n_reps = 0;
  std::vector<std::string> errors;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::optional<double> critical_rate;
  bool partial = false;
  double wall_time_s = 0.0;
};

/// Smallest grid rate whose mean residual entropy is below `floor`.
inline std::optional<double> critical_rate(const SweepResult& result, double floor) {
  detail::require(!result.points.empty(), "critical_rate: empty result");
  for (const auto& p : result.points)
    if (p.n_reps > 0 && p.mean_entropy < floor) return p.gamma;
  return std::nullopt;
}

inline Estimate mean_and_error(std::span<const double> xs) {
  detail::require(!xs.empty(), "mean_and_error: no samples");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const auto n = static_cast<double>(xs.size());
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

/// Operators shared by every task of a sweep.
class SweepModel {
 public:
  SweepModel(const SweepConfig& config, const NoiseSpec& noise) : config_(config) {
    const SystemSpec& spec = config.spec;
    const DenseOperator h = build_hamiltonian(spec);
    const JumpOperatorSet jumps = build_projective_jumps(spec, config.normalization);
    const JumpOperatorSet noise_ops = build_noise_jumps(spec, noise);
    generator_ = config.doubled() ? LindbladGenerator::dual(build_dual_hamiltonian(h), jumps, 0.0, noise_ops)
                                  : LindbladGenerator(h, jumps, 0.0, noise_ops);
  }

  /// Residual entropy at t_final for repetition `rep` at rate `gamma`.
  [[nodiscard]] double residual_entropy(double gamma, int rep) const {
    const int n = config_.spec.qubits();
    const DensityMatrix rho0 = random_mixed_state(n, derive_seed(config_.seed, static_cast<std::uint64_t>(rep)));
    const LindbladGenerator gen = generator_->with_gamma(gamma);
    if (config_.doubled()) {
      const Trajectory tr = evolve(kron(rho0, rho0), gen, config_.evolution(gamma));
      return dual_renyi(tr.final_state(), config_.spec, config_.dual_side).value;
    }
    const Trajectory tr = evolve(rho0, gen, config_.evolution(gamma));
    return mutual_entropy(tr.final_state(), {0}).value;
  }

 private:
  SweepConfig config_;
  std::optional<LindbladGenerator> generator_;
};

namespace detail {

struct TaskOutcome {
  double value = 0.0;
  std::string error;
};

/// Evaluates every (rate, repetition) pair; failures are recorded per task.
inline std::vector<TaskOutcome> run_grid(const SweepModel& model, std::span<const double> gammas, int reps,
                                         int workers) {
  std::vector<TaskOutcome> out(gammas.size() * static_cast<std::size_t>(reps));
  parallel_for(out.size(), workers, [&](std::size_t i) {
    const std::size_t gi = i / static_cast<std::size_t>(reps);
    const int rep = static_cast<int>(i % static_cast<std::size_t>(reps));
    try {
      out[i].value = model.residual_entropy(gammas[gi], rep);
    } catch (const std::exception& e) {
      out[i].error = "rep " + std::to_string(rep) + ": " + e.what();
    }
  });
  return out;
}

}  // namespace detail

/// Residual entropy vs measurement rate, averaged over random mixed initial
/// states (repetition r uses the same initial state at every rate).
inline SweepResult residual_entropy_curve(const SweepConfig& config, int workers = 1) {
  config.validate();
  check_memory_budget(config, workers);
  const auto start = std::chrono::steady_clock::now();
  const SweepModel model(config, config.noise);
  const auto outcomes = detail::run_grid(model, config.gamma_grid, config.repetitions, workers);

  SweepResult result;
  for (std::size_t gi = 0; gi < config.gamma_grid.size(); ++gi) {
    SweepPoint point;
    point.gamma = config.gamma_grid[gi];
    std::vector<double> values;
    for (int r = 0; r < config.repetitions; ++r) {
      const auto& o = outcomes[gi * static_cast<std::size_t>(config.repetitions) + static_cast<std::size_t>(r)];
      if (o.error.empty())
        values.push_back(o.value);
      else
        point.errors.push_back(o.error);
    }
    point.n_reps = static_cast<int>(values.size());
    if (!values.empty()) {
      const Estimate e = mean_and_error(values);
      point.mean_entropy = e.value;
      point.std_error = e.std_error;
    }
    result.partial = result.partial || !point.errors.empty();
    result.points.push_back(std::move(point));
  }
  result.critical_rate = critical_rate(result, config.entropy_floor);
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// --- noise displacement ------------------------------------------------------

enum class NoiseChannel { dephasing, emission, absorption, gate_error };

/// Short names used in configs and CSV output: d, em, abs, er.
inline std::string channel_name(NoiseChannel c) {
  switch (c) {
    case NoiseChannel::dephasing: return "d";
    case NoiseChannel::emission: return "em";
    case NoiseChannel::absorption: return "abs";
    case NoiseChannel::gate_error: return "er";
  }
  return "?";
}

inline NoiseChannel parse_channel(const std::string& s) {
  if (s == "d") return NoiseChannel::dephasing;
  if (s == "em") return NoiseChannel::emission;
  if (s == "abs") return NoiseChannel::absorption;
  if (s == "er") return NoiseChannel::gate_error;
  throw ValidationError("unknown noise channel '" + s + "' (expected d, em, abs or er)");
}

/// `base` with `rate` added to the given channel.
inline NoiseSpec add_channel(NoiseSpec base, NoiseChannel channel, double rate) {
  switch (channel) {
    case NoiseChannel::dephasing: base.gamma_d += rate; break;
    case NoiseChannel::emission: base.gamma_em += rate; break;
    case NoiseChannel::absorption: base.gamma_abs += rate; break;
    case NoiseChannel::gate_error: base.gamma_er += rate; break;
  }
  return base;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two points");
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  detail::require(sxx > 0.0, "fit_line: all x values coincide");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

struct DisplacementPoint {
  double rate = 0.0;
  double one_minus_d = 0.0;
  double std_error = 0.0;
  int n_reps = 0;
};

struct DisplacementResult {
  NoiseChannel channel = NoiseChannel::dephasing;
  double reference_gamma = 0.05;
  double clean_entropy = 0.0;
  std::vector<DisplacementPoint> points;
  LinearFit fit;
};

/// 1 - D = S_D2 / S_D1 per noise rate, where S_D1 is the residual dual Renyi
/// entropy at `reference_gamma` without the channel and S_D2 with it. Both use
/// the same initial states, so a zero rate gives exactly 1.
inline DisplacementResult displacement_sweep(const SweepConfig& base_config, NoiseChannel channel,
                                             std::span<const double> rate_grid, double reference_gamma = 0.05,
                                             int workers = 1) {
  SweepConfig config = base_config;
  config.entropy = EntropyKind::dual_renyi;
  config.gamma_grid = {reference_gamma};
  config.validate();
  detail::require(!rate_grid.empty(), "displacement_sweep: empty rate grid");
  for (double r : rate_grid) detail::require(std::isfinite(r) && r >= 0.0, "displacement_sweep: rates must be >= 0");
  check_memory_budget(config, workers);

  const int reps = config.repetitions;
  const std::size_t n_rates = rate_grid.size();
  // Index 0 is the clean run; 1..n the requested rates.
  std::vector<std::vector<double>> values(n_rates + 1, std::vector<double>(static_cast<std::size_t>(reps)));
  std::vector<std::optional<SweepModel>> models(n_rates + 1);
  models[0].emplace(config, config.noise);
  for (std::size_t k = 0; k < n_rates; ++k) models[k + 1].emplace(config, add_channel(config.noise, channel, rate_grid[k]));

  parallel_for((n_rates + 1) * static_cast<std::size_t>(reps), workers, [&](std::size_t i) {
    const std::size_t k = i / static_cast<std::size_t>(reps);
    const int rep = static_cast<int>(i % static_cast<std::size_t>(reps));
    values[k][static_cast<std::size_t>(rep)] = models[k]->residual_entropy(reference_gamma, rep);
  });

  DisplacementResult result;
  result.channel = channel;
  result.reference_gamma = reference_gamma;
  const std::vector<double>& clean = values[0];
  const double m1 = mean_and_error(clean).value;
  result.clean_entropy = m1;
  if (!(m1 >= config.entropy_floor))
    throw ValidationError("displacement undefined: clean residual entropy " + std::to_string(m1) +
                          " at reference gamma " + std::to_string(reference_gamma) + " is below the floor");

  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < n_rates; ++k) {
    const std::vector<double>& noisy = values[k + 1];
    const double m2 = mean_and_error(noisy).value;
    const double ratio = m2 / m1;
    // Delta method for a ratio of paired means.
    std::vector<double> resid(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r)
      resid[static_cast<std::size_t>(r)] = noisy[static_cast<std::size_t>(r)] - ratio * clean[static_cast<std::size_t>(r)];
    const double se = mean_and_error(resid).std_error / m1;
    result.points.push_back({rate_grid[k], ratio, se, reps});
    xs.push_back(rate_grid[k]);
    ys.push_back(ratio);
  }
  if (xs.size() >= 2) result.fit = fit_line(xs, ys);
  return result;
}

}  // namespace mipt
