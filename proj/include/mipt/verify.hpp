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

// Fast invariant suite behind `mipt verify`.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mipt/dynamics.hpp"
#include "mipt/entropy.hpp"
#include "mipt/experiment.hpp"
#include "mipt/qsys.hpp"

namespace mipt {

/// Overrides used to exercise the suite against deliberately broken settings.
struct VerifyOptions {
  double dt = 0.01;
  double t_final = 15.0;
  JumpNormalization normalization = JumpNormalization::completeness;
  bool renormalize_trace = true;
  std::uint64_t seed = 7;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string sci(double x) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << x;
  return os.str();
}

inline CheckResult run_check(const std::string& name, const std::function<std::string()>& body,
                             const std::function<bool()>& ok) {
  CheckResult r{name, false, ""};
  try {
    r.detail = body();
    r.passed = ok();
  } catch (const std::exception& e) {
    r.detail = std::string("error: ") + e.what();
    r.passed = false;
  }
  return r;
}

/// exp(-iHt) rho exp(iHt) through the eigendecomposition of H.
inline Matrix exact_unitary_evolution(const DenseOperator& h, const Matrix& rho, double t) {
  const Matrix u = step_unitary(h, t);
  return u * rho * u.adjoint();
}

}  // namespace detail

inline std::vector<CheckResult> run_verify_checks(const VerifyOptions& opt) {
  std::vector<CheckResult> results;

  // Trace, Hermiticity and positivity along single-copy evolutions.
  for (int bath : {1, 2, 3}) {
    for (double gamma : {0.0, 0.1, 0.3}) {
      SystemSpec spec;
      spec.bath_size = bath;
      EvolutionConfig cfg;
      cfg.dt = opt.dt;
      cfg.t_final = opt.t_final;
      cfg.gamma = gamma;
      cfg.renormalize_trace = opt.renormalize_trace;
      cfg.record_stride = std::max(1L, cfg.steps() / 15);
      EvolutionStats stats;
      const std::string tag = "L=" + std::to_string(bath) + " gamma=" + std::to_string(gamma).substr(0, 3);
      std::string evolve_error;
      try {
        const LindbladGenerator gen(build_hamiltonian(spec), build_projective_jumps(spec, opt.normalization), gamma);
        stats = evolve(random_mixed_state(spec.qubits(), opt.seed + static_cast<std::uint64_t>(bath)), gen, cfg).stats;
      } catch (const std::exception& e) {
        evolve_error = std::string("error: ") + e.what();
      }
      auto add = [&](const std::string& what, bool ok, const std::string& detail) {
        results.push_back({what + " " + tag, evolve_error.empty() && ok, evolve_error.empty() ? detail : evolve_error});
      };
      add("trace", stats.max_trace_error <= 1e-8, "max |Tr rho - 1| = " + detail::sci(stats.max_trace_error));
      add("hermiticity", stats.max_hermiticity_error <= 1e-9,
          "max |rho - rho^dag| = " + detail::sci(stats.max_hermiticity_error));
      add("positivity", stats.min_eigenvalue >= -1e-6, "min eigenvalue = " + detail::sci(stats.min_eigenvalue));
    }
  }

  {
    double drift = 0;
    results.push_back(detail::run_check(
        "jump completeness L=3",
        [&] {
          SystemSpec spec;
          spec.bath_size = 3;
          const JumpOperatorSet jumps = build_projective_jumps(spec, opt.normalization);
          const double expect = opt.normalization == JumpNormalization::completeness
                                    ? 1.0
                                    : static_cast<double>(spec.qubits()) / std::ldexp(1.0, spec.qubits());
          const Matrix s = jumps.completeness_sum();
          drift = (s - expect * Matrix::Identity(s.rows(), s.cols())).cwiseAbs().maxCoeff();
          return "max |sum L^dag L - c I| = " + detail::sci(drift);
        },
        [&] { return drift <= 1e-12; }));
  }

  {
    double worst = 0;
    results.push_back(detail::run_check(
        "swap trick L<=3",
        [&] {
          for (int bath = 1; bath <= 3; ++bath) {
            SystemSpec spec;
            spec.bath_size = bath;
            for (std::uint64_t k = 0; k < 10; ++k) {
              const DensityMatrix rho = random_mixed_state(spec.qubits(), derive_seed(opt.seed, 100 + k));
              const double direct = -std::log2(purity(partial_trace(rho, {0})));
              const double via_swap = dual_renyi(kron(rho, rho), spec).value;
              worst = std::max(worst, std::abs(direct - via_swap));
            }
          }
          return "max deviation = " + detail::sci(worst);
        },
        [&] { return worst <= 1e-9; }));
  }

  {
    double err = 0;
    results.push_back(detail::run_check(
        "closed-system oracle L=2",
        [&] {
          SystemSpec spec;
          spec.bath_size = 2;
          const DenseOperator h = build_hamiltonian(spec);
          EvolutionConfig cfg;
          cfg.dt = opt.dt;
          cfg.t_final = opt.t_final;
          cfg.renormalize_trace = opt.renormalize_trace;
          const DensityMatrix rho0 = random_mixed_state(spec.qubits(), opt.seed);
          const Trajectory tr = evolve(rho0, LindbladGenerator(h, build_projective_jumps(spec, opt.normalization), 0.0), cfg);
          const Matrix exact = detail::exact_unitary_evolution(h, rho0.matrix(), cfg.t_final);
          err = (tr.final_state().matrix() - exact).cwiseAbs().maxCoeff();
          return "max entry error at t=" + std::to_string(cfg.t_final).substr(0, 4) + ": " + detail::sci(err);
        },
        [&] { return err <= 1e-6; }));
  }

  {
    double e_coarse = 0, e_fine = 0;
    results.push_back(detail::run_check(
        "kraus/lindblad consistency L=1",
        [&] {
          SystemSpec spec;
          spec.bath_size = 1;
          const DenseOperator h = build_hamiltonian(spec);
          const JumpOperatorSet jumps = build_projective_jumps(spec, opt.normalization);
          const double gamma = 0.2;
          const DensityMatrix rho = random_mixed_state(spec.qubits(), opt.seed);
          const Matrix rhs = lindblad_rhs(rho, h, jumps, gamma).matrix();
          auto err = [&](double dt) {
            const Matrix fd = (kraus_step(rho, h, jumps, gamma, dt).matrix() - rho.matrix()) / dt;
            return (fd - rhs).cwiseAbs().maxCoeff();
          };
          e_coarse = err(1e-3);
          e_fine = err(1e-4);
          return "error dt=1e-3: " + detail::sci(e_coarse) + ", dt=1e-4: " + detail::sci(e_fine);
        },
        [&] { return e_fine < 1e-3 && e_coarse / e_fine > 5.0; }));
  }

  {
    // Doubled-space evolution: trace of the carried state, Hermiticity, positivity.
    SystemSpec spec;
    spec.bath_size = 1;
    EvolutionConfig cfg;
    cfg.dt = opt.dt;
    cfg.t_final = std::round(std::min(opt.t_final, 5.0) / cfg.dt) * cfg.dt;
    cfg.gamma = 0.2;
    cfg.renormalize_trace = opt.renormalize_trace;
    cfg.record_stride = std::max(1L, cfg.steps() / 5);
    EvolutionStats stats;
    std::string evolve_error;
    try {
      const DensityMatrix rho0 = random_mixed_state(spec.qubits(), opt.seed);
      const auto gen = LindbladGenerator::dual(build_dual_hamiltonian(build_hamiltonian(spec)),
                                               build_projective_jumps(spec, opt.normalization), cfg.gamma);
      stats = evolve(kron(rho0, rho0), gen, cfg).stats;
    } catch (const std::exception& e) {
      evolve_error = std::string("error: ") + e.what();
    }
    auto add = [&](const std::string& what, bool ok, const std::string& detail) {
      results.push_back({what + " dual L=1 gamma=0.2", evolve_error.empty() && ok,
                         evolve_error.empty() ? detail : evolve_error});
    };
    add("trace", stats.max_trace_error <= 1e-8, "max |Tr rho_D - 1| = " + detail::sci(stats.max_trace_error));
    add("hermiticity", stats.max_hermiticity_error <= 1e-9,
        "max |rho_D - rho_D^dag| = " + detail::sci(stats.max_hermiticity_error));
    add("positivity", stats.min_eigenvalue >= -1e-6, "min eigenvalue = " + detail::sci(stats.min_eigenvalue));
  }

  return results;
}

/// Prints one line per check; returns true iff all pass.
inline bool print_verify_table(const std::vector<CheckResult>& results, std::ostream& os) {
  std::size_t width = 0;
  for (const auto& r : results) width = std::max(width, r.name.size());
  bool all = true;
  for (const auto& r : results) {
    os << std::left << std::setw(static_cast<int>(width) + 2) << r.name << (r.passed ? "PASS  " : "FAIL  ") << r.detail
       << '\n';
    all = all && r.passed;
  }
  os << (all ? "all checks passed" : "some checks FAILED") << '\n';
  return all;
}

}  // namespace mipt
