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

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mipt/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Measurement-induced phase transition in the central spin model"};
  app.set_version_flag("--version", std::string(mipt::kVersion));
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  int workers = 0;

  auto* sweep = app.add_subcommand("sweep", "Residual entropy vs measurement rate (curve.csv, summary.json)");
  sweep->add_option("--config", config, "Config file (JSON) or a previous manifest.json")->required();
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--workers", workers, "Worker threads (default: $MIPT_WORKERS or all cores)");

  auto* errors = app.add_subcommand("errors", "Noise displacement 1-D vs rate (displacement.csv, summary.json)");
  errors->add_option("--config", config, "Config file (JSON) or a previous manifest.json")->required();
  errors->add_option("--out", out_dir, "Output directory")->required();
  errors->add_option("--workers", workers, "Worker threads (default: $MIPT_WORKERS or all cores)");

  mipt::VerifyOptions verify_opts;
  std::string normalization = "completeness";
  bool no_renormalize = false;
  auto* verify = app.add_subcommand("verify", "Run the fast invariant suite");
  verify->add_option("--dt", verify_opts.dt, "Integrator step")->capture_default_str();
  verify->add_option("--prefactor", normalization, "Projective jump prefactor: completeness | paper")
      ->check(CLI::IsMember({"completeness", "paper"}))
      ->capture_default_str();
  verify->add_flag("--no-renormalize", no_renormalize, "Disable per-step trace renormalization");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mipt::cli::kExitValidation;
  }

  if (*sweep) return mipt::cli::cmd_sweep(config, out_dir, workers, std::cout, std::cerr);
  if (*errors) return mipt::cli::cmd_errors(config, out_dir, workers, std::cout, std::cerr);
  verify_opts.normalization =
      normalization == "paper" ? mipt::JumpNormalization::paper : mipt::JumpNormalization::completeness;
  verify_opts.renormalize_trace = !no_renormalize;
  return mipt::cli::cmd_verify(verify_opts, std::cout, std::cerr);
}
