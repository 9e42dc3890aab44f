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

// Config files, run manifests and the `sweep` / `errors` / `verify` commands.
// Link against OpenSSL libcrypto (config hashing).

#include <openssl/evp.h>

#include "json.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mipt/errors.hpp"
#include "mipt/experiment.hpp"
#include "mipt/verify.hpp"
#include "mipt/version.hpp"

namespace mipt::cli {

using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

inline constexpr const char* kWorkersEnv = "MIPT_WORKERS";

/// Settings of the `errors` command.
struct DisplacementSettings {
  std::vector<NoiseChannel> channels{NoiseChannel::emission, NoiseChannel::dephasing, NoiseChannel::gate_error};
  std::vector<double> rates{0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
  double reference_gamma = 0.05;
};

struct RunConfig {
  SweepConfig sweep;
  DisplacementSettings displacement;
};

// --- formatting --------------------------------------------------------------

/// Shortest round-trip decimal form; locale independent.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw RuntimeFailure("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- config parsing ----------------------------------------------------------

namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  mipt::detail::require(obj.is_object(), where + ": expected an object");
  for (const auto& [key, value] : obj.items())
    mipt::detail::require(allowed.count(key) > 0, where + ": unknown key '" + key + "'");
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

inline double round12(double x) { return std::round(x * 1e12) / 1e12; }

inline std::vector<double> parse_grid(const json& g, const char* what) {
  std::vector<double> out;
  if (g.is_array()) {
    for (const auto& v : g) {
      mipt::detail::require(v.is_number(), std::string(what) + ": entries must be numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }
  check_keys(g, {"start", "stop", "step"}, what);
  const double start = get_or(g, "start", 0.0);
  const double stop = get_or(g, "stop", 0.0);
  const double step = get_or(g, "step", 0.0);
  mipt::detail::require(step > 0.0 && stop >= start, std::string(what) + ": need step > 0 and stop >= start");
  const long n = std::lround(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(round12(start + static_cast<double>(i) * step));
  return out;
}

inline EntropyKind parse_entropy(const std::string& s) {
  if (s == "mutual") return EntropyKind::mutual;
  if (s == "dual-renyi") return EntropyKind::dual_renyi;
  throw ValidationError("entropy must be 'mutual' or 'dual-renyi', got '" + s + "'");
}

inline std::string entropy_name(EntropyKind k) { return k == EntropyKind::dual_renyi ? "dual-renyi" : "mutual"; }

}  // namespace detail

/// Parses a config document, or the `resolved_config` of a run manifest.
inline RunConfig parse_config(const json& doc_in) {
  const json& doc = doc_in.contains("resolved_config") ? doc_in.at("resolved_config") : doc_in;
  detail::check_keys(doc,
                     {"system", "gamma_grid", "repetitions", "t_final", "dt", "entropy", "entropy_floor", "seed",
                      "noise", "jump_normalization", "renormalize_trace", "dual_side", "memory_budget_mb", "errors"},
                     "config");
  RunConfig rc;
  SweepConfig& c = rc.sweep;

  if (doc.contains("system")) {
    const json& s = doc.at("system");
    detail::check_keys(s, {"L", "coupling", "eps_central", "eps_bath", "rotating_frame", "measured"}, "system");
    c.spec.bath_size = detail::get_or(s, "L", c.spec.bath_size);
    c.spec.coupling = detail::get_or(s, "coupling", c.spec.coupling);
    c.spec.eps_central = detail::get_or(s, "eps_central", c.spec.eps_central);
    c.spec.eps_bath = detail::get_or(s, "eps_bath", c.spec.eps_bath);
    c.spec.rotating_frame = detail::get_or(s, "rotating_frame", c.spec.rotating_frame);
    if (s.contains("measured") && !s.at("measured").is_null())
      c.spec.measured = detail::get_or(s, "measured", std::vector<int>{});
  }
  if (doc.contains("gamma_grid")) c.gamma_grid = detail::parse_grid(doc.at("gamma_grid"), "gamma_grid");
  c.repetitions = detail::get_or(doc, "repetitions", c.repetitions);
  c.t_final = detail::get_or(doc, "t_final", c.t_final);
  c.dt = detail::get_or(doc, "dt", c.dt);
  c.entropy = detail::parse_entropy(detail::get_or(doc, "entropy", std::string("mutual")));
  c.entropy_floor = detail::get_or(doc, "entropy_floor", c.entropy_floor);
  c.seed = detail::get_or(doc, "seed", c.seed);
  if (doc.contains("noise")) {
    const json& n = doc.at("noise");
    detail::check_keys(n, {"gamma_d", "gamma_em", "gamma_abs", "gamma_er", "gate_error_axis"}, "noise");
    c.noise.gamma_d = detail::get_or(n, "gamma_d", 0.0);
    c.noise.gamma_em = detail::get_or(n, "gamma_em", 0.0);
    c.noise.gamma_abs = detail::get_or(n, "gamma_abs", 0.0);
    c.noise.gamma_er = detail::get_or(n, "gamma_er", 0.0);
    const std::string axis = detail::get_or(n, "gate_error_axis", std::string("x"));
    mipt::detail::require(axis == "x" || axis == "y", "noise.gate_error_axis must be 'x' or 'y'");
    c.noise.gate_error_axis = axis == "x" ? NoiseSpec::Axis::x : NoiseSpec::Axis::y;
  }
  const std::string norm = detail::get_or(doc, "jump_normalization", std::string("completeness"));
  mipt::detail::require(norm == "completeness" || norm == "paper",
                        "jump_normalization must be 'completeness' or 'paper'");
  c.normalization = norm == "paper" ? JumpNormalization::paper : JumpNormalization::completeness;
  c.renormalize_trace = detail::get_or(doc, "renormalize_trace", c.renormalize_trace);
  const std::string side = detail::get_or(doc, "dual_side", std::string("central"));
  mipt::detail::require(side == "central" || side == "bath", "dual_side must be 'central' or 'bath'");
  c.dual_side = side == "bath" ? DualSide::bath : DualSide::central;
  const double budget_mb = detail::get_or(doc, "memory_budget_mb", 1024.0);
  mipt::detail::require(budget_mb > 0, "memory_budget_mb must be > 0");
  c.memory_budget_bytes = static_cast<std::size_t>(budget_mb * 1024.0 * 1024.0);

  if (doc.contains("errors")) {
    const json& e = doc.at("errors");
    detail::check_keys(e, {"channels", "rates", "reference_gamma"}, "errors");
    if (e.contains("channels")) {
      rc.displacement.channels.clear();
      for (const auto& ch : detail::get_or(e, "channels", std::vector<std::string>{}))
        rc.displacement.channels.push_back(parse_channel(ch));
      mipt::detail::require(!rc.displacement.channels.empty(), "errors.channels is empty");
    }
    if (e.contains("rates")) rc.displacement.rates = detail::parse_grid(e.at("rates"), "errors.rates");
    rc.displacement.reference_gamma = detail::get_or(e, "reference_gamma", rc.displacement.reference_gamma);
  }
  c.validate();
  return rc;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

/// Fully defaulted config, sufficient to reproduce a run.
inline json resolved_json(const RunConfig& rc) {
  const SweepConfig& c = rc.sweep;
  json sys = {{"L", c.spec.bath_size},
              {"coupling", c.spec.coupling},
              {"eps_central", c.spec.eps_central},
              {"eps_bath", c.spec.eps_bath},
              {"rotating_frame", c.spec.rotating_frame},
              {"measured", c.spec.measured_qubits()}};
  json noise = {{"gamma_d", c.noise.gamma_d},
                {"gamma_em", c.noise.gamma_em},
                {"gamma_abs", c.noise.gamma_abs},
                {"gamma_er", c.noise.gamma_er},
                {"gate_error_axis", c.noise.gate_error_axis == NoiseSpec::Axis::x ? "x" : "y"}};
  std::vector<std::string> channels;
  for (auto ch : rc.displacement.channels) channels.push_back(channel_name(ch));
  json errors = {{"channels", channels},
                 {"rates", rc.displacement.rates},
                 {"reference_gamma", rc.displacement.reference_gamma}};
  return {{"system", sys},
          {"gamma_grid", c.gamma_grid},
          {"repetitions", c.repetitions},
          {"t_final", c.t_final},
          {"dt", c.dt},
          {"entropy", detail::entropy_name(c.entropy)},
          {"entropy_floor", c.entropy_floor},
          {"seed", c.seed},
          {"noise", noise},
          {"jump_normalization", c.normalization == JumpNormalization::paper ? "paper" : "completeness"},
          {"renormalize_trace", c.renormalize_trace},
          {"dual_side", c.dual_side == DualSide::bath ? "bath" : "central"},
          {"memory_budget_mb", static_cast<double>(c.memory_budget_bytes) / (1024.0 * 1024.0)},
          {"errors", errors}};
}

inline std::string config_hash(const RunConfig& rc) { return sha256_hex(resolved_json(rc).dump()); }

// --- output ------------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string output_dir;
  std::string timestamp;
  std::string config_hash;
  std::uint64_t seed = 0;
  int workers = 1;
  json resolved_config;

  [[nodiscard]] json to_json() const {
    return {{"tool", "mipt"},
            {"version", kVersion},
            {"command", command},
            {"config_path", config_path},
            {"output_dir", output_dir},
            {"timestamp", timestamp},
            {"config_hash", config_hash},
            {"seed", seed},
            {"workers", workers},
            {"resolved_config", resolved_config}};
  }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw RuntimeFailure("write failed for '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

inline std::string curve_csv(const SweepResult& r, const std::string& hash) {
  std::string s = "# mipt sweep config_hash=" + hash + "\n";
  s += "gamma,mean_entropy,stderr,n_reps\n";
  for (const auto& p : r.points)
    s += format_double(p.gamma) + "," + format_double(p.mean_entropy) + "," + format_double(p.std_error) + "," +
         std::to_string(p.n_reps) + "\n";
  return s;
}

inline std::string displacement_csv(const std::vector<DisplacementResult>& results, const std::string& hash) {
  std::string s = "# mipt errors config_hash=" + hash + "\n";
  s += "channel,rate,one_minus_D,stderr\n";
  for (const auto& r : results)
    for (const auto& p : r.points)
      s += channel_name(r.channel) + "," + format_double(p.rate) + "," + format_double(p.one_minus_d) + "," +
           format_double(p.std_error) + "\n";
  return s;
}

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv(kWorkersEnv)) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return default_workers();
}

namespace detail {

inline RunManifest start_run(const std::string& command, const std::filesystem::path& config_path,
                             const std::filesystem::path& out_dir, const RunConfig& rc, int workers) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw RuntimeFailure("cannot create output directory '" + out_dir.string() + "': " + ec.message());
  RunManifest m;
  m.command = command;
  m.config_path = config_path.string();
  m.output_dir = out_dir.string();
  m.timestamp = utc_timestamp();
  m.config_hash = config_hash(rc);
  m.seed = rc.sweep.seed;
  m.workers = workers;
  m.resolved_config = resolved_json(rc);
  write_json(out_dir / "manifest.json", m.to_json());
  return m;
}

inline void finish_run(const std::filesystem::path& out_dir, const RunManifest& m, const std::string& status,
                       double wall_time) {
  json doc = m.to_json();
  doc["status"] = status;
  doc["wall_time_s"] = wall_time;
  write_json(out_dir / "manifest.json", doc);
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "mipt: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "mipt: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace detail

/// `mipt sweep`: curve.csv, summary.json, manifest.json.
inline int cmd_sweep(const std::filesystem::path& config_path, const std::filesystem::path& out_dir, int workers,
                     std::ostream& log, std::ostream& err) {
  return detail::guarded(err, [&] {
    const RunConfig rc = load_config(config_path);
    const int w = resolve_workers(workers);
    check_memory_budget(rc.sweep, w);
    const RunManifest m = detail::start_run("sweep", config_path, out_dir, rc, w);
    const auto start = std::chrono::steady_clock::now();
    const SweepResult r = residual_entropy_curve(rc.sweep, w);

    json failures = json::array();
    for (const auto& p : r.points)
      if (!p.errors.empty()) failures.push_back({{"gamma", p.gamma}, {"errors", p.errors}});
    json summary = {{"config_hash", m.config_hash},
                    {"critical_rate", r.critical_rate ? json(*r.critical_rate) : json(nullptr)},
                    {"entropy", detail::entropy_name(rc.sweep.entropy)},
                    {"entropy_floor", rc.sweep.entropy_floor},
                    {"partial", r.partial},
                    {"failed_points", failures},
                    {"tool_version", kVersion},
                    {"config", m.resolved_config}};
    write_text(out_dir / "curve.csv", curve_csv(r, m.config_hash));
    write_json(out_dir / "summary.json", summary);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    detail::finish_run(out_dir, m, r.partial ? "partial" : "complete", wall);

    log << "sweep: " << r.points.size() << " rates x " << rc.sweep.repetitions << " repetitions, critical rate "
        << (r.critical_rate ? format_double(*r.critical_rate) : std::string("none")) << ", " << std::fixed
        << std::setprecision(1) << wall << " s\n";
    if (r.partial) {
      err << "mipt: some grid points failed; see summary.json (partial: true)\n";
      return kExitRuntime;
    }
    return kExitOk;
  });
}

/// `mipt errors`: displacement.csv, summary.json, manifest.json.
inline int cmd_errors(const std::filesystem::path& config_path, const std::filesystem::path& out_dir, int workers,
                      std::ostream& log, std::ostream& err) {
  return detail::guarded(err, [&] {
    RunConfig rc = load_config(config_path);
    rc.sweep.entropy = EntropyKind::dual_renyi;
    const int w = resolve_workers(workers);
    check_memory_budget(rc.sweep, w);
    const RunManifest m = detail::start_run("errors", config_path, out_dir, rc, w);
    const auto start = std::chrono::steady_clock::now();

    std::vector<DisplacementResult> results;
    json fits = json::object();
    json failures = json::array();
    for (NoiseChannel ch : rc.displacement.channels) {
      try {
        results.push_back(
            displacement_sweep(rc.sweep, ch, rc.displacement.rates, rc.displacement.reference_gamma, w));
      } catch (const RuntimeFailure& e) {
        failures.push_back({{"channel", channel_name(ch)}, {"error", e.what()}});
        continue;
      }
      const auto& r = results.back();
      fits[channel_name(ch)] = {{"slope", r.fit.slope},
                                {"intercept", r.fit.intercept},
                                {"r_squared", r.fit.r_squared},
                                {"clean_entropy", r.clean_entropy}};
    }
    json summary = {{"config_hash", m.config_hash},
                    {"reference_gamma", rc.displacement.reference_gamma},
                    {"fits", fits},
                    {"partial", !failures.empty()},
                    {"failed_channels", failures},
                    {"tool_version", kVersion},
                    {"config", m.resolved_config}};
    write_text(out_dir / "displacement.csv", displacement_csv(results, m.config_hash));
    write_json(out_dir / "summary.json", summary);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    detail::finish_run(out_dir, m, failures.empty() ? "complete" : "partial", wall);
    for (const auto& r : results)
      log << "errors: channel " << channel_name(r.channel) << " slope " << format_double(r.fit.slope) << " r^2 "
          << format_double(r.fit.r_squared) << '\n';
    if (!failures.empty()) {
      err << "mipt: some channels failed; see summary.json (partial: true)\n";
      return kExitRuntime;
    }
    return kExitOk;
  });
}

/// `mipt verify`: invariant suite; exit 0 iff every check passes.
inline int cmd_verify(const VerifyOptions& options, std::ostream& log, std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto start = std::chrono::steady_clock::now();
    const bool ok = print_verify_table(run_verify_checks(options), log);
    log << "runtime " << std::fixed << std::setprecision(1)
        << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s\n";
    return ok ? kExitOk : kExitRuntime;
  });
}

}  // namespace mipt::cli
