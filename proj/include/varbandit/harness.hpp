#ifndef VARBANDIT_HARNESS_HPP
#define VARBANDIT_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "varbandit/algorithms.hpp"
#include "varbandit/environments.hpp"
#include "varbandit/types.hpp"

namespace varbandit {

// Configuration problem attributable to a specific field. CLI maps this to
// exit code 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Algorithm { Vase, Valee, BaselineEe, BaselineSe };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

// Parsed single-run configuration. See README for the JSON schema.
struct RunConfig {
  Algorithm algorithm = Algorithm::Vase;
  std::int64_t T = 0;
  double delta = 0.05;
  std::uint64_t seed = 0;
  bool known_covariance = true;
  std::optional<double> tau;
  std::optional<std::int64_t> M;  // baseline_ee allocation per arm
  double gamma_scale = 1.0;
  nlohmann::json environment;     // validated lazily when the env is built
  nlohmann::json raw;             // canonical source, used for hashing
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// FNV-1a over the canonical (sorted-key) serialization.
std::uint64_t config_hash(const nlohmann::json& j);

// Builds the environment described by config.environment. Instance-level
// randomness (generated actions, lower-bound sign patterns) comes from the
// generator seeds inside the spec; reward noise comes from `noise`.
Env build_env(const RunConfig& config, RngStream noise);

struct ExperimentOutput {
  RunResult result;
  Diagnostics diagnostics;
};

// Runs the configured algorithm against the configured environment with the
// stream derived from (config.seed, 0).
ExperimentOutput run_experiment(const RunConfig& config);

// 17-significant-digit shortest-round-trip formatting used in all CSV output.
std::string format_double(double v);

// Writes the trace as CSV: header t,action_id,reward,gap,cum_regret,phase.
// Continuous actions are encoded in the action_id column as
// "v:<c1>|<c2>|..."; rows end with \n.
void write_trace_csv(std::ostream& os, const RunTrace& trace);

// Least-squares slope of log(regret) against log(T). Points with
// nonpositive regret are dropped; returns nullopt with fewer than 4 points
// remaining.
std::optional<double> fit_loglog_slope(const std::vector<std::pair<double, double>>& t_regret);

// Sweep over instance grids. Cells are the cross product of the list fields;
// every (cell, seed) run derives its stream from (master_seed, run_index)
// with a deterministic run_index, so reruns are byte-identical.
struct SweepSpec {
  std::vector<Algorithm> algorithms;
  std::vector<int> d;
  std::vector<int> K;          // finite cells
  std::vector<std::int64_t> T;
  std::vector<double> sigma_sq;
  std::vector<double> p;       // ball cells
  int seeds_per_cell = 1;
  std::uint64_t master_seed = 0;
  std::uint64_t instance_seed = 0;
  double delta = 0.05;
  double theta_scale = 0.5;
  std::string env_style = "finite_random";  // finite_random | ball_axis | ple2
  int jobs = 0;                // 0 = hardware concurrency
  bool write_traces = false;
  nlohmann::json raw;
};

SweepSpec parse_sweep_spec(const nlohmann::json& j);
SweepSpec load_sweep_spec(const std::filesystem::path& path);

struct ReportRow {
  std::string algorithm;
  std::string env_style;
  int d = 0;
  int K = 0;
  double p = 2.0;
  double sigma_sq = 0.0;
  std::int64_t T = 0;
  int seeds = 0;
  double mean_regret = 0.0;
  double std_regret = 0.0;
  double mean_steps = 0.0;
  double exploit_rate = 0.0;
  Diagnostics diagnostics;
  std::optional<double> slope;  // shared across the row's T-series
  std::string status = "ok";    // "ok" or "failed: <reason>"
};

struct SweepResult {
  std::vector<ReportRow> rows;
  nlohmann::json summary;
};

// Runs the sweep and writes report.csv, summary.json and (optionally)
// per-run trace CSVs under out_dir. A failing cell is recorded as failed in
// both outputs without disturbing the others.
SweepResult run_sweep(const SweepSpec& spec, const std::filesystem::path& out_dir);

void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows);

}  // namespace varbandit

#endif  // VARBANDIT_HARNESS_HPP
