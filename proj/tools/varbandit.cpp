// Command-line front end: single runs, grid sweeps, and report printing.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "varbandit/harness.hpp"

namespace {

using varbandit::ConfigError;

// VARBANDIT_SEED overrides the configured seed (run) or master seed (sweep).
std::optional<std::uint64_t> env_seed_override() {
  const char* raw = std::getenv("VARBANDIT_SEED");
  if (raw == nullptr || raw[0] == '\0') return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (errno != 0 || end == raw || *end != '\0') {
    throw ConfigError("VARBANDIT_SEED", "expected a nonnegative integer");
  }
  return static_cast<std::uint64_t>(v);
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  varbandit::RunConfig config = varbandit::load_run_config(config_path);
  if (auto seed = env_seed_override()) config.seed = *seed;

  varbandit::ExperimentOutput output = varbandit::run_experiment(config);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path trace_path = std::filesystem::path(out_dir) / "trace.csv";
  {
    std::ofstream out(trace_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output path " + trace_path.string());
    varbandit::write_trace_csv(out, output.result.trace);
  }
  std::fprintf(stderr, "%s T=%lld seed=%llu final_regret=%s sigma_q_sq=%s\n",
               output.result.trace.algorithm().c_str(),
               static_cast<long long>(output.result.trace.size()),
               static_cast<unsigned long long>(output.result.trace.seed()),
               varbandit::format_double(output.result.trace.final_regret()).c_str(),
               varbandit::format_double(output.diagnostics.sigma_q_sq).c_str());
  return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out_dir, bool traces, int jobs) {
  varbandit::SweepSpec spec = varbandit::load_sweep_spec(spec_path);
  if (auto seed = env_seed_override()) spec.master_seed = *seed;
  if (traces) spec.write_traces = true;
  if (jobs > 0) spec.jobs = jobs;

  varbandit::SweepResult result = varbandit::run_sweep(spec, out_dir);
  const auto& s = result.summary;
  const auto n_cells = s["n_cells"].get<std::size_t>();
  const auto failed = s["failed_cells"].get<std::size_t>();
  std::fprintf(stderr, "sweep: %zu cells, %zu runs, %zu failed -> %s\n", n_cells,
               s["n_runs"].get<std::size_t>(), failed, out_dir.c_str());
  return failed < n_cells ? 0 : 3;
}

int cmd_report(const std::string& in_dir) {
  std::ifstream in(in_dir + "/summary.json");
  if (!in) throw std::runtime_error("cannot open " + in_dir + "/summary.json");
  nlohmann::json s = nlohmann::json::parse(in);

  std::printf("cells: %zu  runs: %zu  failed: %zu  status: %s\n\n",
              s["n_cells"].get<std::size_t>(), s["n_runs"].get<std::size_t>(),
              s["failed_cells"].get<std::size_t>(), s["status"].get<std::string>().c_str());

  std::printf("%-12s %-13s %3s %3s %5s %9s %9s %12s %9s %s\n", "algorithm", "env", "d", "K", "p",
              "sigma_sq", "T", "mean_regret", "slope", "status");
  for (const auto& c : s["cells"]) {
    std::printf("%-12s %-13s %3d %3d %5.3g %9.3g %9lld %12.5g %9s %s\n",
                c["algorithm"].get<std::string>().c_str(),
                c["env_style"].get<std::string>().c_str(), c["d"].get<int>(), c["K"].get<int>(),
                c["p"].get<double>(), c["sigma_sq"].get<double>(),
                static_cast<long long>(c["T"].get<std::int64_t>()),
                c["mean_regret"].get<double>(),
                c["slope"].is_null() ? "-" : varbandit::format_double(c["slope"].get<double>()).substr(0, 8).c_str(),
                c["status"].get<std::string>().c_str());
  }

  if (!s["series"].empty()) {
    std::printf("\nscaling verdicts:\n");
    for (const auto& e : s["series"]) {
      std::string verdict = "n/a";
      if (!e["within_band"].is_null()) {
        verdict = e["within_band"].get<bool>() ? "OK" : "OUT OF BAND";
      }
      std::printf("  %s d=%d sigma_sq=%g: slope=%s (%zu points) -> %s\n",
                  e["algorithm"].get<std::string>().c_str(), e["d"].get<int>(),
                  e["sigma_sq"].get<double>(),
                  e["slope"].is_null() ? "-" : varbandit::format_double(e["slope"].get<double>()).c_str(),
                  e["points"].get<std::size_t>(), verdict.c_str());
    }
  }

  if (!s["sigma_ratio_checks"].empty()) {
    std::printf("\ncross-noise ratio checks (expect regret ~ sqrt(sigma_sq)):\n");
    for (const auto& e : s["sigma_ratio_checks"]) {
      std::printf("  %s d=%d T=%lld sigma %g vs %g: ratio=%.4g predicted=%.4g -> %s\n",
                  e["algorithm"].get<std::string>().c_str(), e["d"].get<int>(),
                  static_cast<long long>(e["T"].get<std::int64_t>()),
                  e["sigma_sq_low"].get<double>(), e["sigma_sq_high"].get<double>(),
                  e["regret_ratio"].get<double>(), e["predicted_ratio"].get<double>(),
                  e["within_factor_3"].get<bool>() ? "OK" : "OUT OF BAND");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic linear bandits with parameter noise: simulator and sweep harness"};
  app.require_subcommand(1);

  std::string run_config, run_out = ".";
  CLI::App* run = app.add_subcommand("run", "Run one experiment and write trace.csv");
  run->add_option("--config", run_config, "JSON run configuration file")->required();
  run->add_option("--out", run_out, "Directory for trace.csv");

  std::string sweep_spec, sweep_out = "sweep_out";
  bool sweep_traces = false;
  int sweep_jobs = 0;
  CLI::App* sweep = app.add_subcommand("sweep", "Run a grid of experiments");
  sweep->add_option("--spec", sweep_spec, "JSON sweep specification file")->required();
  sweep->add_option("--out", sweep_out, "Output directory for report.csv / summary.json");
  sweep->add_flag("--traces", sweep_traces, "Also write one trace CSV per run");
  sweep->add_option("--jobs", sweep_jobs, "Parallel run width (default: spec / cores)");

  std::string report_in;
  CLI::App* report = app.add_subcommand("report", "Pretty-print a sweep summary");
  report->add_option("--in", report_in, "Directory holding summary.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(run_config, run_out);
    if (sweep->parsed()) return cmd_sweep(sweep_spec, sweep_out, sweep_traces, sweep_jobs);
    if (report->parsed()) return cmd_report(report_in);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
