#include "varbandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "varbandit/estimation.hpp"

namespace varbandit {

namespace {

using nlohmann::json;

const json& require_field(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path, "missing required field");
  return *it;
}

double get_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

std::int64_t get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::uint64_t get_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  throw ConfigError(path, "expected a nonnegative integer");
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected a boolean");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

VectorXd get_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of numbers");
  VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) {
      throw ConfigError(path, "expected a nonempty array of numbers");
    }
    v[i] = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

void check_known_keys(const json& j, std::initializer_list<const char*> allowed,
                      const std::string& prefix) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(prefix + it.key(), "unknown field");
  }
}

MatrixXd parse_covariance(const json& j, int dim, const std::string& path) {
  if (j.is_number()) {
    const double c = j.get<double>();
    if (!(c >= 0.0)) throw ConfigError(path, "scalar covariance must be nonnegative");
    return c * MatrixXd::Identity(dim, dim);
  }
  if (!j.is_array() || j.empty()) {
    throw ConfigError(path, "expected a scalar, a diagonal array, or a matrix");
  }
  if (j[0].is_number()) {
    if (static_cast<int>(j.size()) != dim) {
      throw ConfigError(path, "diagonal length does not match the dimension");
    }
    VectorXd diag = get_vector(j, path);
    return MatrixXd(diag.asDiagonal());
  }
  if (static_cast<int>(j.size()) != dim) {
    throw ConfigError(path, "matrix size does not match the dimension");
  }
  MatrixXd m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != dim) {
      throw ConfigError(path, "matrix rows must all have the matrix dimension");
    }
    for (int c = 0; c < dim; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) {
        throw ConfigError(path, "matrix entries must be numbers");
      }
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

SamplerKind parse_sampler(const json& env, const std::string& prefix) {
  auto it = env.find("sampler");
  if (it == env.end()) return SamplerKind::GaussianRejection;
  const std::string s = get_string(*it, prefix + "sampler");
  if (s == "gaussian_rejection") return SamplerKind::GaussianRejection;
  if (s == "gaussian_clip") return SamplerKind::GaussianClip;
  if (s == "point_mass") return SamplerKind::PointMass;
  throw ConfigError(prefix + "sampler",
                    "expected gaussian_rejection, gaussian_clip, or point_mass");
}

// Seed derivation for sweep runs: same (master, index) pair, same seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix_u64(mix_u64(master) ^ mix_u64(index + 0x9E3779B97F4A7C15ull));
}

VectorXd parse_theta(const json& j, int expected_dim, const std::string& path) {
  if (j.is_array()) {
    VectorXd theta = get_vector(j, path);
    if (expected_dim > 0 && theta.size() != expected_dim) {
      throw ConfigError(path, "length does not match the environment dimension");
    }
    return theta;
  }
  if (j.is_object()) {
    check_known_keys(j, {"generator", "d", "scale", "gen_seed"}, path + ".");
    const std::string gen = get_string(require_field(j, "generator", path + ".generator"),
                                       path + ".generator");
    if (gen != "random_direction") {
      throw ConfigError(path + ".generator", "expected random_direction");
    }
    const int d = expected_dim > 0
                      ? expected_dim
                      : static_cast<int>(get_int(require_field(j, "d", path + ".d"), path + ".d"));
    if (d <= 0) throw ConfigError(path + ".d", "dimension must be positive");
    const double scale = get_double(require_field(j, "scale", path + ".scale"), path + ".scale");
    if (!(scale >= 0.0)) throw ConfigError(path + ".scale", "scale must be nonnegative");
    const std::uint64_t gen_seed =
        get_u64(require_field(j, "gen_seed", path + ".gen_seed"), path + ".gen_seed");
    RngStream rng = derive_rng_stream(gen_seed, 1);
    VectorXd v;
    double n = 0.0;
    do {
      v = rng.normal_vector(d);
      n = v.norm();
    } while (n < 1e-9);
    return (scale / n) * v;
  }
  throw ConfigError(path, "expected an array or a generator object");
}

std::vector<VectorXd> parse_actions(const json& j, const std::string& path) {
  if (j.is_array()) {
    if (j.empty()) throw ConfigError(path, "action list must be nonempty");
    std::vector<VectorXd> actions;
    actions.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
      actions.push_back(get_vector(j[i], path + "[" + std::to_string(i) + "]"));
      if (actions.back().size() != actions.front().size()) {
        throw ConfigError(path, "actions must all share one dimension");
      }
    }
    return actions;
  }
  if (j.is_object()) {
    check_known_keys(j, {"generator", "K", "d", "gen_seed"}, path + ".");
    const std::string gen = get_string(require_field(j, "generator", path + ".generator"),
                                       path + ".generator");
    if (gen != "random_unit") throw ConfigError(path + ".generator", "expected random_unit");
    const int K = static_cast<int>(get_int(require_field(j, "K", path + ".K"), path + ".K"));
    const int d = static_cast<int>(get_int(require_field(j, "d", path + ".d"), path + ".d"));
    if (K <= 0) throw ConfigError(path + ".K", "K must be positive");
    if (d <= 0) throw ConfigError(path + ".d", "dimension must be positive");
    const std::uint64_t gen_seed =
        get_u64(require_field(j, "gen_seed", path + ".gen_seed"), path + ".gen_seed");
    RngStream rng = derive_rng_stream(gen_seed, 0);
    std::vector<VectorXd> actions;
    actions.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      VectorXd v;
      double n = 0.0;
      do {
        v = rng.normal_vector(d);
        n = v.norm();
      } while (n < 1e-9);
      actions.push_back(v / n);
    }
    return actions;
  }
  throw ConfigError(path, "expected an array of actions or a generator object");
}

}  // namespace

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Vase: return "vase";
    case Algorithm::Valee: return "valee";
    case Algorithm::BaselineEe: return "baseline_ee";
    case Algorithm::BaselineSe: return "baseline_se";
  }
  throw std::logic_error("algorithm_name: unreachable");
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "vase") return Algorithm::Vase;
  if (name == "valee") return Algorithm::Valee;
  if (name == "baseline_ee") return Algorithm::BaselineEe;
  if (name == "baseline_se") return Algorithm::BaselineSe;
  throw ConfigError("algorithm", "expected vase, valee, baseline_ee, or baseline_se");
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  check_known_keys(j,
                   {"algorithm", "T", "seed", "delta", "M", "known_covariance", "tau",
                    "gamma_scale", "environment"},
                   "");
  RunConfig c;
  c.raw = j;
  c.algorithm = algorithm_from_name(
      get_string(require_field(j, "algorithm", "algorithm"), "algorithm"));
  c.T = get_int(require_field(j, "T", "T"), "T");
  if (c.T <= 0) throw ConfigError("T", "horizon must be positive");
  if (j.contains("seed")) c.seed = get_u64(j["seed"], "seed");
  if (c.algorithm != Algorithm::BaselineEe) {
    c.delta = get_double(require_field(j, "delta", "delta"), "delta");
    if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("delta", "expected a value in (0, 1)");
  } else if (j.contains("delta")) {
    c.delta = get_double(j["delta"], "delta");
  }
  if (c.algorithm == Algorithm::BaselineEe) {
    c.M = get_int(require_field(j, "M", "M"), "M");
    if (*c.M <= 0) throw ConfigError("M", "per-arm allocation must be positive");
  }
  if (j.contains("known_covariance")) {
    c.known_covariance = get_bool(j["known_covariance"], "known_covariance");
  }
  if (j.contains("tau")) {
    c.tau = get_double(j["tau"], "tau");
    if (!(*c.tau > 0.0)) throw ConfigError("tau", "probe threshold must be positive");
  }
  if (j.contains("gamma_scale")) {
    c.gamma_scale = get_double(j["gamma_scale"], "gamma_scale");
    if (!(c.gamma_scale > 0.0)) throw ConfigError("gamma_scale", "expected a positive number");
  }
  c.environment = require_field(j, "environment", "environment");
  if (!c.environment.is_object()) throw ConfigError("environment", "expected a JSON object");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

std::uint64_t config_hash(const json& j) {
  const std::string canonical = j.dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64-bit offset basis
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

Env build_env(const RunConfig& config, RngStream noise) {
  const json& env = config.environment;
  const std::string kind =
      get_string(require_field(env, "kind", "environment.kind"), "environment.kind");

  if (kind == "finite") {
    check_known_keys(env, {"kind", "actions", "theta_star", "covariance", "sampler"},
                     "environment.");
    std::vector<VectorXd> actions = parse_actions(
        require_field(env, "actions", "environment.actions"), "environment.actions");
    const int d = static_cast<int>(actions.front().size());
    RewardModel model;
    model.theta_star = parse_theta(require_field(env, "theta_star", "environment.theta_star"), d,
                                   "environment.theta_star");
    model.covariance = parse_covariance(require_field(env, "covariance", "environment.covariance"),
                                        d, "environment.covariance");
    model.sampler = parse_sampler(env, "environment.");
    double sup_mean = 0.0;
    for (const VectorXd& a : actions) sup_mean = std::max(sup_mean, std::abs(a.dot(model.theta_star)));
    if (sup_mean > model.bound_radius + 1e-9) {
      throw ConfigError("environment.theta_star", "mean reward exceeds the protocol bound");
    }
    try {
      return Env(ActionSet::finite(std::move(actions)), std::move(model), noise);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("environment", e.what());
    }
  }

  if (kind == "lp_ball") {
    check_known_keys(env, {"kind", "d", "p", "theta_star", "covariance", "sampler"},
                     "environment.");
    const int d = static_cast<int>(
        get_int(require_field(env, "d", "environment.d"), "environment.d"));
    if (d <= 0) throw ConfigError("environment.d", "dimension must be positive");
    const double p = get_double(require_field(env, "p", "environment.p"), "environment.p");
    if (!(p > 1.0 && p <= 2.0)) throw ConfigError("environment.p", "expected p in (1, 2]");
    RewardModel model;
    model.theta_star = parse_theta(require_field(env, "theta_star", "environment.theta_star"), d,
                                   "environment.theta_star");
    model.covariance = parse_covariance(require_field(env, "covariance", "environment.covariance"),
                                        d, "environment.covariance");
    model.sampler = parse_sampler(env, "environment.");
    if (lp_norm(model.theta_star, dual_exponent(p)) > model.bound_radius + 1e-9) {
      throw ConfigError("environment.theta_star", "mean reward exceeds the protocol bound");
    }
    try {
      return Env(ActionSet::lp_ball(d, p), std::move(model), noise);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("environment", e.what());
    }
  }

  if (kind == "lower_bound") {
    check_known_keys(env, {"kind", "construction", "d", "q", "sigma_sq", "instance_seed"},
                     "environment.");
    const std::string cons_name = get_string(
        require_field(env, "construction", "environment.construction"),
        "environment.construction");
    LbConstruction cons;
    if (cons_name == "ple2") {
      cons = LbConstruction::PLe2;
    } else if (cons_name == "pgt2") {
      cons = LbConstruction::PGt2;
    } else {
      throw ConfigError("environment.construction", "expected ple2 or pgt2");
    }
    const int d = static_cast<int>(
        get_int(require_field(env, "d", "environment.d"), "environment.d"));
    const double q = get_double(require_field(env, "q", "environment.q"), "environment.q");
    const double sigma_sq = get_double(
        require_field(env, "sigma_sq", "environment.sigma_sq"), "environment.sigma_sq");
    std::uint64_t instance_seed = 0;
    if (env.contains("instance_seed")) {
      instance_seed = get_u64(env["instance_seed"], "environment.instance_seed");
    }
    try {
      auto [discard, instance] =
          make_lower_bound_env(d, sigma_sq, config.T, q, cons, instance_seed);
      (void)discard;
      return env_from_instance(instance, noise);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("environment", e.what());
    }
  }

  throw ConfigError("environment.kind", "expected finite, lp_ball, or lower_bound");
}

ExperimentOutput run_experiment(const RunConfig& config) {
  Env env = build_env(config, derive_rng_stream(config.seed, 0));

  RunResult result;
  switch (config.algorithm) {
    case Algorithm::Vase: {
      if (!env.actions().is_finite()) {
        throw ConfigError("algorithm", "vase requires a finite action set");
      }
      VaseOptions opts;
      opts.gamma_scale = config.gamma_scale;
      result = run_vase(env, config.T, config.delta, opts);
      break;
    }
    case Algorithm::BaselineSe: {
      if (!env.actions().is_finite()) {
        throw ConfigError("algorithm", "baseline_se requires a finite action set");
      }
      VaseOptions opts;
      opts.gamma_scale = config.gamma_scale;
      result = run_baseline_se(env, config.T, config.delta, opts);
      break;
    }
    case Algorithm::Valee: {
      if (env.actions().is_finite()) {
        throw ConfigError("algorithm", "valee requires an lp_ball environment");
      }
      ValeeOptions opts;
      if (config.known_covariance) {
        opts.known_sigma_q_sq = sigma_q_sq(env.model().covariance, env.dual_q());
      }
      opts.tau = config.tau;
      result = run_valee(env, config.T, config.delta, opts);
      break;
    }
    case Algorithm::BaselineEe: {
      result = run_explore_exploit(env, config.T, *config.M);
      break;
    }
  }

  result.trace.set_algorithm(algorithm_name(config.algorithm));
  result.trace.set_seed(config.seed);
  result.trace.set_config_hash(config_hash(config.raw));
  return ExperimentOutput{std::move(result), env.diagnostics()};
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trace_csv(std::ostream& os, const RunTrace& trace) {
  os << "t,action_id,reward,gap,cum_regret,phase\n";
  double cum = 0.0;
  for (const TraceStep& s : trace.steps()) {
    cum += s.gap;
    os << s.t << ',';
    if (s.action_id >= 0) {
      os << s.action_id;
    } else {
      os << "v:";
      for (int i = 0; i < s.action.size(); ++i) {
        if (i > 0) os << '|';
        os << format_double(s.action[i]);
      }
    }
    os << ',' << format_double(s.reward) << ',' << format_double(s.gap) << ','
       << format_double(cum) << ',' << s.phase << '\n';
  }
}

std::optional<double> fit_loglog_slope(const std::vector<std::pair<double, double>>& t_regret) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [t, r] : t_regret) {
    if (t > 0.0 && r > 0.0) pts.emplace_back(std::log(t), std::log(r));
  }
  if (pts.size() < 4) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx <= 0.0) return std::nullopt;
  return sxy / sxx;
}

namespace {

template <typename T, typename Getter>
std::vector<T> get_list(const json& j, const std::string& path, Getter getter) {
  std::vector<T> out;
  if (j.is_array()) {
    if (j.empty()) throw ConfigError(path, "list must be nonempty");
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(getter(j[i], path + "[" + std::to_string(i) + "]"));
    }
  } else {
    out.push_back(getter(j, path));
  }
  return out;
}

}  // namespace

SweepSpec parse_sweep_spec(const json& j) {
  if (!j.is_object()) throw ConfigError("sweep", "expected a JSON object");
  check_known_keys(j,
                   {"algorithms", "d", "K", "T", "sigma_sq", "p", "seeds_per_cell", "master_seed",
                    "instance_seed", "delta", "theta_scale", "env_style", "jobs", "write_traces"},
                   "");
  SweepSpec s;
  s.raw = j;
  for (const std::string& name :
       get_list<std::string>(require_field(j, "algorithms", "algorithms"), "algorithms",
                             [](const json& e, const std::string& p) { return get_string(e, p); })) {
    s.algorithms.push_back(algorithm_from_name(name));
  }
  s.T = get_list<std::int64_t>(require_field(j, "T", "T"), "T",
                               [](const json& e, const std::string& p) {
                                 const std::int64_t t = get_int(e, p);
                                 if (t <= 0) throw ConfigError(p, "horizon must be positive");
                                 return t;
                               });
  auto int_list = [](const json& e, const std::string& p) {
    const std::int64_t v = get_int(e, p);
    if (v <= 0) throw ConfigError(p, "expected a positive integer");
    return static_cast<int>(v);
  };
  s.d = j.contains("d") ? get_list<int>(j["d"], "d", int_list) : std::vector<int>{2};
  s.K = j.contains("K") ? get_list<int>(j["K"], "K", int_list) : std::vector<int>{8};
  s.sigma_sq = j.contains("sigma_sq")
                   ? get_list<double>(j["sigma_sq"], "sigma_sq",
                                      [](const json& e, const std::string& p) {
                                        const double v = get_double(e, p);
                                        if (!(v > 0.0)) throw ConfigError(p, "expected a positive number");
                                        return v;
                                      })
                   : std::vector<double>{0.04};
  s.p = j.contains("p") ? get_list<double>(j["p"], "p",
                                           [](const json& e, const std::string& p) {
                                             const double v = get_double(e, p);
                                             if (!(v > 1.0 && v <= 2.0)) {
                                               throw ConfigError(p, "expected p in (1, 2]");
                                             }
                                             return v;
                                           })
                        : std::vector<double>{2.0};
  if (j.contains("seeds_per_cell")) {
    s.seeds_per_cell = static_cast<int>(get_int(j["seeds_per_cell"], "seeds_per_cell"));
    if (s.seeds_per_cell <= 0) throw ConfigError("seeds_per_cell", "expected a positive integer");
  } else {
    s.seeds_per_cell = 4;
  }
  if (j.contains("master_seed")) s.master_seed = get_u64(j["master_seed"], "master_seed");
  if (j.contains("instance_seed")) s.instance_seed = get_u64(j["instance_seed"], "instance_seed");
  if (j.contains("delta")) {
    s.delta = get_double(j["delta"], "delta");
    if (!(s.delta > 0.0 && s.delta < 1.0)) throw ConfigError("delta", "expected a value in (0, 1)");
  }
  if (j.contains("theta_scale")) {
    s.theta_scale = get_double(j["theta_scale"], "theta_scale");
    if (!(s.theta_scale > 0.0)) throw ConfigError("theta_scale", "expected a positive number");
  }
  if (j.contains("env_style")) s.env_style = get_string(j["env_style"], "env_style");
  if (s.env_style != "finite_random" && s.env_style != "ball_axis" && s.env_style != "ple2") {
    throw ConfigError("env_style", "expected finite_random, ball_axis, or ple2");
  }
  if (j.contains("jobs")) {
    s.jobs = static_cast<int>(get_int(j["jobs"], "jobs"));
    if (s.jobs < 0) throw ConfigError("jobs", "expected a nonnegative integer");
  }
  if (j.contains("write_traces")) s.write_traces = get_bool(j["write_traces"], "write_traces");

  const bool finite_style = s.env_style == "finite_random";
  for (Algorithm a : s.algorithms) {
    if ((a == Algorithm::Vase || a == Algorithm::BaselineSe) && !finite_style) {
      throw ConfigError("algorithms",
                        algorithm_name(a) + " requires env_style finite_random");
    }
    if (a == Algorithm::Valee && finite_style) {
      throw ConfigError("algorithms", "valee requires env_style ball_axis or ple2");
    }
  }
  if (s.env_style == "ball_axis" && s.theta_scale > 1.0) {
    throw ConfigError("theta_scale", "must be at most 1 on the unit ball");
  }
  return s;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("sweep", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("sweep", std::string("invalid JSON: ") + e.what());
  }
  return parse_sweep_spec(j);
}

namespace {

struct CellKey {
  Algorithm algorithm;
  int d;
  int K;
  double p;
  double sigma_sq;
  std::int64_t T;
};

struct RunOutcome {
  bool ok = false;
  double final_regret = 0.0;
  std::int64_t steps = 0;
  bool exploited = false;
  Diagnostics diagnostics;
  std::string error;
};

json cell_env_json(const SweepSpec& spec, const CellKey& c, std::uint64_t run_index) {
  json env;
  if (spec.env_style == "finite_random") {
    env["kind"] = "finite";
    env["actions"] = {{"generator", "random_unit"},
                      {"K", c.K},
                      {"d", c.d},
                      {"gen_seed", spec.instance_seed}};
    env["theta_star"] = {{"generator", "random_direction"},
                         {"d", c.d},
                         {"scale", spec.theta_scale},
                         {"gen_seed", spec.instance_seed}};
    env["covariance"] = c.sigma_sq;
  } else if (spec.env_style == "ball_axis") {
    env["kind"] = "lp_ball";
    env["d"] = c.d;
    env["p"] = c.p;
    std::vector<double> theta(static_cast<std::size_t>(c.d), 0.0);
    theta[0] = spec.theta_scale;
    env["theta_star"] = theta;
    // Scaled so the q-aggregated variance equals sigma_sq exactly.
    env["covariance"] = c.sigma_sq / std::pow(static_cast<double>(c.d),
                                              2.0 / dual_exponent(c.p));
  } else {  // ple2: a fresh hard instance per run
    env["kind"] = "lower_bound";
    env["construction"] = "ple2";
    env["d"] = c.d;
    env["q"] = dual_exponent(c.p);
    env["sigma_sq"] = c.sigma_sq;
    env["instance_seed"] = derive_seed(spec.instance_seed, run_index);
  }
  return env;
}

json run_config_json(const SweepSpec& spec, const CellKey& c, std::uint64_t run_index) {
  json j;
  j["algorithm"] = algorithm_name(c.algorithm);
  j["T"] = c.T;
  j["seed"] = derive_seed(spec.master_seed, run_index);
  if (c.algorithm == Algorithm::BaselineEe) {
    // Fixed allocation rule: M = ceil(T^{2/3} / d).
    const double m = std::ceil(std::pow(static_cast<double>(c.T), 2.0 / 3.0) /
                               static_cast<double>(c.d));
    j["M"] = static_cast<std::int64_t>(std::max(1.0, m));
  } else {
    j["delta"] = spec.delta;
  }
  if (c.algorithm == Algorithm::Valee) j["known_covariance"] = true;
  j["environment"] = cell_env_json(spec, c, run_index);
  return j;
}

bool run_exploited(const RunResult& r) {
  if (r.valee) return r.valee->exploit_reached;
  if (r.ee) return r.ee->committed;
  if (r.vase) {
    for (auto it = r.vase->phases.rbegin(); it != r.vase->phases.rend(); ++it) {
      if (it->completed) return it->active_after.size() == 1;
    }
  }
  return false;
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

std::string series_key(const ReportRow& r) {
  std::ostringstream os;
  os << r.algorithm << '|' << r.env_style << '|' << r.d << '|' << r.K << '|'
     << format_double(r.p) << '|' << format_double(r.sigma_sq);
  return os.str();
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (spec.write_traces) std::filesystem::create_directories(out_dir / "traces");

  // Cell enumeration order fixes run indices and hence all derived seeds.
  const bool finite_style = spec.env_style == "finite_random";
  std::vector<int> k_list = finite_style ? spec.K : std::vector<int>{0};
  std::vector<double> p_list = finite_style ? std::vector<double>{2.0} : spec.p;
  std::vector<CellKey> cells;
  for (Algorithm a : spec.algorithms) {
    for (int d : spec.d) {
      for (int K : k_list) {
        for (double p : p_list) {
          for (double sig : spec.sigma_sq) {
            for (std::int64_t T : spec.T) {
              cells.push_back(CellKey{a, d, K, p, sig, T});
            }
          }
        }
      }
    }
  }

  const std::size_t seeds = static_cast<std::size_t>(spec.seeds_per_cell);
  const std::size_t n_runs = cells.size() * seeds;
  std::vector<RunOutcome> outcomes(n_runs);

  auto execute = [&](std::size_t run_index) {
    const CellKey& c = cells[run_index / seeds];
    RunOutcome& out = outcomes[run_index];
    try {
      const json cfg_json = run_config_json(spec, c, run_index);
      const RunConfig cfg = parse_run_config(cfg_json);
      ExperimentOutput result = run_experiment(cfg);
      out.ok = true;
      out.final_regret = result.result.trace.final_regret();
      out.steps = result.result.trace.size();
      out.exploited = run_exploited(result.result);
      out.diagnostics = result.diagnostics;
      if (spec.write_traces) {
        std::ostringstream name;
        name << "run_" << run_index << "_" << algorithm_name(c.algorithm) << "_T" << c.T << "_s"
             << (run_index % seeds) << ".csv";
        std::ofstream tf(out_dir / "traces" / name.str(), std::ios::binary);
        write_trace_csv(tf, result.result.trace);
      }
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  };

  unsigned jobs = spec.jobs > 0 ? static_cast<unsigned>(spec.jobs)
                                : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, n_runs)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n_runs; ++i) execute(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (unsigned w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n_runs; i = next.fetch_add(1)) execute(i);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  // Aggregate per cell, in enumeration order.
  std::vector<ReportRow> rows;
  rows.reserve(cells.size());
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const CellKey& c = cells[ci];
    ReportRow row;
    row.algorithm = algorithm_name(c.algorithm);
    row.env_style = spec.env_style;
    row.d = c.d;
    row.K = c.K;
    row.p = c.p;
    row.sigma_sq = c.sigma_sq;
    row.T = c.T;
    row.seeds = spec.seeds_per_cell;

    std::vector<double> regrets;
    double steps_acc = 0.0;
    double exploit_acc = 0.0;
    std::string error;
    bool have_diag = false;
    for (std::size_t s = 0; s < seeds; ++s) {
      const RunOutcome& out = outcomes[ci * seeds + s];
      if (!out.ok) {
        if (error.empty()) error = out.error;
        continue;
      }
      regrets.push_back(out.final_regret);
      steps_acc += static_cast<double>(out.steps);
      exploit_acc += out.exploited ? 1.0 : 0.0;
      if (!have_diag) {
        row.diagnostics = out.diagnostics;
        have_diag = true;
      }
    }
    if (!error.empty()) {
      row.status = "failed: " + error;
    } else {
      const double n = static_cast<double>(regrets.size());
      for (double r : regrets) row.mean_regret += r;
      row.mean_regret /= n;
      row.std_regret = sample_std(regrets, row.mean_regret);
      row.mean_steps = steps_acc / n;
      row.exploit_rate = exploit_acc / n;
    }
    rows.push_back(std::move(row));
  }

  // Slopes over each T-series.
  std::map<std::string, std::vector<std::size_t>> series;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].status == "ok") series[series_key(rows[i])].push_back(i);
  }
  json series_json = json::array();
  for (const auto& [key, idxs] : series) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i : idxs) {
      pts.emplace_back(static_cast<double>(rows[i].T), rows[i].mean_regret);
    }
    const std::optional<double> slope = fit_loglog_slope(pts);
    for (std::size_t i : idxs) rows[i].slope = slope;
    const ReportRow& head = rows[idxs.front()];
    json entry;
    entry["algorithm"] = head.algorithm;
    entry["env_style"] = head.env_style;
    entry["d"] = head.d;
    entry["K"] = head.K;
    entry["p"] = head.p;
    entry["sigma_sq"] = head.sigma_sq;
    entry["points"] = idxs.size();
    entry["slope"] = slope ? json(*slope) : json(nullptr);
    // Yardsticks: sqrt-scaling band for the adaptive algorithms, a
    // near-linear floor for the fixed-allocation baseline.
    if (head.algorithm == "vase" || head.algorithm == "valee") {
      entry["slope_band"] = {0.35, 0.65};
      entry["within_band"] = slope ? json(*slope >= 0.35 && *slope <= 0.65) : json(nullptr);
    } else if (head.algorithm == "baseline_ee") {
      entry["slope_min"] = 0.55;
      entry["within_band"] = slope ? json(*slope >= 0.55) : json(nullptr);
    } else {
      entry["within_band"] = nullptr;
    }
    series_json.push_back(std::move(entry));
  }

  // Cross-sigma ratio checks at the largest shared horizon: regret should
  // scale like sqrt(sigma_sq), within a factor of 3.
  json ratio_json = json::array();
  {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].status != "ok" || rows[i].T != spec.T.back()) continue;
      std::ostringstream os;
      os << rows[i].algorithm << '|' << rows[i].d << '|' << rows[i].K << '|'
         << format_double(rows[i].p);
      groups[os.str()].push_back(i);
    }
    for (const auto& [key, idxs] : groups) {
      for (std::size_t a = 0; a < idxs.size(); ++a) {
        for (std::size_t b = a + 1; b < idxs.size(); ++b) {
          const ReportRow& lo = rows[idxs[a]].sigma_sq < rows[idxs[b]].sigma_sq ? rows[idxs[a]]
                                                                                : rows[idxs[b]];
          const ReportRow& hi = rows[idxs[a]].sigma_sq < rows[idxs[b]].sigma_sq ? rows[idxs[b]]
                                                                                : rows[idxs[a]];
          if (!(lo.sigma_sq < hi.sigma_sq) || lo.mean_regret <= 0.0 || hi.mean_regret <= 0.0) {
            continue;
          }
          json entry;
          entry["algorithm"] = lo.algorithm;
          entry["d"] = lo.d;
          entry["T"] = lo.T;
          entry["sigma_sq_low"] = lo.sigma_sq;
          entry["sigma_sq_high"] = hi.sigma_sq;
          const double ratio = lo.mean_regret / hi.mean_regret;
          const double predicted = std::sqrt(lo.sigma_sq / hi.sigma_sq);
          entry["regret_ratio"] = ratio;
          entry["predicted_ratio"] = predicted;
          entry["within_factor_3"] = ratio >= predicted / 3.0 && ratio <= predicted * 3.0;
          ratio_json.push_back(std::move(entry));
        }
      }
    }
  }

  json cells_json = json::array();
  std::size_t failed = 0;
  for (const ReportRow& r : rows) {
    json entry;
    entry["algorithm"] = r.algorithm;
    entry["env_style"] = r.env_style;
    entry["d"] = r.d;
    entry["K"] = r.K;
    entry["p"] = r.p;
    entry["sigma_sq"] = r.sigma_sq;
    entry["T"] = r.T;
    entry["seeds"] = r.seeds;
    entry["mean_regret"] = r.mean_regret;
    entry["std_regret"] = r.std_regret;
    entry["mean_steps"] = r.mean_steps;
    entry["exploit_rate"] = r.exploit_rate;
    entry["sigma_q_sq"] = r.diagnostics.sigma_q_sq;
    entry["m_sigma"] = r.diagnostics.m_sigma;
    entry["theta_star_dual_norm"] = r.diagnostics.theta_star_dual_norm;
    entry["slope"] = r.slope ? json(*r.slope) : json(nullptr);
    entry["status"] = r.status;
    if (r.status != "ok") ++failed;
    cells_json.push_back(std::move(entry));
  }

  SweepResult result;
  result.rows = std::move(rows);
  result.summary["spec"] = spec.raw;
  result.summary["n_cells"] = cells.size();
  result.summary["n_runs"] = n_runs;
  result.summary["failed_cells"] = failed;
  result.summary["status"] = failed == 0 ? "ok" : "partial";
  result.summary["cells"] = std::move(cells_json);
  result.summary["series"] = std::move(series_json);
  result.summary["sigma_ratio_checks"] = std::move(ratio_json);

  {
    std::ofstream rf(out_dir / "report.csv", std::ios::binary);
    write_report_csv(rf, result.rows);
  }
  {
    std::ofstream sf(out_dir / "summary.json", std::ios::binary);
    sf << result.summary.dump(2) << '\n';
  }
  return result;
}

void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << "algorithm,env_style,d,K,p,sigma_sq,T,seeds,mean_regret,std_regret,mean_steps,"
        "exploit_rate,sigma_q_sq,m_sigma,theta_star_dual_norm,slope,status\n";
  for (const ReportRow& r : rows) {
    os << r.algorithm << ',' << r.env_style << ',' << r.d << ',' << r.K << ','
       << format_double(r.p) << ',' << format_double(r.sigma_sq) << ',' << r.T << ',' << r.seeds
       << ',' << format_double(r.mean_regret) << ',' << format_double(r.std_regret) << ','
       << format_double(r.mean_steps) << ',' << format_double(r.exploit_rate) << ','
       << format_double(r.diagnostics.sigma_q_sq) << ',' << format_double(r.diagnostics.m_sigma)
       << ',' << format_double(r.diagnostics.theta_star_dual_norm) << ','
       << (r.slope ? format_double(*r.slope) : std::string()) << ',' << r.status << '\n';
  }
}

}  // namespace varbandit
