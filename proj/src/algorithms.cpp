#include "varbandit/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>

namespace varbandit {

namespace {

// Internal control flow only: unwinds to the run loop when the step budget
// is exactly spent.
struct BudgetExhausted {};

class BudgetRunner {
 public:
  BudgetRunner(Env& env, std::int64_t budget, RunTrace& trace)
      : env_(env), budget_(budget), trace_(trace) {}

  std::int64_t remaining() const { return budget_ - trace_.size(); }
  bool exhausted() const { return remaining() <= 0; }

  double play(int action_index, const std::string& phase) {
    if (exhausted()) throw BudgetExhausted{};
    TraceStep step;
    step.t = trace_.size();
    step.action_id = action_index;
    step.gap = env_.gap(action_index);
    step.reward = env_.pull(action_index);
    step.phase = phase;
    trace_.add(std::move(step));
    return trace_.steps().back().reward;
  }

  double play(const VectorXd& action, const std::string& phase) {
    if (exhausted()) throw BudgetExhausted{};
    TraceStep step;
    step.t = trace_.size();
    step.action_id = -1;
    step.action = action;
    step.gap = env_.gap(action);
    step.reward = env_.pull(action);
    step.phase = phase;
    trace_.add(std::move(step));
    return trace_.steps().back().reward;
  }

 private:
  Env& env_;
  std::int64_t budget_;
  RunTrace& trace_;
};

// Orthonormal basis of the span of the given actions. Returns an empty
// matrix when they already span the ambient space.
MatrixXd span_basis(const std::vector<VectorXd>& actions, int d) {
  MatrixXd mat(static_cast<int>(actions.size()), d);
  for (int i = 0; i < static_cast<int>(mat.rows()); ++i) mat.row(i) = actions[static_cast<std::size_t>(i)];
  Eigen::JacobiSVD<MatrixXd> svd(mat, Eigen::ComputeThinV);
  const double tol = 1e-10 * std::max(1.0, svd.singularValues().maxCoeff());
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()[i] > tol) ++rank;
  }
  if (rank == 0) throw RankError(0, d);
  if (rank == d) return MatrixXd();
  return svd.matrixV().leftCols(rank);
}

std::int64_t ceil_to_budget(double value, std::int64_t cap) {
  if (!(value > 0.0)) return 1;
  const double c = std::ceil(value);
  if (c >= static_cast<double>(cap)) return cap;
  return static_cast<std::int64_t>(c);
}

RunResult run_phased_elimination(Env& env, std::int64_t T, double delta,
                                 const VaseOptions& options, bool variance_aware) {
  if (!env.actions().is_finite()) {
    throw std::invalid_argument("run_vase: requires a finite action set");
  }
  if (T <= 0) throw std::invalid_argument("run_vase: T must be positive");
  if (!(delta > 0.0) || !(delta < 1.0)) throw std::invalid_argument("run_vase: delta must lie in (0, 1)");

  const auto& all_actions = env.actions().as_finite().actions;
  const int k = static_cast<int>(all_actions.size());
  const int d = env.actions().dim();

  RunResult result;
  result.trace.set_algorithm(variance_aware ? "vase" : "baseline_se");
  result.vase = VaseReport{};
  result.vase->variance_aware = variance_aware;
  BudgetRunner runner(env, T, result.trace);

  std::vector<int> active(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) active[static_cast<std::size_t>(i)] = i;

  VasePhaseInfo phase;
  std::int64_t phase_start = 0;
  bool probes_done = false;
  try {
    for (int ell = 1; !runner.exhausted(); ++ell) {
      phase = VasePhaseInfo{};
      probes_done = false;
      phase.ell = ell;
      phase.eps_ell = std::pow(2.0, -ell);
      phase.delta_ell = delta / (static_cast<double>(k) * ell * (ell + 1.0));
      phase.gamma_ell =
          options.gamma_scale * 2.0 * delta / (ell * (ell + 1.0) * d * (d + 1.0));
      phase.active_before = active;

      std::vector<VectorXd> working;
      working.reserve(active.size());
      for (int idx : active) working.push_back(all_actions[static_cast<std::size_t>(idx)]);

      // Survivors can collapse onto a lower-dimensional span; estimate there.
      const MatrixXd basis = span_basis(working, d);
      const int dim_w = basis.size() == 0 ? d : static_cast<int>(basis.cols());
      if (basis.size() != 0) {
        for (auto& a : working) a = basis.transpose() * a;
      }

      const FrankWolfeResult fw =
          frank_wolfe_design(working, options.design_target_factor * dim_w,
                             options.design_max_iters, options.design_prune_eps);
      for (const auto& [local, weight] : fw.design.support) {
        phase.design.support.emplace_back(active[static_cast<std::size_t>(local)], weight);
      }

      const std::string var_label = "var:" + std::to_string(ell);
      const std::string play_label = "play:" + std::to_string(ell);

      // Variance probes on the support arms (charged to the trace).
      const std::int64_t t0 = result.trace.size();
      phase_start = t0;
      for (const auto& [local, weight] : fw.design.support) {
        const int global = active[static_cast<std::size_t>(local)];
        if (variance_aware) {
          auto pull = [&]() { return runner.play(global, var_label); };
          const VarianceEstimate est = estimate_action_variance(
              pull, phase.eps_ell, phase.gamma_ell, 0.5, options.sr_step_cap);
          phase.sigma_hat_sq[global] = est.value;
        } else {
          phase.sigma_hat_sq[global] = 1.0;
        }
      }
      phase.probe_steps = result.trace.size() - t0;
      probes_done = true;

      // Weighted exploration pulls.
      const double log_term = std::log(1.0 / phase.delta_ell);
      std::vector<WlsObservation> obs;
      for (const auto& [local, weight] : fw.design.support) {
        const int global = active[static_cast<std::size_t>(local)];
        const double sig = phase.sigma_hat_sq[global];
        const double raw = 49.0 * d / (phase.eps_ell * phase.eps_ell) * log_term * sig * weight;
        const std::int64_t pulls = ceil_to_budget(raw, T);
        phase.alloc[global] = pulls;
        const VectorXd& proj = working[static_cast<std::size_t>(local)];
        for (std::int64_t s = 0; s < pulls; ++s) {
          const double x = runner.play(global, play_label);
          obs.push_back(WlsObservation{proj, 1.0 / sig, x});
        }
      }
      phase.play_steps = result.trace.size() - t0 - phase.probe_steps;

      const VectorXd theta_w = weighted_least_squares(obs);
      phase.theta_hat = basis.size() == 0 ? theta_w : VectorXd(basis * theta_w);

      // Keep every arm within 2 eps_ell of the estimated best.
      double best = -std::numeric_limits<double>::infinity();
      std::vector<double> scores(active.size());
      for (std::size_t i = 0; i < active.size(); ++i) {
        scores[i] = working[i].dot(theta_w);
        best = std::max(best, scores[i]);
      }
      std::vector<int> next;
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (best - scores[i] <= 2.0 * phase.eps_ell) next.push_back(active[i]);
      }
      if (next.empty()) next.push_back(active.front());  // NaN scores fail every margin test
      active = std::move(next);
      phase.active_after = active;
      phase.completed = true;
      result.vase->phases.push_back(phase);
    }
  } catch (const BudgetExhausted&) {
    // Mid-phase truncation: keep the partial record, flagged as incomplete.
    if (phase.ell > 0 && !phase.completed) {
      const std::int64_t spent = result.trace.size() - phase_start;
      if (!probes_done) {
        phase.probe_steps = spent;
        phase.play_steps = 0;
      } else {
        phase.play_steps = spent - phase.probe_steps;
      }
      phase.active_after.clear();
      result.vase->phases.push_back(std::move(phase));
    }
  }
  return result;
}

}  // namespace

RunResult run_vase(Env& env, std::int64_t T, double delta, const VaseOptions& options) {
  return run_phased_elimination(env, T, delta, options, /*variance_aware=*/true);
}

RunResult run_baseline_se(Env& env, std::int64_t T, double delta, const VaseOptions& options) {
  return run_phased_elimination(env, T, delta, options, /*variance_aware=*/false);
}

RunResult run_valee(Env& env, std::int64_t T, double delta, const ValeeOptions& options) {
  if (env.actions().is_finite()) {
    throw std::invalid_argument("run_valee: requires an lp-ball action set");
  }
  if (T < 2) throw std::invalid_argument("run_valee: T must be at least 2");
  if (!(delta > 0.0) || !(delta < 1.0)) throw std::invalid_argument("run_valee: delta must lie in (0, 1)");

  const int d = env.actions().dim();
  const double p = env.actions().as_ball().p;
  const double q = dual_exponent(p);

  RunResult result;
  result.trace.set_algorithm("valee");
  result.valee = ValeeReport{};
  ValeeReport& report = *result.valee;
  report.q = q;
  BudgetRunner runner(env, T, result.trace);

  std::vector<VectorXd> basis;
  basis.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    VectorXd e = VectorXd::Zero(d);
    e[i] = 1.0;
    basis.push_back(std::move(e));
  }

  report.kappa = static_cast<int>(
      std::ceil(8.0 * std::log(d * std::log2(static_cast<double>(T)) / delta)));
  report.kappa = std::max(report.kappa, 1);

  try {
    if (options.known_sigma_q_sq.has_value()) {
      if (!(*options.known_sigma_q_sq > 0.0)) {
        throw std::invalid_argument("run_valee: known_sigma_q_sq must be positive");
      }
      report.sigma_known = true;
      report.sigma_q_sq_used = *options.known_sigma_q_sq;
    } else {
      const double tau = options.tau.has_value()
                             ? *options.tau
                             : std::pow(static_cast<double>(d), 1.0 / 3.0 - 2.0 / (3.0 * q)) *
                                   std::cbrt(std::log(d / delta)) /
                                   (std::cbrt(static_cast<double>(T)) * std::cbrt(q));
      if (!(tau > 0.0)) throw std::invalid_argument("run_valee: tau must be positive");
      report.tau_used = tau;
      report.coord_sigma_hat_sq.resize(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) {
        auto pull = [&]() { return runner.play(basis[static_cast<std::size_t>(i)], "var"); };
        const VarianceEstimate est =
            estimate_action_variance(pull, tau, delta / d, 0.5, options.sr_step_cap);
        report.coord_sigma_hat_sq[static_cast<std::size_t>(i)] = est.value;
      }
      double s = 0.0;
      for (double v : report.coord_sigma_hat_sq) s += std::pow(v, 0.5 * q);
      report.sigma_q_sq_used = std::pow(s, 2.0 / q);
    }

    report.alpha = std::pow(
        d * static_cast<double>(report.kappa) / (static_cast<double>(T) * q * report.sigma_q_sq_used),
        0.25);

    // Doubling rounds: halve the norm threshold until the estimated norm
    // clears it, re-estimating all coordinates each round at matched accuracy.
    VectorXd theta_hat = VectorXd::Zero(d);
    double qnorm = 0.0;
    double n_hat = 2.0;
    int j = 0;
    std::vector<double> blocks(static_cast<std::size_t>(report.kappa));
    while (n_hat >= qnorm) {
      ++j;
      n_hat *= 0.5;
      const double eps_hat = report.alpha * std::sqrt(n_hat);
      const std::int64_t t_exp = ceil_to_budget(8.0 / (eps_hat * eps_hat), T);

      ValeeRoundInfo round;
      round.j = j;
      round.n_hat = n_hat;
      round.eps_hat = eps_hat;
      round.t_exp = t_exp;

      const std::string label = "explore:" + std::to_string(j);
      VectorXd estimate(d);
      for (int i = 0; i < d; ++i) {
        for (int b = 0; b < report.kappa; ++b) {
          double sum = 0.0;
          for (std::int64_t s = 0; s < t_exp; ++s) {
            sum += runner.play(basis[static_cast<std::size_t>(i)], label);
          }
          blocks[static_cast<std::size_t>(b)] = sum / static_cast<double>(t_exp);
        }
        estimate[i] = median_of_means(blocks);
      }
      theta_hat = estimate;
      qnorm = lp_norm(theta_hat, q);
      round.theta_hat = theta_hat;
      round.theta_hat_qnorm = qnorm;
      round.completed = true;
      report.rounds.push_back(std::move(round));
      report.stop_round = j;
    }

    report.exploit_action = qnorm > 0.0 ? best_action_lp(theta_hat, q) : basis.front();
    report.exploit_reached = true;
    while (true) runner.play(report.exploit_action, "exploit");
  } catch (const BudgetExhausted&) {
  }
  return result;
}

RunResult run_explore_exploit(Env& env, std::int64_t T, std::int64_t M) {
  if (T <= 0) throw std::invalid_argument("run_explore_exploit: T must be positive");
  if (M <= 0) throw std::invalid_argument("run_explore_exploit: M must be positive");

  const bool finite = env.actions().is_finite();
  const int d = env.actions().dim();
  const int arms = finite ? env.actions().size() : d;

  RunResult result;
  result.trace.set_algorithm("baseline_ee");
  result.ee = EeReport{};
  EeReport& report = *result.ee;
  report.arm_means.assign(static_cast<std::size_t>(arms), 0.0);
  BudgetRunner runner(env, T, result.trace);

  std::vector<VectorXd> basis;
  if (!finite) {
    for (int i = 0; i < d; ++i) {
      VectorXd e = VectorXd::Zero(d);
      e[i] = 1.0;
      basis.push_back(std::move(e));
    }
  }

  std::vector<std::int64_t> counts(static_cast<std::size_t>(arms), 0);
  std::vector<double> sums(static_cast<std::size_t>(arms), 0.0);
  auto finalize_means = [&]() {
    for (int arm = 0; arm < arms; ++arm) {
      const auto idx = static_cast<std::size_t>(arm);
      report.arm_means[idx] = counts[idx] > 0 ? sums[idx] / static_cast<double>(counts[idx]) : 0.0;
    }
  };
  try {
    for (int arm = 0; arm < arms; ++arm) {
      for (std::int64_t s = 0; s < M; ++s) {
        const double x = finite ? runner.play(arm, "explore")
                                : runner.play(basis[static_cast<std::size_t>(arm)], "explore");
        sums[static_cast<std::size_t>(arm)] += x;
        ++counts[static_cast<std::size_t>(arm)];
      }
    }
    finalize_means();

    if (finite) {
      int best = 0;
      for (int arm = 1; arm < arms; ++arm) {
        if (report.arm_means[static_cast<std::size_t>(arm)] >
            report.arm_means[static_cast<std::size_t>(best)]) {
          best = arm;
        }
      }
      report.commit_index = best;
      report.committed = true;
      while (true) runner.play(best, "exploit");
    } else {
      const double q = env.dual_q();
      VectorXd theta_hat =
          Eigen::Map<const VectorXd>(report.arm_means.data(), static_cast<int>(report.arm_means.size()));
      report.commit_action = lp_norm(theta_hat, q) > 0.0 ? best_action_lp(theta_hat, q) : basis.front();
      report.committed = true;
      while (true) runner.play(report.commit_action, "exploit");
    }
  } catch (const BudgetExhausted&) {
    // Exploration can be cut short; report the means over the pulls made.
    if (!report.committed) finalize_means();
  }
  return result;
}

}  // namespace varbandit
