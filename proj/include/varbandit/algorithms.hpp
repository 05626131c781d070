#ifndef VARBANDIT_ALGORITHMS_HPP
#define VARBANDIT_ALGORITHMS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "varbandit/design.hpp"
#include "varbandit/environments.hpp"
#include "varbandit/estimation.hpp"
#include "varbandit/types.hpp"

namespace varbandit {

struct VaseOptions {
  double design_target_factor = 2.0;  // Frank-Wolfe target g <= factor * dim
  int design_max_iters = 2000;
  double design_prune_eps = 1e-6;
  // Multiplier on the per-phase probe confidence gamma_ell; the default
  // schedule is 2 delta / (ell (ell+1) d (d+1)).
  double gamma_scale = 1.0;
  std::int64_t sr_step_cap = kDefaultStepCap;
};

struct VasePhaseInfo {
  int ell = 0;
  double eps_ell = 0.0;
  double delta_ell = 0.0;
  double gamma_ell = 0.0;
  std::vector<int> active_before;
  std::vector<int> active_after;
  Design design;                          // over original action indices
  std::map<int, double> sigma_hat_sq;     // per support arm
  std::map<int, std::int64_t> alloc;      // exploration pulls per support arm
  VectorXd theta_hat;                     // ambient coordinates
  std::int64_t probe_steps = 0;
  std::int64_t play_steps = 0;
  bool completed = false;
};

struct VaseReport {
  std::vector<VasePhaseInfo> phases;
  bool variance_aware = true;
};

struct ValeeRoundInfo {
  int j = 0;
  double n_hat = 0.0;
  double eps_hat = 0.0;
  std::int64_t t_exp = 0;
  VectorXd theta_hat;
  double theta_hat_qnorm = 0.0;
  bool completed = false;
};

struct ValeeReport {
  double q = 2.0;
  int kappa = 0;
  double alpha = 0.0;
  double sigma_q_sq_used = 0.0;
  bool sigma_known = false;
  std::optional<double> tau_used;
  std::vector<double> coord_sigma_hat_sq;  // unknown-covariance path only
  std::vector<ValeeRoundInfo> rounds;
  int stop_round = 0;
  VectorXd exploit_action;
  bool exploit_reached = false;
};

struct EeReport {
  std::vector<double> arm_means;  // per finite arm, or per coordinate for balls
  std::optional<int> commit_index;
  VectorXd commit_action;
  bool committed = false;
};

struct RunResult {
  RunTrace trace;
  std::optional<VaseReport> vase;
  std::optional<ValeeReport> valee;
  std::optional<EeReport> ee;
};

// Phased elimination with per-phase variance probes and weighted least
// squares. Requires a finite action set; runs until the step budget T is
// exhausted (probe pulls are charged to the trace like any other pull).
RunResult run_vase(Env& env, std::int64_t T, double delta, const VaseOptions& options = {});

// Ablation: identical phase schedule with the variance estimates pinned to 1
// and unweighted least squares. No probe pulls.
RunResult run_baseline_se(Env& env, std::int64_t T, double delta, const VaseOptions& options = {});

struct ValeeOptions {
  // Exact sigma_q_sq of the environment if the covariance is known; otherwise
  // it is estimated from basis-action probes.
  std::optional<double> known_sigma_q_sq;
  // Probe threshold for the unknown-covariance path; defaults to
  // d^{1/3 - 2/(3q)} ln(d/delta)^{1/3} / (T^{1/3} q^{1/3}).
  std::optional<double> tau;
  std::int64_t sr_step_cap = kDefaultStepCap;
};

// Norm-adaptive explore-then-exploit on the unit lp ball (p in (1, 2]):
// doubling rounds of median-of-means coordinate estimation until the norm
// estimate exceeds the shrinking threshold, then commits to the dual-optimal
// action of the final estimate.
RunResult run_valee(Env& env, std::int64_t T, double delta, const ValeeOptions& options = {});

// Fixed-allocation explore-then-commit: M pulls of every arm (basis actions
// on a ball), then the empirical best for the remaining budget.
RunResult run_explore_exploit(Env& env, std::int64_t T, std::int64_t M);

}  // namespace varbandit

#endif  // VARBANDIT_ALGORITHMS_HPP
