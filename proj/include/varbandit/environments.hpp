#ifndef VARBANDIT_ENVIRONMENTS_HPP
#define VARBANDIT_ENVIRONMENTS_HPP

#include <cstdint>
#include <utility>

#include <Eigen/Dense>

#include "varbandit/rng.hpp"
#include "varbandit/types.hpp"

namespace varbandit {

// Action maximizing a' theta over the unit lp ball with dual exponent q:
//   a_i = sign(theta_i) |theta_i|^{q-1} / ||theta||_q^{q-1},
// so that ||a||_p = 1 and a' theta = ||theta||_q. Requires q > 1 and a
// nonzero theta (throws std::invalid_argument otherwise).
VectorXd best_action_lp(const VectorXd& theta, double q);

// (sum_i Sigma_ii^{q/2})^{2/q} for q >= 1. Diagonal entries below -1e-12
// throw; tiny negatives are clamped to zero.
double sigma_q_sq(const MatrixXd& sigma, double q);

// a' Sigma a, clamped at zero.
double sigma_of_action(const MatrixXd& sigma, const VectorXd& a);

// Parameter-noise bandit environment: each pull draws theta_t with mean
// theta_star and covariance Sigma (enforcing |a' theta_t| <= bound_radius per
// the sampler kind) and returns a' theta_t. Pulls advance the internal
// stream, so a (seed, pull sequence) pair fixes every reward.
class Env {
 public:
  Env(ActionSet actions, RewardModel model, RngStream rng);

  // Finite sets only.
  double pull(int action_index);
  // Continuous sets only; requires ||a||_p <= 1 + 1e-9.
  double pull(const VectorXd& action);

  // Mean-gap oracle: max_b b' theta_star - a' theta_star over the action set.
  double gap(int action_index) const;
  double gap(const VectorXd& action) const;

  // Largest mean reward over the action set.
  double best_value() const { return best_value_; }
  // For finite sets, the lowest-index maximizer.
  int best_index() const;

  const ActionSet& actions() const { return actions_; }
  const RewardModel& model() const { return model_; }
  std::int64_t pulls() const { return pulls_; }
  // Dual exponent used for gap and diagnostics: dual_exponent(p) for balls,
  // 2 for finite sets.
  double dual_q() const { return dual_q_; }

  Diagnostics diagnostics() const;

 private:
  VectorXd draw_theta();
  double sup_abs_reward(const VectorXd& theta) const;

  ActionSet actions_;
  RewardModel model_;
  RngStream rng_;
  MatrixXd noise_transform_;  // Sigma^{1/2}
  double dual_q_ = 2.0;
  double best_value_ = 0.0;
  int best_index_ = -1;
  std::int64_t pulls_ = 0;
};

enum class LbConstruction { PLe2, PGt2 };

// Near-worst-case instance descriptor. theta_star / covariance are the
// effective (post-rescale) parameters the environment runs with.
struct LowerBoundInstance {
  LbConstruction construction = LbConstruction::PLe2;
  VectorXd xi;                     // sign pattern drawn from the seed
  double epsilon = 0.0;            // mean scale before any rescale
  VectorXd theta_star;
  MatrixXd covariance;
  double q = 2.0;
  double sigma_sq_requested = 0.0;
  double sigma_sq_effective = 0.0;  // PGt2 rescales rewards by 1/2, variance by 1/4
  bool relaxed_fidelity = false;    // horizon below the construction's nominal range
};

// Builds a hard instance for horizon T.
//
// PLe2 (q >= 2): unit lp-ball actions with p dual to q; theta_star =
// epsilon * xi with epsilon = d^{1/2 - 1/q} sigma / (2 sqrt(2 T)) and
// covariance (sigma^2 / d^{2/q}) I, so sigma_q_sq == sigma^2 exactly.
//
// PGt2 (q in [1, 2)): dimension d+1 over the +-basis actions; first
// coordinate mean 1, remaining means epsilon * xi with epsilon^q =
// sigma / (73 sqrt(T)); covariance diag(sigma^2/2, sigma^2/(2 d^{2/q}) I).
// All rewards are rescaled by 1/2 to satisfy the protocol bound, so the
// effective sigma^2 is the requested value / 4.
std::pair<Env, LowerBoundInstance> make_lower_bound_env(int d, double sigma_sq,
                                                        std::int64_t T, double q,
                                                        LbConstruction construction,
                                                        std::uint64_t seed);

// Rebuilds the environment for a fixed instance with a fresh noise stream,
// so the same hard instance can be replayed under different run seeds.
Env env_from_instance(const LowerBoundInstance& instance, RngStream noise);

}  // namespace varbandit

#endif  // VARBANDIT_ENVIRONMENTS_HPP
