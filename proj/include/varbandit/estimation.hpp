#ifndef VARBANDIT_ESTIMATION_HPP
#define VARBANDIT_ESTIMATION_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "varbandit/types.hpp"

namespace varbandit {

// Thrown when a sequential estimator would exceed its hard step cap. Signals
// a mis-specified call (e.g. mean far smaller than the error target allows).
class StepCapError : public std::runtime_error {
 public:
  explicit StepCapError(std::int64_t cap)
      : std::runtime_error("sequential estimator exceeded step cap " + std::to_string(cap)) {}
};

struct SrResult {
  double estimate = 0.0;
  std::int64_t steps = 0;
};

inline constexpr std::int64_t kDefaultStepCap = 1'000'000'000;

// Multiplicative-error mean estimate for samples in [0, 1] with positive
// mean: draws until the running sum reaches
//   gate = 1 + (1 + eps) * 4(e-2) * ln(2/delta) / eps^2
// and returns gate / steps. Guarantees |estimate - mu| <= eps * mu with
// probability >= 1 - delta, using about gate / mu samples. Sampler outputs
// outside [0, 1] (beyond 1e-12) throw std::invalid_argument.
SrResult stopping_rule_estimate(const std::function<double()>& sampler, double eps,
                                double delta, std::int64_t step_cap = kDefaultStepCap);

// One paired-difference variance sample from two pulls of the same action:
//   z = max{ (x1 - x2)^2 / 4, tau / 2 }.
// E[z] is sandwiched between max{tau, sigma^2(a)} / 2 and
// (sigma^2(a) + tau) / 2, which the floor makes SR-estimable.
double variance_probe_sample(double x1, double x2, double tau);

struct VarianceEstimate {
  double value = 0.0;       // estimate of sigma^2(a) up to the probe sandwich
  std::int64_t steps = 0;   // bandit pulls consumed (2 per probe sample)
};

// Runs the stopping rule over paired-difference probe samples. `pull` must
// return one reward for the fixed action under estimation; every call costs
// one bandit step. With eps_bar = 1/2 the result lies in
// [max{tau, sigma^2}/4, 3(sigma^2 + tau)/4] with probability >= 1 - delta_bar.
VarianceEstimate estimate_action_variance(const std::function<double()>& pull, double tau,
                                          double delta_bar, double eps_bar,
                                          std::int64_t step_cap = kDefaultStepCap);

// Lower median of the block values (index (n-1)/2 of the sorted list).
// Throws std::invalid_argument on an empty input.
double median_of_means(std::span<const double> block_means);

struct WlsObservation {
  VectorXd action;
  double weight = 1.0;
  double reward = 0.0;
};

// Solves min_theta sum_s w_s (reward_s - action_s' theta)^2 via the normal
// equations with the guarded inverse. Throws RankError when the weighted
// actions do not span, std::invalid_argument on nonpositive weights.
VectorXd weighted_least_squares(std::span<const WlsObservation> obs);

}  // namespace varbandit

#endif  // VARBANDIT_ESTIMATION_HPP
