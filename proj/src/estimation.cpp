#include "varbandit/estimation.hpp"

#include <algorithm>
#include <cmath>

#include "varbandit/design.hpp"

namespace varbandit {

SrResult stopping_rule_estimate(const std::function<double()>& sampler, double eps,
                                double delta, std::int64_t step_cap) {
  if (!(eps > 0.0) || !(eps < 1.0)) {
    throw std::invalid_argument("stopping_rule_estimate: eps must lie in (0, 1)");
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("stopping_rule_estimate: delta must lie in (0, 1)");
  }
  if (step_cap <= 0) throw std::invalid_argument("stopping_rule_estimate: step cap must be positive");

  constexpr double kFourEMinusTwo = 4.0 * (2.718281828459045235 - 2.0);
  const double gate = 1.0 + (1.0 + eps) * kFourEMinusTwo * std::log(2.0 / delta) / (eps * eps);

  double sum = 0.0;
  std::int64_t n = 0;
  while (sum < gate) {
    if (n >= step_cap) throw StepCapError(step_cap);
    const double x = sampler();
    if (x < -1e-12 || x > 1.0 + 1e-12) {
      throw std::invalid_argument("stopping_rule_estimate: sample outside [0, 1]");
    }
    sum += std::clamp(x, 0.0, 1.0);
    ++n;
  }
  return SrResult{gate / static_cast<double>(n), n};
}

double variance_probe_sample(double x1, double x2, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("variance_probe_sample: tau must be positive");
  const double diff = x1 - x2;
  return std::max(0.25 * diff * diff, 0.5 * tau);
}

VarianceEstimate estimate_action_variance(const std::function<double()>& pull, double tau,
                                          double delta_bar, double eps_bar,
                                          std::int64_t step_cap) {
  if (!(tau > 0.0)) throw std::invalid_argument("estimate_action_variance: tau must be positive");
  std::int64_t pulls = 0;
  auto probe = [&]() {
    const double x1 = pull();
    const double x2 = pull();
    pulls += 2;
    return variance_probe_sample(x1, x2, tau);
  };
  const SrResult sr = stopping_rule_estimate(probe, eps_bar, delta_bar, step_cap);
  return VarianceEstimate{sr.estimate, pulls};
}

double median_of_means(std::span<const double> block_means) {
  if (block_means.empty()) throw std::invalid_argument("median_of_means: empty input");
  std::vector<double> sorted(block_means.begin(), block_means.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted[(sorted.size() - 1) / 2];
}

VectorXd weighted_least_squares(std::span<const WlsObservation> obs) {
  if (obs.empty()) throw std::invalid_argument("weighted_least_squares: no observations");
  const auto d = obs.front().action.size();
  if (d == 0) throw std::invalid_argument("weighted_least_squares: empty action vector");
  MatrixXd v = MatrixXd::Zero(d, d);
  VectorXd b = VectorXd::Zero(d);
  for (const auto& o : obs) {
    if (o.action.size() != d) {
      throw std::invalid_argument("weighted_least_squares: inconsistent dimensions");
    }
    if (!(o.weight > 0.0)) {
      throw std::invalid_argument("weighted_least_squares: weights must be positive");
    }
    v.noalias() += o.weight * (o.action * o.action.transpose());
    b.noalias() += o.weight * o.reward * o.action;
  }
  return guarded_inverse(v) * b;
}

}  // namespace varbandit
