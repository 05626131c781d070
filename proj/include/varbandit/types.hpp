#ifndef VARBANDIT_TYPES_HPP
#define VARBANDIT_TYPES_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace varbandit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Holder exponent dual to p: q = p / (p - 1). Domain p in (1, 2], so q >= 2.
double dual_exponent(double p);

// ||v||_q for q >= 1 (q may be non-integer).
double lp_norm(const VectorXd& v, double q);

enum class SamplerKind { GaussianRejection, GaussianClip, PointMass };

// Finite list of actions, identified by index everywhere downstream.
struct FiniteActions {
  std::vector<VectorXd> actions;
};

// Unit lp ball acting as a continuous action set. p in (1, 2] so the dual
// exponent is finite and >= 2.
struct LpBall {
  int dim = 0;
  double p = 2.0;
};

class ActionSet {
 public:
  static ActionSet finite(std::vector<VectorXd> actions);
  static ActionSet lp_ball(int dim, double p);

  bool is_finite() const { return std::holds_alternative<FiniteActions>(v_); }
  int dim() const;
  // Number of listed actions; only valid for finite sets.
  int size() const;

  const FiniteActions& as_finite() const;
  const LpBall& as_ball() const;

 private:
  std::variant<FiniteActions, LpBall> v_;
};

// Distribution of the per-step parameter vector. theta_t has mean theta_star
// and covariance `covariance`; `sampler` decides how the |a' theta| <= 1
// protocol bound is enforced. bound_radius is that bound (1 for the standard
// protocol).
struct RewardModel {
  VectorXd theta_star;
  MatrixXd covariance;
  SamplerKind sampler = SamplerKind::GaussianRejection;
  double bound_radius = 1.0;

  // Throws std::invalid_argument on dimension mismatch, asymmetry, or an
  // indefinite covariance.
  void validate() const;
};

// One recorded pull. For finite sets action_id is the list index and
// `action` is left empty; continuous actions carry the full vector and
// action_id = -1.
struct TraceStep {
  std::int64_t t = 0;
  std::int64_t action_id = -1;
  VectorXd action;
  double reward = 0.0;
  double gap = 0.0;
  std::string phase;
};

class RunTrace {
 public:
  RunTrace() = default;
  RunTrace(std::string algorithm, std::uint64_t seed, std::uint64_t config_hash)
      : algorithm_(std::move(algorithm)), seed_(seed), config_hash_(config_hash) {}

  // Appends a step. Gaps in [-1e-12, 0) are treated as exact zeros; a gap
  // below -1e-12 indicates a broken optimality oracle and throws.
  void add(TraceStep step);

  std::int64_t size() const { return static_cast<std::int64_t>(steps_.size()); }
  const std::vector<TraceStep>& steps() const { return steps_; }
  const TraceStep& operator[](std::int64_t i) const { return steps_[static_cast<std::size_t>(i)]; }

  // Running sums of the gap column; cum_regret()[i] covers steps 0..i.
  std::vector<double> cum_regret() const;
  double final_regret() const { return total_gap_; }

  const std::string& algorithm() const { return algorithm_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t config_hash() const { return config_hash_; }

  void set_algorithm(std::string name) { algorithm_ = std::move(name); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void set_config_hash(std::uint64_t h) { config_hash_ = h; }

 private:
  std::vector<TraceStep> steps_;
  double total_gap_ = 0.0;
  std::string algorithm_;
  std::uint64_t seed_ = 0;
  std::uint64_t config_hash_ = 0;
};

// Instance-level quantities recorded alongside sweep rows.
struct Diagnostics {
  double sigma_q_sq = 0.0;        // (sum_i Sigma_ii^{q/2})^{2/q}
  double sigma_max_sq = 0.0;      // max_a a' Sigma a (bound for ball sets)
  double m_sigma = 0.0;           // min{sigma_max_sq, max_a ||a||_2^2 tr(Sigma)}
  double theta_star_dual_norm = 0.0;
};

}  // namespace varbandit

#endif  // VARBANDIT_TYPES_HPP
