#include "varbandit/types.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace varbandit {

double dual_exponent(double p) {
  if (!(p > 1.0) || !(p <= 2.0)) {
    throw std::domain_error("dual_exponent: p must lie in (1, 2]");
  }
  return p / (p - 1.0);
}

double lp_norm(const VectorXd& v, double q) {
  if (!(q >= 1.0)) throw std::domain_error("lp_norm: q must be >= 1");
  if (v.size() == 0) return 0.0;
  // Scale out the max to keep pow() away from under/overflow.
  const double m = v.cwiseAbs().maxCoeff();
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) {
    s += std::pow(std::abs(v[i]) / m, q);
  }
  return m * std::pow(s, 1.0 / q);
}

ActionSet ActionSet::finite(std::vector<VectorXd> actions) {
  if (actions.empty()) throw std::invalid_argument("ActionSet: empty action list");
  const auto d = actions.front().size();
  if (d == 0) throw std::invalid_argument("ActionSet: zero-dimensional actions");
  for (const auto& a : actions) {
    if (a.size() != d) throw std::invalid_argument("ActionSet: inconsistent action dimensions");
  }
  ActionSet s;
  s.v_ = FiniteActions{std::move(actions)};
  return s;
}

ActionSet ActionSet::lp_ball(int dim, double p) {
  if (dim <= 0) throw std::invalid_argument("ActionSet: ball dimension must be positive");
  if (!(p > 1.0) || !(p <= 2.0)) {
    throw std::invalid_argument("ActionSet: ball exponent p must lie in (1, 2]");
  }
  ActionSet s;
  s.v_ = LpBall{dim, p};
  return s;
}

int ActionSet::dim() const {
  if (is_finite()) return static_cast<int>(as_finite().actions.front().size());
  return as_ball().dim;
}

int ActionSet::size() const {
  if (!is_finite()) throw std::logic_error("ActionSet: size() on a continuous set");
  return static_cast<int>(as_finite().actions.size());
}

const FiniteActions& ActionSet::as_finite() const {
  if (!is_finite()) throw std::logic_error("ActionSet: not a finite set");
  return std::get<FiniteActions>(v_);
}

const LpBall& ActionSet::as_ball() const {
  if (is_finite()) throw std::logic_error("ActionSet: not a ball");
  return std::get<LpBall>(v_);
}

void RewardModel::validate() const {
  const auto d = theta_star.size();
  if (d == 0) throw std::invalid_argument("RewardModel: empty theta_star");
  if (covariance.rows() != d || covariance.cols() != d) {
    throw std::invalid_argument("RewardModel: covariance shape does not match theta_star");
  }
  if (!(bound_radius > 0.0)) throw std::invalid_argument("RewardModel: bound_radius must be positive");
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("RewardModel: covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(covariance);
  if (es.info() != Eigen::Success) {
    throw std::invalid_argument("RewardModel: covariance eigendecomposition failed");
  }
  if (es.eigenvalues().minCoeff() < -1e-9 * scale) {
    throw std::invalid_argument("RewardModel: covariance is not positive semidefinite");
  }
}

void RunTrace::add(TraceStep step) {
  if (step.gap < 0.0) {
    if (step.gap < -1e-12) {
      throw std::logic_error("RunTrace: negative gap beyond tolerance");
    }
    step.gap = 0.0;
  }
  total_gap_ += step.gap;
  steps_.push_back(std::move(step));
}

std::vector<double> RunTrace::cum_regret() const {
  std::vector<double> out;
  out.reserve(steps_.size());
  double s = 0.0;
  for (const auto& st : steps_) {
    s += st.gap;
    out.push_back(s);
  }
  return out;
}

}  // namespace varbandit
