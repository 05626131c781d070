#include "varbandit/environments.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace varbandit {

namespace {
constexpr int kMaxRejectionAttempts = 1'000'000;
constexpr double kFeasibilityTol = 1e-9;
}  // namespace

VectorXd best_action_lp(const VectorXd& theta, double q) {
  if (!(q > 1.0)) throw std::invalid_argument("best_action_lp: q must exceed 1");
  const double m = theta.size() > 0 ? theta.cwiseAbs().maxCoeff() : 0.0;
  if (m == 0.0) throw std::invalid_argument("best_action_lp: theta must be nonzero");
  // Invariant under positive rescaling of theta; normalize for stable pow().
  const VectorXd scaled = theta / m;
  VectorXd powered(theta.size());
  for (int i = 0; i < theta.size(); ++i) {
    const double mag = std::pow(std::abs(scaled[i]), q - 1.0);
    powered[i] = scaled[i] >= 0.0 ? mag : -mag;
  }
  const double denom = std::pow(lp_norm(scaled, q), q - 1.0);
  return powered / denom;
}

double sigma_q_sq(const MatrixXd& sigma, double q) {
  if (!(q >= 1.0)) throw std::invalid_argument("sigma_q_sq: q must be >= 1");
  if (sigma.rows() != sigma.cols()) throw std::invalid_argument("sigma_q_sq: matrix must be square");
  double m = 0.0;
  for (int i = 0; i < sigma.rows(); ++i) {
    const double v = sigma(i, i);
    if (v < -1e-12) throw std::invalid_argument("sigma_q_sq: negative diagonal entry");
    m = std::max(m, v);
  }
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (int i = 0; i < sigma.rows(); ++i) {
    const double v = std::max(0.0, sigma(i, i)) / m;
    s += std::pow(v, 0.5 * q);
  }
  return m * std::pow(s, 2.0 / q);
}

double sigma_of_action(const MatrixXd& sigma, const VectorXd& a) {
  if (sigma.rows() != a.size() || sigma.cols() != a.size()) {
    throw std::invalid_argument("sigma_of_action: dimension mismatch");
  }
  return std::max(0.0, a.dot(sigma * a));
}

Env::Env(ActionSet actions, RewardModel model, RngStream rng)
    : actions_(std::move(actions)), model_(std::move(model)), rng_(rng) {
  model_.validate();
  if (model_.theta_star.size() != actions_.dim()) {
    throw std::invalid_argument("Env: model dimension does not match action set");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(model_.covariance);
  if (es.info() != Eigen::Success) throw std::invalid_argument("Env: covariance factorization failed");
  noise_transform_ =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  if (actions_.is_finite()) {
    dual_q_ = 2.0;
    const auto& list = actions_.as_finite().actions;
    best_value_ = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(list.size()); ++i) {
      const double v = list[static_cast<std::size_t>(i)].dot(model_.theta_star);
      if (v > best_value_) {
        best_value_ = v;
        best_index_ = i;
      }
    }
  } else {
    dual_q_ = dual_exponent(actions_.as_ball().p);
    best_value_ = lp_norm(model_.theta_star, dual_q_);
  }
}

double Env::sup_abs_reward(const VectorXd& theta) const {
  if (actions_.is_finite()) {
    double s = 0.0;
    for (const auto& a : actions_.as_finite().actions) {
      s = std::max(s, std::abs(a.dot(theta)));
    }
    return s;
  }
  return lp_norm(theta, dual_q_);
}

VectorXd Env::draw_theta() {
  switch (model_.sampler) {
    case SamplerKind::PointMass:
      return model_.theta_star;
    case SamplerKind::GaussianRejection: {
      for (int attempt = 0; attempt < kMaxRejectionAttempts; ++attempt) {
        VectorXd theta = model_.theta_star +
                         noise_transform_ * rng_.normal_vector(static_cast<int>(model_.theta_star.size()));
        if (sup_abs_reward(theta) <= model_.bound_radius) return theta;
      }
      throw std::runtime_error("Env: rejection sampler failed to accept; parameters violate the bound");
    }
    case SamplerKind::GaussianClip: {
      VectorXd theta = model_.theta_star +
                       noise_transform_ * rng_.normal_vector(static_cast<int>(model_.theta_star.size()));
      const double s = sup_abs_reward(theta);
      if (s > model_.bound_radius) theta *= model_.bound_radius / s;
      return theta;
    }
  }
  throw std::logic_error("Env: unknown sampler kind");
}

double Env::pull(int action_index) {
  if (!actions_.is_finite()) throw std::logic_error("Env: index pull on a continuous set");
  const auto& list = actions_.as_finite().actions;
  if (action_index < 0 || action_index >= static_cast<int>(list.size())) {
    throw std::invalid_argument("Env: action index out of range");
  }
  ++pulls_;
  return list[static_cast<std::size_t>(action_index)].dot(draw_theta());
}

double Env::pull(const VectorXd& action) {
  if (actions_.is_finite()) throw std::logic_error("Env: vector pull on a finite set");
  if (action.size() != actions_.dim()) throw std::invalid_argument("Env: action dimension mismatch");
  if (lp_norm(action, actions_.as_ball().p) > 1.0 + kFeasibilityTol) {
    throw std::invalid_argument("Env: action outside the unit ball");
  }
  ++pulls_;
  return action.dot(draw_theta());
}

double Env::gap(int action_index) const {
  if (!actions_.is_finite()) throw std::logic_error("Env: index gap on a continuous set");
  const auto& list = actions_.as_finite().actions;
  if (action_index < 0 || action_index >= static_cast<int>(list.size())) {
    throw std::invalid_argument("Env: action index out of range");
  }
  return best_value_ - list[static_cast<std::size_t>(action_index)].dot(model_.theta_star);
}

double Env::gap(const VectorXd& action) const {
  if (action.size() != actions_.dim()) throw std::invalid_argument("Env: action dimension mismatch");
  return best_value_ - action.dot(model_.theta_star);
}

int Env::best_index() const {
  if (!actions_.is_finite()) throw std::logic_error("Env: best_index on a continuous set");
  return best_index_;
}

Diagnostics Env::diagnostics() const {
  Diagnostics d;
  d.sigma_q_sq = sigma_q_sq(model_.covariance, dual_q_);
  d.theta_star_dual_norm = lp_norm(model_.theta_star, dual_q_);
  const double trace = model_.covariance.trace();
  if (actions_.is_finite()) {
    double smax = 0.0;
    double nmax = 0.0;
    for (const auto& a : actions_.as_finite().actions) {
      smax = std::max(smax, sigma_of_action(model_.covariance, a));
      nmax = std::max(nmax, a.squaredNorm());
    }
    d.sigma_max_sq = smax;
    d.m_sigma = std::min(smax, nmax * trace);
  } else {
    // p <= 2 puts the ball inside the l2 ball, so lambda_max bounds a'Sigma a;
    // the basis actions attain ||a||_2 = 1.
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(model_.covariance);
    const double lmax = es.eigenvalues().maxCoeff();
    d.sigma_max_sq = lmax;
    d.m_sigma = std::min(lmax, trace);
  }
  return d;
}

std::pair<Env, LowerBoundInstance> make_lower_bound_env(int d, double sigma_sq,
                                                        std::int64_t T, double q,
                                                        LbConstruction construction,
                                                        std::uint64_t seed) {
  if (d <= 0) throw std::invalid_argument("make_lower_bound_env: d must be positive");
  if (!(sigma_sq > 0.0)) throw std::invalid_argument("make_lower_bound_env: sigma_sq must be positive");
  if (T <= 0) throw std::invalid_argument("make_lower_bound_env: T must be positive");

  RngStream xi_stream = derive_rng_stream(seed, 0);
  RngStream env_stream = derive_rng_stream(seed, 1);
  VectorXd xi(d);
  for (int i = 0; i < d; ++i) xi[i] = xi_stream.rademacher();

  const double sigma = std::sqrt(sigma_sq);
  LowerBoundInstance inst;
  inst.construction = construction;
  inst.xi = xi;
  inst.q = q;
  inst.sigma_sq_requested = sigma_sq;

  if (construction == LbConstruction::PLe2) {
    if (!(q >= 2.0)) throw std::invalid_argument("make_lower_bound_env: PLe2 requires q >= 2");
    const double dd = static_cast<double>(d);
    inst.epsilon = std::pow(dd, 0.5 - 1.0 / q) * sigma / (2.0 * std::sqrt(2.0 * static_cast<double>(T)));
    inst.theta_star = inst.epsilon * xi;
    inst.covariance = (sigma_sq / std::pow(dd, 2.0 / q)) * MatrixXd::Identity(d, d);
    inst.sigma_sq_effective = sigma_sq;
    if (lp_norm(inst.theta_star, q) > 1.0) {
      throw std::invalid_argument("make_lower_bound_env: mean scale exceeds the reward bound");
    }
    const double p = q / (q - 1.0);
    RewardModel model;
    model.theta_star = inst.theta_star;
    model.covariance = inst.covariance;
    model.sampler = SamplerKind::GaussianRejection;
    Env env(ActionSet::lp_ball(d, p), std::move(model), env_stream);
    return {std::move(env), std::move(inst)};
  }

  // PGt2: dimension d + 1 over +-basis actions, rewards rescaled by 1/2.
  if (!(q >= 1.0) || !(q < 2.0)) throw std::invalid_argument("make_lower_bound_env: PGt2 requires q in [1, 2)");
  const double dd = static_cast<double>(d);
  constexpr double kHardnessConstant = 73.0;
  inst.epsilon = std::pow(sigma / (kHardnessConstant * std::sqrt(static_cast<double>(T))), 1.0 / q);
  inst.relaxed_fidelity =
      static_cast<double>(T) < std::pow(dd, 4.0 / (2.0 - q));

  VectorXd theta_pre(d + 1);
  theta_pre[0] = 1.0;
  for (int i = 0; i < d; ++i) theta_pre[i + 1] = inst.epsilon * xi[i];
  if (lp_norm(theta_pre, q) > 2.0) {
    throw std::invalid_argument("make_lower_bound_env: mean scale exceeds the reward bound");
  }
  VectorXd diag_pre(d + 1);
  diag_pre[0] = sigma_sq / 2.0;
  for (int i = 0; i < d; ++i) diag_pre[i + 1] = sigma_sq / (2.0 * std::pow(dd, 2.0 / q));

  inst.theta_star = 0.5 * theta_pre;
  inst.covariance = (0.25 * diag_pre).asDiagonal();
  inst.sigma_sq_effective = 0.25 * sigma_sq;

  std::vector<VectorXd> actions;
  actions.reserve(2 * static_cast<std::size_t>(d + 1));
  for (int i = 0; i < d + 1; ++i) {
    VectorXd e = VectorXd::Zero(d + 1);
    e[i] = 1.0;
    actions.push_back(e);
    actions.push_back(-e);
  }
  RewardModel model;
  model.theta_star = inst.theta_star;
  model.covariance = inst.covariance;
  model.sampler = SamplerKind::GaussianRejection;
  Env env(ActionSet::finite(std::move(actions)), std::move(model), env_stream);
  return {std::move(env), std::move(inst)};
}

Env env_from_instance(const LowerBoundInstance& instance, RngStream noise) {
  RewardModel model;
  model.theta_star = instance.theta_star;
  model.covariance = instance.covariance;
  model.sampler = SamplerKind::GaussianRejection;
  if (instance.construction == LbConstruction::PLe2) {
    const double p = instance.q / (instance.q - 1.0);
    return Env(ActionSet::lp_ball(static_cast<int>(instance.theta_star.size()), p),
               std::move(model), noise);
  }
  const int ambient = static_cast<int>(instance.theta_star.size());
  std::vector<VectorXd> actions;
  actions.reserve(2 * static_cast<std::size_t>(ambient));
  for (int i = 0; i < ambient; ++i) {
    VectorXd e = VectorXd::Zero(ambient);
    e[i] = 1.0;
    actions.push_back(e);
    actions.push_back(-e);
  }
  return Env(ActionSet::finite(std::move(actions)), std::move(model), noise);
}

}  // namespace varbandit
