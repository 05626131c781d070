#include "varbandit/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Eigenvalues>

namespace varbandit {

double Design::weight_sum() const {
  double s = 0.0;
  for (const auto& [idx, w] : support) s += w;
  return s;
}

void Design::prune(double eps) {
  std::vector<std::pair<int, double>> kept;
  kept.reserve(support.size());
  for (const auto& e : support) {
    if (e.second >= eps) kept.push_back(e);
  }
  if (kept.empty()) throw std::invalid_argument("Design::prune: all weights below threshold");
  double s = 0.0;
  for (const auto& e : kept) s += e.second;
  for (auto& e : kept) e.second /= s;
  support = std::move(kept);
}

void Design::validate(int num_actions) const {
  if (support.empty()) throw std::invalid_argument("Design: empty support");
  std::set<int> seen;
  double s = 0.0;
  for (const auto& [idx, w] : support) {
    if (idx < 0 || idx >= num_actions) throw std::invalid_argument("Design: index out of range");
    if (!seen.insert(idx).second) throw std::invalid_argument("Design: repeated index");
    if (!(w > 0.0)) throw std::invalid_argument("Design: weights must be positive");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("Design: weights must sum to 1");
}

MatrixXd info_matrix(const Design& design, const std::vector<VectorXd>& actions) {
  if (actions.empty()) throw std::invalid_argument("info_matrix: empty action list");
  const int d = static_cast<int>(actions.front().size());
  MatrixXd v = MatrixXd::Zero(d, d);
  for (const auto& [idx, w] : design.support) {
    const VectorXd& a = actions.at(static_cast<std::size_t>(idx));
    v.noalias() += w * (a * a.transpose());
  }
  return v;
}

MatrixXd guarded_inverse(const MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw RankError(0, d);
  const VectorXd& ev = es.eigenvalues();
  const double lmax = ev.maxCoeff();
  if (!(lmax > 0.0)) throw RankError(0, d);
  const double floor = lmax / kConditionGuard;
  int rank = 0;
  for (int i = 0; i < d; ++i) {
    if (ev[i] > floor) ++rank;
  }
  if (rank < d) throw RankError(rank, d);
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

namespace {

// Max of a' Vinv a over rows of `mat` (actions stacked as rows).
double max_leverage(const MatrixXd& mat, const MatrixXd& vinv, int* argmax) {
  const MatrixXd prod = mat * vinv;
  double best = -1.0;
  int best_i = 0;
  for (int i = 0; i < mat.rows(); ++i) {
    const double s = prod.row(i).dot(mat.row(i));
    if (s > best) {
      best = s;
      best_i = i;
    }
  }
  if (argmax != nullptr) *argmax = best_i;
  return best;
}

// Greedy max-volume selection of a spanning subset: repeatedly picks the
// action with the largest component orthogonal to the span so far.
std::vector<int> greedy_spanning_subset(const std::vector<VectorXd>& actions, int d) {
  std::vector<int> chosen;
  std::vector<VectorXd> basis;  // orthonormal
  for (int step = 0; step < d; ++step) {
    double best_norm = 0.0;
    int best_i = -1;
    VectorXd best_resid;
    for (int i = 0; i < static_cast<int>(actions.size()); ++i) {
      VectorXd r = actions[static_cast<std::size_t>(i)];
      for (const auto& b : basis) r -= b.dot(r) * b;
      const double n = r.norm();
      if (n > best_norm) {
        best_norm = n;
        best_i = i;
        best_resid = std::move(r);
      }
    }
    if (best_i < 0 || best_norm <= 1e-12) {
      throw RankError(static_cast<int>(chosen.size()), d);
    }
    chosen.push_back(best_i);
    basis.push_back(best_resid / best_norm);
  }
  return chosen;
}

}  // namespace

double g_value(const Design& design, const std::vector<VectorXd>& actions) {
  design.validate(static_cast<int>(actions.size()));
  const MatrixXd vinv = guarded_inverse(info_matrix(design, actions));
  const int d = static_cast<int>(actions.front().size());
  MatrixXd mat(actions.size(), d);
  for (std::size_t i = 0; i < actions.size(); ++i) mat.row(static_cast<int>(i)) = actions[i];
  return max_leverage(mat, vinv, nullptr);
}

FrankWolfeResult frank_wolfe_design(const std::vector<VectorXd>& actions,
                                    double target_g,
                                    int max_iters,
                                    double prune_eps) {
  if (actions.empty()) throw std::invalid_argument("frank_wolfe_design: empty action list");
  if (!(target_g > 0.0)) throw std::invalid_argument("frank_wolfe_design: target_g must be positive");
  const int d = static_cast<int>(actions.front().size());
  const int k = static_cast<int>(actions.size());

  MatrixXd mat(k, d);
  for (int i = 0; i < k; ++i) mat.row(i) = actions[static_cast<std::size_t>(i)];

  // Dense weights during the iteration; sparse support extracted at the end.
  std::vector<double> w(static_cast<std::size_t>(k), 0.0);
  const std::vector<int> seed_set = greedy_spanning_subset(actions, d);
  for (int idx : seed_set) w[static_cast<std::size_t>(idx)] = 1.0 / static_cast<double>(d);

  MatrixXd v = MatrixXd::Zero(d, d);
  for (int i = 0; i < k; ++i) {
    if (w[static_cast<std::size_t>(i)] > 0.0) {
      v.noalias() += w[static_cast<std::size_t>(i)] * (mat.row(i).transpose() * mat.row(i));
    }
  }

  FrankWolfeResult res;
  int worst = 0;
  double g = max_leverage(mat, guarded_inverse(v), &worst);
  res.g_history.push_back(g);

  int it = 0;
  for (; it < max_iters && g > target_g; ++it) {
    // Closed-form step for the D-optimal objective; backtrack if g would rise.
    double gamma = (g - d) / (d * (g - 1.0));
    if (!(gamma > 0.0)) break;
    const VectorXd a = mat.row(worst).transpose();
    bool accepted = false;
    MatrixXd v_next;
    double g_next = 0.0;
    int worst_next = 0;
    for (int halvings = 0; halvings < 60; ++halvings) {
      v_next = (1.0 - gamma) * v + gamma * (a * a.transpose());
      g_next = max_leverage(mat, guarded_inverse(v_next), &worst_next);
      if (g_next <= g + 1e-12) {
        accepted = true;
        break;
      }
      gamma *= 0.5;
    }
    if (!accepted) break;
    for (auto& wi : w) wi *= (1.0 - gamma);
    w[static_cast<std::size_t>(worst)] += gamma;
    v = std::move(v_next);
    g = g_next;
    worst = worst_next;
    res.g_history.push_back(g);
  }

  Design dsn;
  for (int i = 0; i < k; ++i) {
    if (w[static_cast<std::size_t>(i)] > 0.0) dsn.support.emplace_back(i, w[static_cast<std::size_t>(i)]);
  }
  dsn.prune(prune_eps);
  res.design = std::move(dsn);
  res.g = g_value(res.design, actions);
  res.iterations = it;
  res.converged = res.g <= target_g + 1e-9;
  return res;
}

namespace {

// Lipschitz bound for x -> x / ||x||_p from the source sphere (l2 circle for
// d = 2, cube surface for d >= 3) onto the lp sphere.
double normalize_lipschitz(int d, double p) {
  if (d == 2) {
    if (p == 2.0) return 1.0;
    return (p < 2.0) ? (1.0 + std::sqrt(2.0)) : 3.0;
  }
  const double e = std::max(0.5, 1.0 / p);
  return 1.0 + std::pow(static_cast<double>(d), e);
}

}  // namespace

std::vector<VectorXd> discretize_lp_ball(int d, double p, double eps, std::int64_t max_points) {
  if (d <= 0) throw std::invalid_argument("discretize_lp_ball: d must be positive");
  if (!(p >= 1.0)) throw std::invalid_argument("discretize_lp_ball: p must be >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("discretize_lp_ball: eps must be positive");

  std::vector<VectorXd> out;
  if (d == 1) {
    VectorXd plus(1), minus(1);
    plus[0] = 1.0;
    minus[0] = -1.0;
    out.push_back(minus);
    out.push_back(plus);
    return out;
  }

  if (d == 2) {
    const double r = std::min(1.0, eps / (2.0 * normalize_lipschitz(2, p)));
    const auto count = static_cast<std::int64_t>(std::ceil(M_PI / std::asin(r)));
    if (count > max_points) {
      throw std::invalid_argument("discretize_lp_ball: estimated " + std::to_string(count) +
                                  " points exceeds cap " + std::to_string(max_points));
    }
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
      const double th = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(count);
      VectorXd z(2);
      z << std::cos(th), std::sin(th);
      out.push_back(z / lp_norm(z, p));
    }
    return out;
  }

  // Cube-surface grid, normalized to the lp sphere. A face grid with cell
  // half-diagonal <= eps / L covers the surface tightly enough that the
  // normalized images cover the sphere at radius eps.
  const double r = eps / normalize_lipschitz(d, p);
  const double h = 2.0 * r / std::sqrt(static_cast<double>(d - 1));
  const auto n = static_cast<std::int64_t>(std::ceil(2.0 / h)) + 1;
  double est = 2.0 * static_cast<double>(d);
  for (int i = 0; i < d - 1; ++i) est *= static_cast<double>(n);
  if (est > static_cast<double>(max_points)) {
    throw std::invalid_argument("discretize_lp_ball: estimated " +
                                std::to_string(static_cast<std::int64_t>(est)) +
                                " points exceeds cap " + std::to_string(max_points));
  }

  std::vector<double> grid(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    grid[static_cast<std::size_t>(i)] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  }

  std::set<std::vector<double>> seen;
  std::vector<std::int64_t> digits(static_cast<std::size_t>(d - 1), 0);
  for (int axis = 0; axis < d; ++axis) {
    for (double sign : {-1.0, 1.0}) {
      std::fill(digits.begin(), digits.end(), 0);
      while (true) {
        VectorXd x(d);
        x[axis] = sign;
        int j = 0;
        for (int c = 0; c < d; ++c) {
          if (c == axis) continue;
          x[c] = grid[static_cast<std::size_t>(digits[static_cast<std::size_t>(j)])];
          ++j;
        }
        VectorXd u = x / lp_norm(x, p);
        std::vector<double> key(u.data(), u.data() + d);
        if (seen.insert(key).second) out.push_back(std::move(u));
        int carry = d - 2;
        while (carry >= 0) {
          if (++digits[static_cast<std::size_t>(carry)] < n) break;
          digits[static_cast<std::size_t>(carry)] = 0;
          --carry;
        }
        if (carry < 0) break;
      }
    }
  }
  return out;
}

}  // namespace varbandit
