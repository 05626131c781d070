#ifndef VARBANDIT_DESIGN_HPP
#define VARBANDIT_DESIGN_HPP

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "varbandit/types.hpp"

namespace varbandit {

// Thrown when a matrix that must be invertible is singular or conditioned
// worse than the guard threshold. Carries the numerical rank found.
class RankError : public std::runtime_error {
 public:
  RankError(int rank, int dim)
      : std::runtime_error("rank-deficient matrix: rank " + std::to_string(rank) +
                           " of " + std::to_string(dim)),
        rank_(rank),
        dim_(dim) {}
  int rank() const { return rank_; }
  int dim() const { return dim_; }

 private:
  int rank_;
  int dim_;
};

// Condition-number guard for information-matrix inversions. Elimination can
// leave nearly collinear survivors, so near-singularity is an expected error
// path, not an assert.
inline constexpr double kConditionGuard = 1e12;

// Sampling distribution over a finite action list: (index, weight) pairs with
// positive weights summing to 1.
struct Design {
  std::vector<std::pair<int, double>> support;

  double weight_sum() const;
  // Drops entries with weight < eps and renormalizes. Throws if nothing is left.
  void prune(double eps);
  // Throws std::invalid_argument if weights are not positive or do not sum to
  // 1 within tolerance, or an index repeats / is out of range.
  void validate(int num_actions) const;
};

// V(pi) = sum_a pi(a) a a'.
MatrixXd info_matrix(const Design& design, const std::vector<VectorXd>& actions);

// Inverse of a symmetric PSD matrix with the condition guard. Throws
// RankError when the smallest eigenvalue is <= lambda_max / kConditionGuard.
MatrixXd guarded_inverse(const MatrixXd& m);

// g(pi) = max_a a' V(pi)^{-1} a, the squared V^{-1}-norm maximized over the
// list. Throws RankError for singular V.
double g_value(const Design& design, const std::vector<VectorXd>& actions);

struct FrankWolfeResult {
  Design design;
  double g = 0.0;
  int iterations = 0;
  bool converged = false;          // reached target_g within max_iters
  std::vector<double> g_history;   // g after init and after every iteration
};

// Approximate G-optimal design by Frank-Wolfe on log det V. Initialized
// uniformly on a greedily chosen max-volume spanning subset; each iteration
// moves mass toward the worst-covered action with the closed-form step, then
// backtracks if that would increase g. Support stays small (the step adds at
// most one action per iteration). Throws RankError if the actions do not
// span.
FrankWolfeResult frank_wolfe_design(const std::vector<VectorXd>& actions,
                                    double target_g,
                                    int max_iters = 2000,
                                    double prune_eps = 1e-6);

// Finite eps-cover (in l2 distance) of the unit lp sphere. d = 1 gives
// {-1, +1}; d = 2 uses an angular grid; d >= 3 grids the cube surface and
// normalizes. Throws std::invalid_argument if the estimated point count
// exceeds max_points (the message carries the estimate).
std::vector<VectorXd> discretize_lp_ball(int d, double p, double eps,
                                         std::int64_t max_points = 4'000'000);

}  // namespace varbandit

#endif  // VARBANDIT_DESIGN_HPP
