#pragma once

#include <Eigen/Dense>
#include <vector>

namespace sparsebandit {

// One row of a weighted least-squares design: weight * (x'beta - reward)^2.
struct WeightedSample {
  double weight = 1.0;
  Eigen::VectorXd x;
  double reward = 0.0;
};

// minimize_beta  sum_i w_i (x_i'beta - r_i)^2 + lambda * ||beta||_1
//
// The quadratic part is a weighted SUM, not an average. Callers wanting an
// averaged loss (1/n) sum (...)^2 pass weights 1/n; lambda is never rescaled
// internally.
struct WeightedLassoProblem {
  std::vector<WeightedSample> samples;
  double lambda = 1.0;

  int dim() const { return samples.empty() ? 0 : static_cast<int>(samples.front().x.size()); }
  // Throws std::invalid_argument on: lambda <= 0, a negative weight, a
  // dimension mismatch, or no sample with strictly positive weight.
  void validate() const;
};

// S(z, g) = sign(z) * max(|z| - g, 0).
double soft_threshold(double z, double gamma);

// Sufficient statistics of the weighted quadratic loss:
//   gram   = sum_i w_i x_i x_i'
//   moment = sum_i w_i r_i x_i
//   offset = sum_i w_i r_i^2
// sum_i w_i (x_i'b - r_i)^2 = b'(gram)b - 2 moment'b + offset.
//
// add_sample is O(d^2), which is what makes refit-every-round policies cheap:
// the solve cost is independent of how many rows have been absorbed.
class LassoQuadratic {
 public:
  explicit LassoQuadratic(int dim)
      : gram_(Eigen::MatrixXd::Zero(dim, dim)), moment_(Eigen::VectorXd::Zero(dim)) {}

  void add_sample(double weight, const Eigen::VectorXd& x, double reward);
  static LassoQuadratic from_problem(const WeightedLassoProblem& p);

  int dim() const { return static_cast<int>(moment_.size()); }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::VectorXd& moment() const { return moment_; }
  double offset() const { return offset_; }
  double positive_weight() const { return positive_weight_; }

  // Returns a copy with gram/moment/offset multiplied by c (weights scaled).
  LassoQuadratic scaled(double c) const;

  double quadratic_value(const Eigen::VectorXd& beta) const;
  double objective(const Eigen::VectorXd& beta, double lambda) const;
  // 2 * (gram * beta - moment), the gradient of the quadratic part.
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;

 private:
  Eigen::MatrixXd gram_;
  Eigen::VectorXd moment_;
  double offset_ = 0.0;
  double positive_weight_ = 0.0;
};

struct LassoOptions {
  double tol = 1e-8;      // bound enforced on the KKT violation at the solution
  int max_iter = 100000;  // coordinate-descent sweeps
};

struct LassoSolution {
  Eigen::VectorXd beta;
  double objective = 0.0;
  double kkt_violation = 0.0;
  int iterations = 0;   // sweeps performed
  bool converged = false;
};

// Max stationarity slack of the subgradient conditions, with g = gradient(beta):
//   beta_j != 0:  |g_j + lambda * sign(beta_j)|
//   beta_j == 0:  max(0, |g_j| - lambda)
double kkt_violation(const LassoQuadratic& q, const Eigen::VectorXd& beta, double lambda);

// Cyclic coordinate descent with active-set sweeps. Deterministic: coordinates
// are visited in index order, so equal inputs give bitwise-equal output.
// Coordinates with zero curvature (gram diagonal 0) are pinned to 0.
// When max_iter sweeps cannot certify kkt_violation <= tol, the best iterate
// is returned with converged = false; callers decide whether that is fatal.
LassoSolution solve(const LassoQuadratic& q, double lambda, const LassoOptions& opts = {},
                    const Eigen::VectorXd* warm_start = nullptr);
LassoSolution solve(const WeightedLassoProblem& p, const LassoOptions& opts = {},
                    const Eigen::VectorXd* warm_start = nullptr);

// Exact objective evaluated from the raw samples (no Gram round-trip).
double objective(const WeightedLassoProblem& p, const Eigen::VectorXd& beta);

}  // namespace sparsebandit
