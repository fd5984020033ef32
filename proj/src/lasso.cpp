#include "sparsebandit/lasso.hpp"

#include <cmath>
#include <stdexcept>

namespace sparsebandit {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

void WeightedLassoProblem::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("lasso: lambda must be > 0");
  if (samples.empty()) throw std::invalid_argument("lasso: no samples");
  const auto d = samples.front().x.size();
  if (d == 0) throw std::invalid_argument("lasso: zero-dimensional features");
  bool any_positive = false;
  for (const auto& s : samples) {
    if (s.x.size() != d) throw std::invalid_argument("lasso: inconsistent feature dimensions");
    if (s.weight < 0.0 || !std::isfinite(s.weight))
      throw std::invalid_argument("lasso: weights must be finite and >= 0");
    if (s.weight > 0.0) any_positive = true;
  }
  if (!any_positive) throw std::invalid_argument("lasso: need at least one positive weight");
}

void LassoQuadratic::add_sample(double weight, const Eigen::VectorXd& x, double reward) {
  if (x.size() != moment_.size())
    throw std::invalid_argument("lasso: sample dimension mismatch");
  if (weight < 0.0 || !std::isfinite(weight))
    throw std::invalid_argument("lasso: weights must be finite and >= 0");
  if (weight == 0.0) return;
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(x, weight);
  gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
  moment_ += (weight * reward) * x;
  offset_ += weight * reward * reward;
  positive_weight_ += weight;
}

LassoQuadratic LassoQuadratic::from_problem(const WeightedLassoProblem& p) {
  p.validate();
  LassoQuadratic q(p.dim());
  for (const auto& s : p.samples) q.add_sample(s.weight, s.x, s.reward);
  return q;
}

LassoQuadratic LassoQuadratic::scaled(double c) const {
  LassoQuadratic q = *this;
  q.gram_ *= c;
  q.moment_ *= c;
  q.offset_ *= c;
  q.positive_weight_ *= c;
  return q;
}

double LassoQuadratic::quadratic_value(const Eigen::VectorXd& beta) const {
  return beta.dot(gram_ * beta) - 2.0 * moment_.dot(beta) + offset_;
}

double LassoQuadratic::objective(const Eigen::VectorXd& beta, double lambda) const {
  return quadratic_value(beta) + lambda * beta.lpNorm<1>();
}

Eigen::VectorXd LassoQuadratic::gradient(const Eigen::VectorXd& beta) const {
  return 2.0 * (gram_ * beta - moment_);
}

double kkt_violation(const LassoQuadratic& q, const Eigen::VectorXd& beta, double lambda) {
  const Eigen::VectorXd g = q.gradient(beta);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    double v;
    if (beta[j] != 0.0)
      v = std::abs(g[j] + lambda * (beta[j] > 0.0 ? 1.0 : -1.0));
    else
      v = std::max(0.0, std::abs(g[j]) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

namespace {

// One pass over the given coordinates; exact univariate minimization each.
// `axb` caches gram*beta and is kept consistent with beta.
double sweep(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment, double lambda,
             Eigen::VectorXd& beta, Eigen::VectorXd& axb, bool active_only) {
  const Eigen::Index d = beta.size();
  double max_delta = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (active_only && beta[j] == 0.0) continue;
    const double ajj = gram(j, j);
    double target;
    if (ajj <= 0.0) {
      target = 0.0;  // no curvature: this coordinate never entered any sample
    } else {
      const double cj = moment[j] - axb[j] + ajj * beta[j];
      target = soft_threshold(cj, 0.5 * lambda) / ajj;
    }
    const double delta = target - beta[j];
    if (delta != 0.0) {
      axb.noalias() += delta * gram.col(j);
      beta[j] = target;
      max_delta = std::max(max_delta, std::abs(delta));
    }
  }
  return max_delta;
}

}  // namespace

LassoSolution solve(const LassoQuadratic& q, double lambda, const LassoOptions& opts,
                    const Eigen::VectorXd* warm_start) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lasso: lambda must be > 0");
  if (q.dim() == 0) throw std::invalid_argument("lasso: zero-dimensional problem");
  if (q.positive_weight() <= 0.0)
    throw std::invalid_argument("lasso: need at least one positive weight");
  if (warm_start && warm_start->size() != q.dim())
    throw std::invalid_argument("lasso: warm start dimension mismatch");

  LassoSolution sol;
  sol.beta = warm_start ? *warm_start : Eigen::VectorXd::Zero(q.dim());
  Eigen::VectorXd axb = q.gram() * sol.beta;

  double update_tol = opts.tol;
  bool full = true;
  int iter = 0;
  while (iter < opts.max_iter) {
    const double md = sweep(q.gram(), q.moment(), lambda, sol.beta, axb, !full);
    ++iter;
    if (full) {
      if (md < update_tol) {
        sol.kkt_violation = kkt_violation(q, sol.beta, lambda);
        if (sol.kkt_violation <= opts.tol) {
          sol.converged = true;
          break;
        }
        // Updates stalled but stationarity not certified: demand smaller steps.
        if (update_tol <= 1e-17) break;
        update_tol *= 0.1;
      } else {
        full = false;
      }
    } else if (md < update_tol) {
      full = true;
    }
  }
  sol.iterations = iter;
  if (!sol.converged) sol.kkt_violation = kkt_violation(q, sol.beta, lambda);
  sol.objective = q.objective(sol.beta, lambda);
  return sol;
}

LassoSolution solve(const WeightedLassoProblem& p, const LassoOptions& opts,
                    const Eigen::VectorXd* warm_start) {
  LassoSolution sol = solve(LassoQuadratic::from_problem(p), p.lambda, opts, warm_start);
  sol.objective = objective(p, sol.beta);
  return sol;
}

double objective(const WeightedLassoProblem& p, const Eigen::VectorXd& beta) {
  p.validate();
  if (beta.size() != p.dim()) throw std::invalid_argument("lasso: beta dimension mismatch");
  double value = 0.0;
  for (const auto& s : p.samples) {
    const double resid = s.x.dot(beta) - s.reward;
    value += s.weight * resid * resid;
  }
  return value + p.lambda * beta.lpNorm<1>();
}

}  // namespace sparsebandit
