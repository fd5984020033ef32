#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <memory>
#include <string>

#include "sparsebandit/environment.hpp"
#include "sparsebandit/lasso.hpp"
#include "sparsebandit/rng.hpp"

namespace sparsebandit {

// Penalty as a function of the number of rows in the fit (n >= 1).
using LambdaSchedule = std::function<double(int)>;
// Forced-sampling budget as a function of the greedy-round count so far.
using ForcedBudget = std::function<double(int)>;
// Penalty for the greedy-rounds fit: (current round t, greedy rounds before t).
using Lambda2Schedule = std::function<double(int, int)>;

// One bandit agent. Single-owner mutable state: a replication drives exactly
// one instance, alternating select_arm / observe once per round.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual int select_arm(const ContextSet& ctx) = 0;
  virtual void observe(const ContextSet& ctx, int arm, double reward) = 0;

  // True when the last selection maximized x'estimate (not a forced draw).
  bool last_greedy() const { return last_greedy_; }
  // The estimate that last greedy selection maximized; meaningful only when
  // last_greedy() is true.
  const Eigen::VectorXd& last_estimate() const { return estimate_used_; }
  // Lasso refits that hit the sweep cap without certifying optimality.
  int unconverged_solves() const { return unconverged_; }

 protected:
  bool last_greedy_ = false;
  Eigen::VectorXd estimate_used_;
  int unconverged_ = 0;
};

// ---------------------------------------------------------------------------
// Penalty schedules and theory-mode parameter derivations.

// 4 sigma x_max (sqrt(2 w^2 M0 log(2d/delta))
//               + 2^(3/4) sqrt((t - M0) log(7d (log 2(t-M0))^2 / delta))),
// the high-probability noise-control level for the weighted fit with t rows.
// The second radical is 0 at t = M0. Throws std::invalid_argument when
// t < M0, delta is outside (0,1], sigma < 0, or x_max <= 0.
double fswlasso_lambda_theory(int t, int M0, double w, int d, double delta, double sigma,
                              double x_max);

struct FsWTheoryParams {
  double c2 = 0.0;   // margin-driven sample-count constant
  double tau = 0.0;  // effective exploration mass w^2 M0
  // 64-bit: the derived forced-sampling length routinely exceeds any practical
  // horizon (the constants are worst-case), so it must not wrap.
  std::int64_t m0 = 0;
  double w = 0.0;
};

// Derives (M0, w) for FS-WLasso from problem-scale guesses. phi_star_sq is the
// compatibility constant (already squared) of the optimal-arm Gram, rho the
// ratio phi^2(Sigma_*) / phi^2(Sigma_avg), (alpha, delta_star) the margin
// parameters. All inputs must be positive, delta in (0,1].
FsWTheoryParams fswlasso_theory_params(int d, double delta, double sigma, double x_max, int s0,
                                       double phi_star_sq, double rho, double alpha,
                                       double delta_star);

struct FsLassoTheoryParams {
  ForcedBudget q;
  double h = 0.0;
  double lambda1 = 0.0;
  Lambda2Schedule lambda2;
};

// Derives (q, h, lambda1, lambda2) for FS-Lasso from problem-scale guesses.
// All inputs must be positive.
FsLassoTheoryParams fslasso_theory_params(int d, double sigma, double x_max, int s0,
                                          double phi_star_sq, double rho, double alpha,
                                          double delta_star);

// scale * sqrt((w^2 M0 + (n - M0)) * log(max(d(n+1), 2))) for n >= M0: the
// theory schedule's shape with the constants collapsed into one tunable knob.
// M0 = 0, w = 1 gives the plain sum-form schedule scale * sqrt(n log(d(n+1))).
LambdaSchedule practical_lambda_schedule(double scale, int d, int M0, double w);
// scale * sqrt(2 log(4d (n_g+1)^2) / t).
Lambda2Schedule practical_lambda2_schedule(double scale, int d);
// q_scale * log(2 d^2 (n+1)^3); nondecreasing in n.
ForcedBudget practical_forced_budget(double q_scale, int d);

// ---------------------------------------------------------------------------
// FS-WLasso: M0 uniform rounds, then every round refits a weighted Lasso on
// the full history (weight w on forced rows, 1 on greedy rows, penalty
// lambda(rows)) and plays the greedy arm.

struct FsWLassoOptions {
  int M0 = 0;
  double w = 1.0;
  LambdaSchedule lambda;
  LassoOptions solver;
};

class FsWLassoPolicy : public Policy {
 public:
  FsWLassoPolicy(int dim, FsWLassoOptions opts, RngStream rng);

  int select_arm(const ContextSet& ctx) override;
  void observe(const ContextSet& ctx, int arm, double reward) override;

  const Eigen::VectorXd& estimate() const { return beta_; }

 private:
  FsWLassoOptions opts_;
  RngStream rng_;
  LassoQuadratic quad_;
  Eigen::VectorXd beta_;
  int rounds_ = 0;
};

// Pure greedy baseline: no forced stage, refit on all history with unit
// weights every round. Behaviorally FS-WLasso with M0 = 0, w = 1; kept as its
// own implementation so the two can be checked against each other.
struct GreedyLassoOptions {
  LambdaSchedule lambda;
  LassoOptions solver;
};

class GreedyLassoPolicy : public Policy {
 public:
  GreedyLassoPolicy(int dim, GreedyLassoOptions opts);

  int select_arm(const ContextSet& ctx) override;
  void observe(const ContextSet& ctx, int arm, double reward) override;

  const Eigen::VectorXd& estimate() const { return beta_; }

 private:
  GreedyLassoOptions opts_;
  LassoQuadratic quad_;
  Eigen::VectorXd beta_;
  int rounds_ = 0;
};

// Explore-then-commit: n0 uniform rounds, one fit on the exploration rows,
// then greedy forever with the frozen estimate.
struct EstcOptions {
  int n0 = 0;
  LambdaSchedule lambda;
  LassoOptions solver;
};

class EstcPolicy : public Policy {
 public:
  EstcPolicy(int dim, EstcOptions opts, RngStream rng);

  int select_arm(const ContextSet& ctx) override;
  void observe(const ContextSet& ctx, int arm, double reward) override;

  const Eigen::VectorXd& estimate() const { return beta_; }

 private:
  EstcOptions opts_;
  RngStream rng_;
  LassoQuadratic quad_;
  Eigen::VectorXd beta_;
  int rounds_ = 0;
};

// FS-Lasso: forced rounds interleave with greedy rounds under the budget
// n_e <= q(n_g). Forced rows feed beta_tilde (averaged loss, fixed penalty
// lambda1); greedy rows feed beta_hat (averaged loss, penalty lambda2(t, n_g)).
// A greedy round plays the beta_tilde argmax when it wins by more than h,
// otherwise the beta_hat argmax.
struct FsLassoOptions {
  ForcedBudget q;
  double h = 0.0;
  double lambda1 = 0.0;
  Lambda2Schedule lambda2;
  LassoOptions solver;
  // Size-d starting estimates; empty means zeros.
  Eigen::VectorXd initial_beta_tilde;
  Eigen::VectorXd initial_beta_hat;
};

class FsLassoPolicy : public Policy {
 public:
  FsLassoPolicy(int dim, FsLassoOptions opts, RngStream rng);

  int select_arm(const ContextSet& ctx) override;
  void observe(const ContextSet& ctx, int arm, double reward) override;

  int forced_count() const { return n_e_; }
  int greedy_count() const { return n_g_; }
  double forced_budget(int n_g) const { return opts_.q(n_g); }
  const Eigen::VectorXd& forced_estimate() const { return beta_tilde_; }
  const Eigen::VectorXd& greedy_estimate() const { return beta_hat_; }

 private:
  FsLassoOptions opts_;
  RngStream rng_;
  LassoQuadratic quad_e_;
  LassoQuadratic quad_g_;
  Eigen::VectorXd beta_tilde_;
  Eigen::VectorXd beta_hat_;
  int n_e_ = 0;
  int n_g_ = 0;
  int rounds_ = 0;
  bool last_forced_ = false;
};

// Plays argmax x' beta_star every round; the regret reference point.
class OraclePolicy : public Policy {
 public:
  explicit OraclePolicy(SparseParameter param);

  int select_arm(const ContextSet& ctx) override;
  void observe(const ContextSet& ctx, int arm, double reward) override;

 private:
  SparseParameter param_;
};

class UniformPolicy : public Policy {
 public:
  explicit UniformPolicy(RngStream rng);

  int select_arm(const ContextSet& ctx) override;
  void observe(const ContextSet& ctx, int arm, double reward) override;

 private:
  RngStream rng_;
};

// ---------------------------------------------------------------------------
// Config-file construction.

// kinds: fswlasso | fslasso | greedy-lasso | estc | oracle | uniform.
// params is a kind-specific JSON object; unknown keys are hard errors.
struct PolicySpec {
  std::string name;
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const PolicySpec& spec);
void from_json(const nlohmann::json& j, PolicySpec& spec);

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const Environment& env,
                                    RngStream rng);

// The params object with defaults filled in and theory-mode derivations
// (M0, w, tau, h, lambda1, ...) materialized; what resolved run configs
// persist. Seed-independent.
nlohmann::json resolve_policy_params(const PolicySpec& spec, const Environment& env);

}  // namespace sparsebandit
