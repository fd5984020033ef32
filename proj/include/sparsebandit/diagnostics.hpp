#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "sparsebandit/environment.hpp"
#include "sparsebandit/rng.hpp"

namespace sparsebandit {

// phi^2(M, S) = min { |S| v'Mv / ||v_S||_1^2 : ||v_{S^c}||_1 <= 3 ||v_S||_1, v_S != 0 }.
//
// ExactSignEnum: after normalizing ||v_S||_1 = 1 the cone splits into 2^{|S|-1}
// sign patterns (v and -v are equivalent); each piece is a convex program over
// (signed simplex) x (l1 ball of radius 3), minimized by accelerated projected
// gradient until the Frank-Wolfe gap certifies optimality within tol. The
// returned value is a certified global minimum.
// MultiStart: the same convex subsolver on randomly sampled sign patterns;
// an upper bound only (certified = false).
enum class CompatMethod { ExactSignEnum, MultiStart };

struct CompatOptions {
  CompatMethod method = CompatMethod::ExactSignEnum;
  // Per-pattern optimality gap, relative to max(1, |S| * lambda_max(M)).
  double tol = 1e-7;
  int max_iter = 50000;  // projected-gradient iterations per sign pattern
  int restarts = 64;     // MultiStart sign patterns
  std::uint64_t seed = 12345;
};

struct CompatResult {
  double phi_sq = 0.0;
  bool certified = false;
  Eigen::VectorXd minimizer;  // feasible v attaining phi_sq (||v_S||_1 = 1)
};

// Throws std::invalid_argument when M is not symmetric PSD (tolerance 1e-10
// relative), the support is empty/invalid, or |S| > 12 with ExactSignEnum.
CompatResult compatibility_constant(const Eigen::MatrixXd& M, const std::vector<int>& support,
                                    const CompatOptions& opts = {});

// sum_i w_i x_i x_i' over the given rows.
Eigen::MatrixXd empirical_gram(const std::vector<std::pair<double, Eigen::VectorXd>>& rows);

// Monte-Carlo second moment (1/n) sum x_sel x_sel' of the arm a selector
// picks. Context draws come from a stream derived as (seed, "ctx"), so two
// estimates with equal seeds see identical context sequences; selector
// randomness (if any) lives on an independent (seed, "sel") stream. This
// common-random-numbers coupling is what makes cross-selector comparisons
// (greedy diversity vs optimal-arm Gram) exact rather than a noise race.
using ArmSelector = std::function<int(const ContextSet&, RngStream&)>;
Eigen::MatrixXd estimate_selected_arm_gram(const Environment& env, const ArmSelector& selector,
                                           int n_mc, std::uint64_t seed);

// Selector = argmax of x'beta_* (lowest-index ties).
Eigen::MatrixXd estimate_optimal_arm_gram(const Environment& env, int n_mc, std::uint64_t seed);

// Direct estimate of (1/K) E[sum_k x_k x_k']: averages all arms each round,
// which is the conditional expectation of the uniform-arm draw (same estimand,
// less variance).
Eigen::MatrixXd estimate_uniform_arm_gram(const Environment& env, int n_mc, std::uint64_t seed);

// min over probes beta of phi^2(Gram of greedily-chosen arms w.r.t. beta).
// Every probe replays the same context stream (see above).
struct GreedyDiversityResult {
  double phi_g_sq = 0.0;
  int argmin_probe = -1;
  std::vector<double> per_probe;
};
GreedyDiversityResult estimate_greedy_diversity(const Environment& env,
                                                const std::vector<Eigen::VectorXd>& probes,
                                                int n_mc, std::uint64_t seed,
                                                const CompatOptions& copts = {});

// Fits the margin condition P(gap <= h) <= (h / delta_star)^alpha to the
// empirical gap distribution: reports the largest alpha on the grid for which
// some delta_star satisfies the bound at every h in h_grid within the
// Monte-Carlo tolerance 2/sqrt(n_mc), and the largest such delta_star.
// Rounds with a single arm count as gap = +infinity (condition trivial).
struct MarginEstimate {
  std::vector<double> h_grid;
  std::vector<double> ecdf;  // P(gap <= h) at each grid point
  double alpha = 0.0;
  double delta_star = 0.0;
  double mc_tol = 0.0;
};
MarginEstimate estimate_margin(const Environment& env, int n_mc, std::vector<double> h_grid,
                               std::uint64_t seed);

// Draws `reps` independent uniform-arm histories of length n, computes the
// compatibility constant of each averaged Gram (1/n) sum x x', and reports the
// fraction with phi^2 >= phi0_target / 2.
struct ConcentrationReport {
  int n = 0;
  int reps = 0;
  double phi0_target = 0.0;
  double fraction = 0.0;
  std::vector<double> values;
};
ConcentrationReport check_gram_concentration(const Environment& env, int n, int reps,
                                             double phi0_target, std::uint64_t seed,
                                             const CompatOptions& copts = {});

// The bundle the `diagnose` subcommand reports.
struct DiagnosticsOptions {
  int n_mc = 20000;
  int probes = 20;               // greedy-diversity probes (probe 0 is beta_*)
  std::vector<double> h_grid;    // empty: deciles of the observed gaps
  int concentration_n = 1000;
  int concentration_reps = 20;
  double phi0_target = 0.0;      // 0: use the phi_avg_sq estimate
  std::uint64_t seed = 1;
  CompatOptions compat;
};

struct DiagnosticsReport {
  double phi_star_sq = 0.0;   // compatibility at the optimal-arm Gram
  double phi_avg_sq = 0.0;    // compatibility at the uniform-average Gram
  double rho = 0.0;           // phi_star_sq / phi_avg_sq
  double phi_g_sq = 0.0;      // greedy diversity estimate
  double margin_alpha = 0.0;
  double margin_delta_star = 0.0;
  double concentration_fraction = 0.0;
};

DiagnosticsReport run_diagnostics(const Environment& env, const DiagnosticsOptions& opts = {});

}  // namespace sparsebandit
