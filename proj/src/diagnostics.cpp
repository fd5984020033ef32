#include "sparsebandit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace sparsebandit {

namespace {

constexpr double kConeRadius = 3.0;  // ||v_{S^c}||_1 <= 3 once ||v_S||_1 = 1

// Euclidean projection onto {u >= 0, sum u = 1} (Duchi et al. 2008).
void project_simplex(Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  std::vector<double> w(u.data(), u.data() + n);
  std::sort(w.begin(), w.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  int rho = 0;
  for (int i = 0; i < n; ++i) {
    cum += w[i];
    const double t = (cum - 1.0) / (i + 1);
    if (w[i] - t > 0.0) {
      rho = i + 1;
      tau = t;
    }
  }
  (void)rho;
  for (int i = 0; i < n; ++i) u[i] = std::max(0.0, u[i] - tau);
}

// Euclidean projection onto the l1 ball of radius r.
void project_l1_ball(Eigen::VectorXd& y, double r) {
  if (y.size() == 0 || y.lpNorm<1>() <= r) return;
  const int n = static_cast<int>(y.size());
  std::vector<double> a(n);
  for (int i = 0; i < n; ++i) a[i] = std::abs(y[i]);
  std::sort(a.begin(), a.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += a[i];
    const double t = (cum - r) / (i + 1);
    if (a[i] - t > 0.0) tau = t;
  }
  for (int i = 0; i < n; ++i) {
    const double mag = std::max(0.0, std::abs(y[i]) - tau);
    y[i] = y[i] >= 0.0 ? mag : -mag;
  }
}

struct PatternWork {
  const Eigen::MatrixXd& M;
  const std::vector<int>& S;
  const std::vector<int>& C;
  double s;     // |S|
  double lips;  // 2 |S| lambda_max(M)
};

// f(v) = |S| v'Mv over the sign-fixed slice of the cone.
double pattern_f(const PatternWork& w, const Eigen::VectorXd& v) {
  return w.s * v.dot(w.M * v);
}

void project_pattern(const PatternWork& w, const Eigen::VectorXd& sigma, Eigen::VectorXd& v) {
  Eigen::VectorXd u(w.S.size());
  for (size_t i = 0; i < w.S.size(); ++i) u[i] = sigma[i] * v[w.S[i]];
  project_simplex(u);
  for (size_t i = 0; i < w.S.size(); ++i) v[w.S[i]] = sigma[i] * u[i];
  if (!w.C.empty()) {
    Eigen::VectorXd y(w.C.size());
    for (size_t i = 0; i < w.C.size(); ++i) y[i] = v[w.C[i]];
    project_l1_ball(y, kConeRadius);
    for (size_t i = 0; i < w.C.size(); ++i) v[w.C[i]] = y[i];
  }
}

// Frank-Wolfe gap at v: upper bound on f(v) - min_F f by convexity. The
// linear minimization oracle over the product set is a simplex vertex plus
// an l1-ball vertex (or its center).
double fw_gap(const PatternWork& w, const Eigen::VectorXd& sigma, const Eigen::VectorXd& v) {
  const Eigen::VectorXd g = 2.0 * w.s * (w.M * v);
  double min_simplex = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < w.S.size(); ++i)
    min_simplex = std::min(min_simplex, sigma[i] * g[w.S[i]]);
  double ball_reach = 0.0;
  for (int c : w.C) ball_reach = std::max(ball_reach, std::abs(g[c]));
  return g.dot(v) - min_simplex + kConeRadius * ball_reach;
}

struct PatternSolution {
  double value = 0.0;
  bool certified = false;
  Eigen::VectorXd v;
};

// Accelerated projected gradient with function restarts; stops once the
// Frank-Wolfe gap certifies optimality within tol_gap.
PatternSolution solve_pattern(const PatternWork& w, const Eigen::VectorXd& sigma, double tol_gap,
                              int max_iter) {
  const int d = static_cast<int>(w.M.rows());
  PatternSolution out;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  for (size_t i = 0; i < w.S.size(); ++i) x[w.S[i]] = sigma[i] / w.s;

  if (w.lips <= 0.0) {  // M numerically zero: f vanishes everywhere
    out.value = 0.0;
    out.certified = true;
    out.v = x;
    return out;
  }

  Eigen::VectorXd z = x, x_prev = x;
  double fx = pattern_f(w, x);
  out.value = fx;
  out.v = x;
  double theta = 1.0;
  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::VectorXd grad = 2.0 * w.s * (w.M * z);
    Eigen::VectorXd x_new = z - grad / w.lips;
    project_pattern(w, sigma, x_new);
    const double f_new = pattern_f(w, x_new);
    if (f_new < out.value) {
      out.value = f_new;
      out.v = x_new;
    }
    if (f_new > fx) {  // momentum overshoot: restart
      theta = 1.0;
      z = x_new;
    } else {
      const double theta_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      z = x_new + ((theta - 1.0) / theta_new) * (x_new - x_prev);
      theta = theta_new;
    }
    x_prev = x_new;
    fx = f_new;
    if (iter % 8 == 0 || iter == max_iter - 1) {
      if (fw_gap(w, sigma, out.v) <= tol_gap) {
        out.certified = true;
        return out;
      }
    }
  }
  out.certified = fw_gap(w, sigma, out.v) <= tol_gap;
  return out;
}

int uniform_arm_selector(const ContextSet& ctx, RngStream& rng) {
  return rng.uniform_int(ctx.num_arms());
}

}  // namespace

CompatResult compatibility_constant(const Eigen::MatrixXd& M, const std::vector<int>& support,
                                    const CompatOptions& opts) {
  const int d = static_cast<int>(M.rows());
  if (M.cols() != d || d == 0) throw std::invalid_argument("compat: M must be square");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("compat: M is not symmetric");
  if (support.empty()) throw std::invalid_argument("compat: empty support");
  std::set<int> sset(support.begin(), support.end());
  if (sset.size() != support.size() || *sset.begin() < 0 || *sset.rbegin() >= d)
    throw std::invalid_argument("compat: support indices must be distinct and in range");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin < -1e-10 * std::max(1.0, std::abs(lmax)))
    throw std::invalid_argument("compat: M is not positive semidefinite");

  const int s = static_cast<int>(support.size());
  if (opts.method == CompatMethod::ExactSignEnum && s > 12)
    throw std::invalid_argument(
        "compat: support too large for exact sign enumeration (max 12); use MultiStart");

  std::vector<int> S(sset.begin(), sset.end());
  std::vector<int> C;
  for (int j = 0; j < d; ++j)
    if (!sset.count(j)) C.push_back(j);

  PatternWork work{M, S, C, static_cast<double>(s), 2.0 * s * std::max(lmax, 0.0)};
  const double tol_gap = opts.tol * std::max(1.0, s * std::max(lmax, 0.0));

  // v and -v give the same value, so the first support sign is pinned to +1.
  std::vector<std::uint64_t> patterns;
  if (opts.method == CompatMethod::ExactSignEnum) {
    patterns.resize(std::uint64_t(1) << (s - 1));
    for (std::uint64_t m = 0; m < patterns.size(); ++m) patterns[m] = m;
  } else {
    std::set<std::uint64_t> chosen{0};  // all-plus always included
    RngStream rng(opts.seed);
    const std::uint64_t space =
        s - 1 >= 63 ? std::numeric_limits<std::uint64_t>::max() : (std::uint64_t(1) << (s - 1));
    for (int tries = 0; tries < opts.restarts * 4 &&
                        chosen.size() < std::min<std::uint64_t>(opts.restarts, space);
         ++tries) {
      std::uint64_t m = 0;
      for (int b = 0; b < s - 1; ++b)
        if (rng.uniform() < 0.5) m |= (std::uint64_t(1) << b);
      chosen.insert(m);
    }
    patterns.assign(chosen.begin(), chosen.end());
  }

  CompatResult result;
  result.phi_sq = std::numeric_limits<double>::infinity();
  result.certified = opts.method == CompatMethod::ExactSignEnum;
  Eigen::VectorXd sigma(s);
  for (std::uint64_t m : patterns) {
    sigma[0] = 1.0;
    for (int b = 1; b < s; ++b) sigma[b] = (m >> (b - 1)) & 1 ? -1.0 : 1.0;
    PatternSolution ps = solve_pattern(work, sigma, tol_gap, opts.max_iter);
    if (!ps.certified && opts.method == CompatMethod::ExactSignEnum) result.certified = false;
    if (ps.value < result.phi_sq) {
      result.phi_sq = ps.value;
      result.minimizer = ps.v;
    }
  }
  // PSD quadratic: tiny negatives are round-off.
  if (result.phi_sq < 0.0) result.phi_sq = 0.0;
  return result;
}

Eigen::MatrixXd empirical_gram(const std::vector<std::pair<double, Eigen::VectorXd>>& rows) {
  if (rows.empty()) throw std::invalid_argument("gram: no rows");
  const Eigen::Index d = rows.front().second.size();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [w, x] : rows) {
    if (x.size() != d) throw std::invalid_argument("gram: dimension mismatch");
    if (w < 0.0) throw std::invalid_argument("gram: negative weight");
    if (w != 0.0) g.selfadjointView<Eigen::Lower>().rankUpdate(x, w);
  }
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

Eigen::MatrixXd estimate_selected_arm_gram(const Environment& env, const ArmSelector& selector,
                                           int n_mc, std::uint64_t seed) {
  if (n_mc < 1) throw std::invalid_argument("gram: n_mc must be >= 1");
  RngStream ctx_rng = RngStream(seed).derive("ctx");
  RngStream sel_rng = RngStream(seed).derive("sel");
  const int d = env.spec().d;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  for (int t = 1; t <= n_mc; ++t) {
    const ContextSet ctx = env.sample_contexts(ctx_rng, t);
    const int arm = selector(ctx, sel_rng);
    if (arm < 0 || arm >= ctx.num_arms()) throw std::runtime_error("gram: selector out of range");
    g.selfadjointView<Eigen::Lower>().rankUpdate(ctx.features.row(arm).transpose(), 1.0);
  }
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g / double(n_mc);
}

Eigen::MatrixXd estimate_optimal_arm_gram(const Environment& env, int n_mc, std::uint64_t seed) {
  const Eigen::VectorXd beta = env.param().beta_star;
  return estimate_selected_arm_gram(
      env,
      [&beta](const ContextSet& ctx, RngStream&) {
        return argmax_lowest(ctx.features * beta);
      },
      n_mc, seed);
}

Eigen::MatrixXd estimate_uniform_arm_gram(const Environment& env, int n_mc, std::uint64_t seed) {
  if (n_mc < 1) throw std::invalid_argument("gram: n_mc must be >= 1");
  RngStream ctx_rng = RngStream(seed).derive("ctx");
  const int d = env.spec().d;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  for (int t = 1; t <= n_mc; ++t) {
    const ContextSet ctx = env.sample_contexts(ctx_rng, t);
    for (int k = 0; k < ctx.num_arms(); ++k)
      g.selfadjointView<Eigen::Lower>().rankUpdate(ctx.features.row(k).transpose(),
                                                   1.0 / ctx.num_arms());
  }
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g / double(n_mc);
}

GreedyDiversityResult estimate_greedy_diversity(const Environment& env,
                                                const std::vector<Eigen::VectorXd>& probes,
                                                int n_mc, std::uint64_t seed,
                                                const CompatOptions& copts) {
  if (probes.empty()) throw std::invalid_argument("diversity: need at least one probe");
  GreedyDiversityResult out;
  out.phi_g_sq = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < probes.size(); ++i) {
    const Eigen::VectorXd& beta = probes[i];
    if (beta.size() != env.spec().d) throw std::invalid_argument("diversity: probe dim mismatch");
    const Eigen::MatrixXd g = estimate_selected_arm_gram(
        env,
        [&beta](const ContextSet& ctx, RngStream&) {
          return argmax_lowest(ctx.features * beta);
        },
        n_mc, seed);
    const double phi = compatibility_constant(g, env.param().support, copts).phi_sq;
    out.per_probe.push_back(phi);
    if (phi < out.phi_g_sq) {
      out.phi_g_sq = phi;
      out.argmin_probe = static_cast<int>(i);
    }
  }
  return out;
}

MarginEstimate estimate_margin(const Environment& env, int n_mc, std::vector<double> h_grid,
                               std::uint64_t seed) {
  if (n_mc < 1) throw std::invalid_argument("margin: n_mc must be >= 1");
  RngStream ctx_rng = RngStream(seed).derive("ctx");
  std::vector<double> gaps;
  gaps.reserve(n_mc);
  for (int t = 1; t <= n_mc; ++t) {
    const ContextSet ctx = env.sample_contexts(ctx_rng, t);
    if (ctx.num_arms() < 2)
      gaps.push_back(std::numeric_limits<double>::infinity());
    else
      gaps.push_back(optimal_arm(ctx, env.param()).second);
  }

  MarginEstimate est;
  est.mc_tol = 2.0 / std::sqrt(double(n_mc));

  std::vector<double> finite;
  for (double g : gaps)
    if (std::isfinite(g)) finite.push_back(g);
  std::sort(finite.begin(), finite.end());

  if (h_grid.empty()) {
    if (finite.empty()) {
      h_grid = {1.0};
    } else {
      // Low percentiles pin the tail exponent; deciles pin the scale.
      for (double level : {0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
        const size_t idx =
            std::min(finite.size() - 1, static_cast<size_t>(finite.size() * level));
        h_grid.push_back(finite[idx]);
      }
      h_grid.erase(std::unique(h_grid.begin(), h_grid.end()), h_grid.end());
    }
  }
  est.h_grid = h_grid;
  for (double h : h_grid) {
    int count = 0;
    for (double g : gaps)
      if (g <= h) ++count;
    est.ecdf.push_back(double(count) / n_mc);
  }

  if (finite.empty()) {  // single-arm rounds only: the condition holds vacuously
    est.alpha = 8.0;
    est.delta_star = std::numeric_limits<double>::infinity();
    return est;
  }

  const double gmax = finite.back();
  std::vector<double> delta_grid;
  for (int i = 1; i <= 40; ++i) delta_grid.push_back(gmax * 0.05 * i);  // 0.05 gmax .. 2 gmax

  auto feasible = [&](double alpha, double delta) {
    for (size_t i = 0; i < est.h_grid.size(); ++i) {
      const double bound = std::pow(est.h_grid[i] / delta, alpha) + est.mc_tol;
      if (est.ecdf[i] > bound) return false;
    }
    return true;
  };

  // The exponent cannot be read off feasibility alone: shrinking delta drives
  // every bound value below the tolerance floor, so arbitrarily large alpha
  // would pass. Estimate alpha as the log-log slope of the ecdf over grid
  // points that are above the noise floor and below saturation.
  double slope_x = 0.0, slope_y = 0.0;
  int slope_n = 0;
  for (size_t i = 0; i < est.h_grid.size(); ++i)
    if (est.h_grid[i] > 0.0 && est.ecdf[i] > est.mc_tol && est.ecdf[i] < 0.95) {
      slope_x += std::log(est.h_grid[i]);
      slope_y += std::log(est.ecdf[i]);
      ++slope_n;
    }
  double alpha_hat = 0.0;
  if (slope_n >= 2) {
    const double mx = slope_x / slope_n, my = slope_y / slope_n;
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < est.h_grid.size(); ++i)
      if (est.h_grid[i] > 0.0 && est.ecdf[i] > est.mc_tol && est.ecdf[i] < 0.95) {
        const double dx = std::log(est.h_grid[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(est.ecdf[i]) - my);
      }
    if (sxx > 0.0) alpha_hat = sxy / sxx;
  }

  std::vector<double> alpha_candidates;
  if (alpha_hat > 0.0) {
    const double snapped = std::clamp(std::round(alpha_hat / 0.25) * 0.25, 0.25, 8.0);
    for (double a = snapped; a >= 0.25 - 1e-12; a -= 0.25) alpha_candidates.push_back(a);
    for (double a = snapped + 0.25; a <= 8.0 + 1e-12; a += 0.25) alpha_candidates.push_back(a);
  } else {
    // Degenerate ecdf (jumps straight past saturation): largest feasible alpha.
    for (double a = 8.0; a >= 0.25 - 1e-12; a -= 0.25) alpha_candidates.push_back(a);
  }
  for (double a : alpha_candidates) {
    for (auto dd = delta_grid.rbegin(); dd != delta_grid.rend(); ++dd) {
      if (feasible(a, *dd)) {
        est.alpha = a;
        est.delta_star = *dd;
        return est;
      }
    }
  }
  est.alpha = 0.0;  // no grid point fits: distribution has mass at arbitrarily small gaps
  est.delta_star = 0.0;
  return est;
}

ConcentrationReport check_gram_concentration(const Environment& env, int n, int reps,
                                             double phi0_target, std::uint64_t seed,
                                             const CompatOptions& copts) {
  if (n < 1 || reps < 1) throw std::invalid_argument("concentration: need n >= 1 and reps >= 1");
  ConcentrationReport report;
  report.n = n;
  report.reps = reps;
  report.phi0_target = phi0_target;
  int hits = 0;
  for (int r = 0; r < reps; ++r) {
    const Eigen::MatrixXd g =
        estimate_selected_arm_gram(env, uniform_arm_selector, n, hash_combine(seed, r));
    const double phi = compatibility_constant(g, env.param().support, copts).phi_sq;
    report.values.push_back(phi);
    if (phi >= 0.5 * phi0_target) ++hits;
  }
  report.fraction = double(hits) / reps;
  return report;
}

DiagnosticsReport run_diagnostics(const Environment& env, const DiagnosticsOptions& opts) {
  const auto& param = env.param();
  CompatOptions copts = opts.compat;
  if (copts.method == CompatMethod::ExactSignEnum && param.s0() > 12)
    copts.method = CompatMethod::MultiStart;

  DiagnosticsReport report;
  const Eigen::MatrixXd gram_star = estimate_optimal_arm_gram(env, opts.n_mc, opts.seed);
  const Eigen::MatrixXd gram_avg = estimate_uniform_arm_gram(env, opts.n_mc, opts.seed);
  report.phi_star_sq = compatibility_constant(gram_star, param.support, copts).phi_sq;
  report.phi_avg_sq = compatibility_constant(gram_avg, param.support, copts).phi_sq;
  report.rho = report.phi_avg_sq > 0.0
                   ? report.phi_star_sq / report.phi_avg_sq
                   : std::numeric_limits<double>::infinity();

  std::vector<Eigen::VectorXd> probes{param.beta_star};
  RngStream probe_rng = RngStream(opts.seed).derive("probes");
  while (static_cast<int>(probes.size()) < std::max(1, opts.probes)) {
    Eigen::VectorXd b(env.spec().d);
    for (int j = 0; j < env.spec().d; ++j) b[j] = probe_rng.normal();
    const double nrm = b.norm();
    if (nrm > 0.0) probes.push_back(b / nrm);
  }
  report.phi_g_sq =
      estimate_greedy_diversity(env, probes, opts.n_mc, opts.seed, copts).phi_g_sq;

  const MarginEstimate margin =
      estimate_margin(env, opts.n_mc, opts.h_grid, hash_combine(opts.seed, hash_tag("margin")));
  report.margin_alpha = margin.alpha;
  report.margin_delta_star = margin.delta_star;

  const double target = opts.phi0_target > 0.0 ? opts.phi0_target : report.phi_avg_sq;
  report.concentration_fraction =
      check_gram_concentration(env, opts.concentration_n, opts.concentration_reps, target,
                               hash_combine(opts.seed, hash_tag("conc")), copts)
          .fraction;
  return report;
}

}  // namespace sparsebandit
