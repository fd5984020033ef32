#include "sparsebandit/policies.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sparsebandit/json_util.hpp"

namespace sparsebandit {

namespace {

using nlohmann::json;

const json& require_key(const json& j, const char* key, const char* what) {
  if (!j.contains(key))
    throw std::invalid_argument(std::string(what) + ": missing key '" + key + "'");
  return j.at(key);
}

double get_number(const json& j, const char* key, const char* what) {
  const json& v = require_key(j, key, what);
  if (!v.is_number())
    throw std::invalid_argument(std::string(what) + ": '" + key + "' must be a number");
  return v.get<double>();
}

double get_number_or(const json& j, const char* key, double fallback, const char* what) {
  return j.contains(key) ? get_number(j, key, what) : fallback;
}

int get_int(const json& j, const char* key, const char* what) {
  const json& v = require_key(j, key, what);
  if (!v.is_number_integer())
    throw std::invalid_argument(std::string(what) + ": '" + key + "' must be an integer");
  return v.get<int>();
}

int get_int_or(const json& j, const char* key, int fallback, const char* what) {
  return j.contains(key) ? get_int(j, key, what) : fallback;
}

bool get_bool_or(const json& j, const char* key, bool fallback, const char* what) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean())
    throw std::invalid_argument(std::string(what) + ": '" + key + "' must be a boolean");
  return v.get<bool>();
}

void require_positive(double value, const char* key, const char* what) {
  if (!(value > 0.0))
    throw std::invalid_argument(std::string(what) + ": '" + key + "' must be > 0");
}

}  // namespace

// ---------------------------------------------------------------------------
// Schedules and theory-mode derivations.

double fswlasso_lambda_theory(int t, int M0, double w, int d, double delta, double sigma,
                              double x_max) {
  if (M0 < 0 || t < M0) throw std::invalid_argument("lambda schedule: need t >= M0 >= 0");
  if (!(w > 0.0)) throw std::invalid_argument("lambda schedule: w must be > 0");
  if (d < 1) throw std::invalid_argument("lambda schedule: d must be >= 1");
  if (!(delta > 0.0) || delta > 1.0)
    throw std::invalid_argument("lambda schedule: delta must be in (0,1]");
  if (sigma < 0.0 || !(x_max > 0.0))
    throw std::invalid_argument("lambda schedule: need sigma >= 0 and x_max > 0");

  const double head = std::sqrt(2.0 * w * w * double(M0) * std::log(2.0 * d / delta));
  double tail = 0.0;
  if (t > M0) {
    const double dt = double(t - M0);
    const double lg = std::log(2.0 * dt);
    tail = std::pow(2.0, 0.75) * std::sqrt(dt * std::log(7.0 * d * lg * lg / delta));
  }
  return 4.0 * sigma * x_max * (head + tail);
}

FsWTheoryParams fswlasso_theory_params(int d, double delta, double sigma, double x_max, int s0,
                                       double phi_star_sq, double rho, double alpha,
                                       double delta_star) {
  if (d < 1 || s0 < 1) throw std::invalid_argument("theory params: need d >= 1 and s0 >= 1");
  if (!(delta > 0.0) || delta > 1.0)
    throw std::invalid_argument("theory params: delta must be in (0,1]");
  if (!(sigma > 0.0) || !(x_max > 0.0) || !(phi_star_sq > 0.0) || !(rho > 0.0) ||
      !(alpha > 0.0) || !(delta_star > 0.0))
    throw std::invalid_argument("theory params: inputs must be positive");

  const double x2s = x_max * x_max * double(s0);
  FsWTheoryParams p;
  p.c2 = std::max(2.0, std::pow(400.0 * sigma * x2s / (delta_star * phi_star_sq), 2.0) *
                           std::pow(80.0 * x2s / phi_star_sq, 2.0 / alpha));
  const double tau_a = p.c2 * std::log(7.0 * d / delta) +
                       2.0 * p.c2 * std::log(std::log(28.0 * d * p.c2 * p.c2 / delta));
  const double tau_b =
      (2048.0 * x2s * x2s / (phi_star_sq * phi_star_sq)) *
      (std::log(double(d) * d / delta) + 2.0 * std::log(64.0 * x2s / phi_star_sq));
  p.tau = std::max(tau_a, tau_b);
  const double m0_a = rho * rho * std::pow(100.0 * sigma * x2s / (delta_star * phi_star_sq), 2.0) *
                      std::pow(80.0 * x2s / phi_star_sq, 2.0 / alpha) *
                      (2.0 * std::log(std::log(2.0 * p.tau)) + std::log(7.0 * d / delta));
  const double m0_b = (2048.0 * rho * rho * x2s * x2s / (phi_star_sq * phi_star_sq)) *
                      std::log(2.0 * double(d) * d / delta);
  p.m0 = std::max<std::int64_t>(1, std::int64_t(std::ceil(std::max(m0_a, m0_b))));
  p.w = std::sqrt(p.tau / double(p.m0));
  return p;
}

FsLassoTheoryParams fslasso_theory_params(int d, double sigma, double x_max, int s0,
                                          double phi_star_sq, double rho, double alpha,
                                          double delta_star) {
  if (d < 1 || s0 < 1) throw std::invalid_argument("theory params: need d >= 1 and s0 >= 1");
  if (!(sigma > 0.0) || !(x_max > 0.0) || !(phi_star_sq > 0.0) || !(rho > 0.0) ||
      !(alpha > 0.0) || !(delta_star > 0.0))
    throw std::invalid_argument("theory params: inputs must be positive");

  const double x2s = x_max * x_max * double(s0);
  FsLassoTheoryParams p;
  p.h = (delta_star / 2.0) * std::pow(phi_star_sq / (128.0 * x2s), 1.0 / alpha);
  p.lambda1 = phi_star_sq * p.h / (2.0 * rho * x_max * double(s0));
  const double q_factor =
      (512.0 * rho * rho * x2s * x2s / (phi_star_sq * phi_star_sq)) *
      std::max(4.0, (4.0 * sigma * sigma / (delta_star * delta_star)) *
                        std::pow(128.0 * x2s / phi_star_sq, 2.0 / alpha));
  p.q = [q_factor, d](int n) {
    if (n < 0) throw std::invalid_argument("forced budget: n must be >= 0");
    return q_factor * std::log(2.0 * double(d) * d * std::pow(double(n) + 1.0, 3.0));
  };
  p.lambda2 = [d, sigma, x_max](int t, int n_g) {
    if (t < 1 || n_g < 0) throw std::invalid_argument("lambda2: need t >= 1 and n_g >= 0");
    const double m = double(n_g) + 1.0;
    return 4.0 * sigma * x_max * std::sqrt(2.0 * std::log(4.0 * double(d) * m * m) / double(t));
  };
  return p;
}

LambdaSchedule practical_lambda_schedule(double scale, int d, int M0, double w) {
  if (!(scale > 0.0)) throw std::invalid_argument("lambda schedule: scale must be > 0");
  if (d < 1 || M0 < 0 || !(w > 0.0))
    throw std::invalid_argument("lambda schedule: need d >= 1, M0 >= 0, w > 0");
  return [scale, d, M0, w](int n) {
    if (n < M0) throw std::invalid_argument("lambda schedule: n < M0");
    const double mass = w * w * double(M0) + double(n - M0);
    return scale * std::sqrt(mass * std::log(std::max(double(d) * (double(n) + 1.0), 2.0)));
  };
}

Lambda2Schedule practical_lambda2_schedule(double scale, int d) {
  if (!(scale > 0.0) || d < 1)
    throw std::invalid_argument("lambda2 schedule: need scale > 0 and d >= 1");
  return [scale, d](int t, int n_g) {
    if (t < 1 || n_g < 0) throw std::invalid_argument("lambda2: need t >= 1 and n_g >= 0");
    const double m = double(n_g) + 1.0;
    return scale * std::sqrt(2.0 * std::log(4.0 * double(d) * m * m) / double(t));
  };
}

ForcedBudget practical_forced_budget(double q_scale, int d) {
  if (q_scale < 0.0 || d < 1)
    throw std::invalid_argument("forced budget: need q_scale >= 0 and d >= 1");
  return [q_scale, d](int n) {
    if (n < 0) throw std::invalid_argument("forced budget: n must be >= 0");
    return q_scale * std::log(2.0 * double(d) * d * std::pow(double(n) + 1.0, 3.0));
  };
}

// ---------------------------------------------------------------------------
// FS-WLasso.

FsWLassoPolicy::FsWLassoPolicy(int dim, FsWLassoOptions opts, RngStream rng)
    : opts_(std::move(opts)), rng_(rng), quad_(dim), beta_(Eigen::VectorXd::Zero(dim)) {
  if (dim < 1) throw std::invalid_argument("fswlasso: dim must be >= 1");
  if (opts_.M0 < 0) throw std::invalid_argument("fswlasso: M0 must be >= 0");
  if (!(opts_.w > 0.0)) throw std::invalid_argument("fswlasso: w must be > 0");
  if (!opts_.lambda) throw std::invalid_argument("fswlasso: lambda schedule is required");
  estimate_used_ = beta_;
}

int FsWLassoPolicy::select_arm(const ContextSet& ctx) {
  const int t = rounds_ + 1;
  if (t <= opts_.M0) {
    last_greedy_ = false;
    return rng_.uniform_int(ctx.num_arms());
  }
  const int n = t - 1;
  if (n >= 1) {
    const LassoSolution sol = solve(quad_, opts_.lambda(n), opts_.solver, &beta_);
    beta_ = sol.beta;
    if (!sol.converged) ++unconverged_;
  }
  last_greedy_ = true;
  estimate_used_ = beta_;
  return argmax_lowest(ctx.features * beta_);
}

void FsWLassoPolicy::observe(const ContextSet& ctx, int arm, double reward) {
  ++rounds_;
  const double weight = rounds_ <= opts_.M0 ? opts_.w : 1.0;
  quad_.add_sample(weight, ctx.features.row(arm).transpose(), reward);
}

// ---------------------------------------------------------------------------
// Greedy Lasso baseline.

GreedyLassoPolicy::GreedyLassoPolicy(int dim, GreedyLassoOptions opts)
    : opts_(std::move(opts)), quad_(dim), beta_(Eigen::VectorXd::Zero(dim)) {
  if (dim < 1) throw std::invalid_argument("greedy-lasso: dim must be >= 1");
  if (!opts_.lambda) throw std::invalid_argument("greedy-lasso: lambda schedule is required");
  estimate_used_ = beta_;
}

int GreedyLassoPolicy::select_arm(const ContextSet& ctx) {
  if (rounds_ >= 1) {
    const LassoSolution sol = solve(quad_, opts_.lambda(rounds_), opts_.solver, &beta_);
    beta_ = sol.beta;
    if (!sol.converged) ++unconverged_;
  }
  last_greedy_ = true;
  estimate_used_ = beta_;
  return argmax_lowest(ctx.features * beta_);
}

void GreedyLassoPolicy::observe(const ContextSet& ctx, int arm, double reward) {
  ++rounds_;
  quad_.add_sample(1.0, ctx.features.row(arm).transpose(), reward);
}

// ---------------------------------------------------------------------------
// Explore-then-commit.

EstcPolicy::EstcPolicy(int dim, EstcOptions opts, RngStream rng)
    : opts_(std::move(opts)), rng_(rng), quad_(dim), beta_(Eigen::VectorXd::Zero(dim)) {
  if (dim < 1) throw std::invalid_argument("estc: dim must be >= 1");
  if (opts_.n0 < 0) throw std::invalid_argument("estc: n0 must be >= 0");
  if (!opts_.lambda) throw std::invalid_argument("estc: lambda schedule is required");
  estimate_used_ = beta_;
}

int EstcPolicy::select_arm(const ContextSet& ctx) {
  if (rounds_ + 1 <= opts_.n0) {
    last_greedy_ = false;
    return rng_.uniform_int(ctx.num_arms());
  }
  last_greedy_ = true;
  estimate_used_ = beta_;
  return argmax_lowest(ctx.features * beta_);
}

void EstcPolicy::observe(const ContextSet& ctx, int arm, double reward) {
  ++rounds_;
  if (rounds_ > opts_.n0) return;  // committed: later feedback is discarded
  quad_.add_sample(1.0, ctx.features.row(arm).transpose(), reward);
  if (rounds_ == opts_.n0) {
    const LassoSolution sol = solve(quad_, opts_.lambda(opts_.n0), opts_.solver, &beta_);
    beta_ = sol.beta;
    if (!sol.converged) ++unconverged_;
  }
}

// ---------------------------------------------------------------------------
// FS-Lasso.

FsLassoPolicy::FsLassoPolicy(int dim, FsLassoOptions opts, RngStream rng)
    : opts_(std::move(opts)),
      rng_(rng),
      quad_e_(dim),
      quad_g_(dim),
      beta_tilde_(Eigen::VectorXd::Zero(dim)),
      beta_hat_(Eigen::VectorXd::Zero(dim)) {
  if (dim < 1) throw std::invalid_argument("fslasso: dim must be >= 1");
  if (!opts_.q) throw std::invalid_argument("fslasso: forced budget q is required");
  if (!(opts_.h > 0.0)) throw std::invalid_argument("fslasso: h must be > 0");
  if (!(opts_.lambda1 > 0.0)) throw std::invalid_argument("fslasso: lambda1 must be > 0");
  if (!opts_.lambda2) throw std::invalid_argument("fslasso: lambda2 schedule is required");
  if (opts_.initial_beta_tilde.size() != 0) {
    if (opts_.initial_beta_tilde.size() != dim)
      throw std::invalid_argument("fslasso: initial_beta_tilde has wrong dimension");
    beta_tilde_ = opts_.initial_beta_tilde;
  }
  if (opts_.initial_beta_hat.size() != 0) {
    if (opts_.initial_beta_hat.size() != dim)
      throw std::invalid_argument("fslasso: initial_beta_hat has wrong dimension");
    beta_hat_ = opts_.initial_beta_hat;
  }
  estimate_used_ = beta_hat_;
}

int FsLassoPolicy::select_arm(const ContextSet& ctx) {
  if (double(n_e_) <= opts_.q(n_g_)) {
    last_forced_ = true;
    last_greedy_ = false;
    return rng_.uniform_int(ctx.num_arms());
  }
  last_forced_ = false;
  last_greedy_ = true;
  const Eigen::VectorXd scores = ctx.features * beta_tilde_;
  const int a_tilde = argmax_lowest(scores);
  double best_other = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < ctx.num_arms(); ++k)
    if (k != a_tilde) best_other = std::max(best_other, scores[k]);
  if (scores[a_tilde] > best_other + opts_.h) {
    estimate_used_ = beta_tilde_;
    return a_tilde;
  }
  estimate_used_ = beta_hat_;
  return argmax_lowest(ctx.features * beta_hat_);
}

void FsLassoPolicy::observe(const ContextSet& ctx, int arm, double reward) {
  ++rounds_;
  const Eigen::VectorXd x = ctx.features.row(arm).transpose();
  if (last_forced_) {
    quad_e_.add_sample(1.0, x, reward);
    ++n_e_;
    const LassoSolution sol =
        solve(quad_e_.scaled(1.0 / n_e_), opts_.lambda1, opts_.solver, &beta_tilde_);
    beta_tilde_ = sol.beta;
    if (!sol.converged) ++unconverged_;
  } else {
    quad_g_.add_sample(1.0, x, reward);
    const double lambda = opts_.lambda2(rounds_, n_g_);
    ++n_g_;
    const LassoSolution sol =
        solve(quad_g_.scaled(1.0 / n_g_), lambda, opts_.solver, &beta_hat_);
    beta_hat_ = sol.beta;
    if (!sol.converged) ++unconverged_;
  }
}

// ---------------------------------------------------------------------------
// Oracle and uniform baselines.

OraclePolicy::OraclePolicy(SparseParameter param) : param_(std::move(param)) {
  param_.validate();
  estimate_used_ = param_.beta_star;
  last_greedy_ = true;
}

int OraclePolicy::select_arm(const ContextSet& ctx) {
  return argmax_lowest(ctx.features * param_.beta_star);
}

void OraclePolicy::observe(const ContextSet&, int, double) {}

UniformPolicy::UniformPolicy(RngStream rng) : rng_(rng) {}

int UniformPolicy::select_arm(const ContextSet& ctx) { return rng_.uniform_int(ctx.num_arms()); }

void UniformPolicy::observe(const ContextSet&, int, double) {}

// ---------------------------------------------------------------------------
// Config-file construction.

void to_json(json& j, const PolicySpec& spec) {
  j = json{{"name", spec.name}, {"kind", spec.kind}, {"params", spec.params}};
}

void from_json(const json& j, PolicySpec& spec) {
  reject_unknown_keys(j, {"name", "kind", "params"}, "policy");
  spec.name = require_key(j, "name", "policy").get<std::string>();
  spec.kind = require_key(j, "kind", "policy").get<std::string>();
  spec.params = j.contains("params") ? j.at("params") : json::object();
  if (spec.name.empty()) throw std::invalid_argument("policy: name must be non-empty");
  if (!spec.params.is_object())
    throw std::invalid_argument("policy '" + spec.name + "': params must be a JSON object");
}

namespace {

struct FsWParse {
  json resolved;
  // Deferred so resolution can still report a theory-mode M0 too large to run.
  std::function<FsWLassoOptions()> make;
};

FsWParse parse_fswlasso(const json& params, int d) {
  FsWParse out;
  if (get_bool_or(params, "theory_mode", false, "fswlasso")) {
    reject_unknown_keys(params,
                        {"theory_mode", "delta", "sigma", "x_max", "s0_guess",
                         "phi_star_sq_guess", "rho_guess", "alpha_guess", "delta_star_guess"},
                        "fswlasso");
    const double delta = get_number(params, "delta", "fswlasso");
    const double sigma = get_number(params, "sigma", "fswlasso");
    const double x_max = get_number(params, "x_max", "fswlasso");
    const int s0 = get_int(params, "s0_guess", "fswlasso");
    const double phi = get_number(params, "phi_star_sq_guess", "fswlasso");
    const double rho = get_number(params, "rho_guess", "fswlasso");
    const double alpha = get_number(params, "alpha_guess", "fswlasso");
    const double dstar = get_number(params, "delta_star_guess", "fswlasso");
    const FsWTheoryParams tp =
        fswlasso_theory_params(d, delta, sigma, x_max, s0, phi, rho, alpha, dstar);
    out.resolved = params;
    out.resolved["derived"] =
        json{{"M0", tp.m0}, {"w", tp.w}, {"tau", tp.tau}, {"c2", tp.c2}};
    out.make = [tp, d, delta, sigma, x_max]() {
      if (tp.m0 > std::int64_t(std::numeric_limits<int>::max()))
        throw std::invalid_argument(
            "fswlasso: theory-mode M0 = " + std::to_string(tp.m0) +
            " exceeds any runnable horizon; use practical mode with tuned knobs");
      const int m0 = int(tp.m0);
      const double w = tp.w;
      FsWLassoOptions opts;
      opts.M0 = m0;
      opts.w = w;
      opts.lambda = [m0, w, d, delta, sigma, x_max](int n) {
        return fswlasso_lambda_theory(n, m0, w, d, delta, sigma, x_max);
      };
      return opts;
    };
    return out;
  }
  reject_unknown_keys(params, {"theory_mode", "M0", "w", "lambda_scale"}, "fswlasso");
  const int M0 = get_int_or(params, "M0", 0, "fswlasso");
  const double w = get_number_or(params, "w", 1.0, "fswlasso");
  const double scale = get_number_or(params, "lambda_scale", 0.5, "fswlasso");
  if (M0 < 0) throw std::invalid_argument("fswlasso: 'M0' must be >= 0");
  require_positive(w, "w", "fswlasso");
  require_positive(scale, "lambda_scale", "fswlasso");
  out.resolved = json{{"theory_mode", false}, {"M0", M0}, {"w", w}, {"lambda_scale", scale}};
  out.make = [M0, w, scale, d]() {
    FsWLassoOptions opts;
    opts.M0 = M0;
    opts.w = w;
    opts.lambda = practical_lambda_schedule(scale, d, M0, w);
    return opts;
  };
  return out;
}

struct FsLParse {
  FsLassoOptions opts;
  json resolved;
};

FsLParse parse_fslasso(const json& params, int d) {
  FsLParse out;
  out.resolved = params;
  if (get_bool_or(params, "theory_mode", false, "fslasso")) {
    reject_unknown_keys(params,
                        {"theory_mode", "sigma", "x_max", "s0_guess", "phi_star_sq_guess",
                         "rho_guess", "alpha_guess", "delta_star_guess"},
                        "fslasso");
    const double sigma = get_number(params, "sigma", "fslasso");
    const double x_max = get_number(params, "x_max", "fslasso");
    const int s0 = get_int(params, "s0_guess", "fslasso");
    const double phi = get_number(params, "phi_star_sq_guess", "fslasso");
    const double rho = get_number(params, "rho_guess", "fslasso");
    const double alpha = get_number(params, "alpha_guess", "fslasso");
    const double dstar = get_number(params, "delta_star_guess", "fslasso");
    FsLassoTheoryParams tp =
        fslasso_theory_params(d, sigma, x_max, s0, phi, rho, alpha, dstar);
    out.opts.q = tp.q;
    out.opts.h = tp.h;
    out.opts.lambda1 = tp.lambda1;
    out.opts.lambda2 = tp.lambda2;
    out.resolved["derived"] =
        json{{"h", tp.h}, {"lambda1", tp.lambda1}, {"q_at_0", tp.q(0)}};
    return out;
  }
  reject_unknown_keys(params, {"theory_mode", "q_scale", "h", "lambda1", "lambda2_scale"},
                      "fslasso");
  const double q_scale = get_number_or(params, "q_scale", 1.0, "fslasso");
  out.opts.h = get_number_or(params, "h", 0.05, "fslasso");
  out.opts.lambda1 = get_number_or(params, "lambda1", 0.05, "fslasso");
  const double l2_scale = get_number_or(params, "lambda2_scale", 0.5, "fslasso");
  if (q_scale < 0.0) throw std::invalid_argument("fslasso: 'q_scale' must be >= 0");
  require_positive(out.opts.h, "h", "fslasso");
  require_positive(out.opts.lambda1, "lambda1", "fslasso");
  require_positive(l2_scale, "lambda2_scale", "fslasso");
  out.opts.q = practical_forced_budget(q_scale, d);
  out.opts.lambda2 = practical_lambda2_schedule(l2_scale, d);
  out.resolved = json{{"theory_mode", false},
                      {"q_scale", q_scale},
                      {"h", out.opts.h},
                      {"lambda1", out.opts.lambda1},
                      {"lambda2_scale", l2_scale}};
  return out;
}

struct ScalarLambdaParse {
  int n0 = 0;
  double lambda_scale = 0.0;
  json resolved;
};

ScalarLambdaParse parse_greedy(const json& params, const char* what) {
  reject_unknown_keys(params, {"lambda_scale"}, what);
  ScalarLambdaParse out;
  out.lambda_scale = get_number_or(params, "lambda_scale", 0.5, what);
  require_positive(out.lambda_scale, "lambda_scale", what);
  out.resolved = json{{"lambda_scale", out.lambda_scale}};
  return out;
}

ScalarLambdaParse parse_estc(const json& params) {
  reject_unknown_keys(params, {"n0", "lambda_scale"}, "estc");
  ScalarLambdaParse out;
  out.n0 = get_int(params, "n0", "estc");
  if (out.n0 < 0) throw std::invalid_argument("estc: 'n0' must be >= 0");
  out.lambda_scale = get_number_or(params, "lambda_scale", 0.5, "estc");
  require_positive(out.lambda_scale, "lambda_scale", "estc");
  out.resolved = json{{"n0", out.n0}, {"lambda_scale", out.lambda_scale}};
  return out;
}

}  // namespace

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const Environment& env,
                                    RngStream rng) {
  const int d = env.param().dim();
  if (!spec.params.is_object())
    throw std::invalid_argument("policy '" + spec.name + "': params must be a JSON object");
  if (spec.kind == "fswlasso")
    return std::make_unique<FsWLassoPolicy>(d, parse_fswlasso(spec.params, d).make(), rng);
  if (spec.kind == "fslasso")
    return std::make_unique<FsLassoPolicy>(d, parse_fslasso(spec.params, d).opts, rng);
  if (spec.kind == "greedy-lasso") {
    const auto parsed = parse_greedy(spec.params, "greedy-lasso");
    GreedyLassoOptions opts;
    opts.lambda = practical_lambda_schedule(parsed.lambda_scale, d, 0, 1.0);
    return std::make_unique<GreedyLassoPolicy>(d, std::move(opts));
  }
  if (spec.kind == "estc") {
    const auto parsed = parse_estc(spec.params);
    EstcOptions opts;
    opts.n0 = parsed.n0;
    opts.lambda = practical_lambda_schedule(parsed.lambda_scale, d, 0, 1.0);
    return std::make_unique<EstcPolicy>(d, std::move(opts), rng);
  }
  if (spec.kind == "oracle") {
    reject_unknown_keys(spec.params, {}, "oracle");
    return std::make_unique<OraclePolicy>(env.param());
  }
  if (spec.kind == "uniform") {
    reject_unknown_keys(spec.params, {}, "uniform");
    return std::make_unique<UniformPolicy>(rng);
  }
  throw std::invalid_argument("unknown policy kind '" + spec.kind + "'");
}

nlohmann::json resolve_policy_params(const PolicySpec& spec, const Environment& env) {
  const int d = env.param().dim();
  if (!spec.params.is_object())
    throw std::invalid_argument("policy '" + spec.name + "': params must be a JSON object");
  if (spec.kind == "fswlasso") return parse_fswlasso(spec.params, d).resolved;
  if (spec.kind == "fslasso") return parse_fslasso(spec.params, d).resolved;
  if (spec.kind == "greedy-lasso") return parse_greedy(spec.params, "greedy-lasso").resolved;
  if (spec.kind == "estc") return parse_estc(spec.params).resolved;
  if (spec.kind == "oracle" || spec.kind == "uniform") {
    reject_unknown_keys(spec.params, {}, spec.kind.c_str());
    return json::object();
  }
  throw std::invalid_argument("unknown policy kind '" + spec.kind + "'");
}

}  // namespace sparsebandit
