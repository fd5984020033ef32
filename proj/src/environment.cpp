#include "sparsebandit/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "sparsebandit/json_util.hpp"

namespace sparsebandit {

namespace {

using nlohmann::json;

// Partial Fisher-Yates: the first `count` entries of a shuffled copy of pool.
std::vector<int> draw_distinct(RngStream& rng, std::vector<int> pool, int count) {
  const int n = static_cast<int>(pool.size());
  for (int i = 0; i < count; ++i) {
    const int j = i + rng.uniform_int(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

void clip_and_stamp(ContextSet& ctx, double clip) {
  if (clip > 0.0) {
    ctx.features = ctx.features.cwiseMax(-clip).cwiseMin(clip);
    ctx.x_max = clip;
  } else {
    ctx.x_max = ctx.features.size() == 0 ? 0.0 : ctx.features.cwiseAbs().maxCoeff();
  }
}

}  // namespace

void SparseParameter::validate() const {
  if (beta_star.size() == 0) throw std::invalid_argument("parameter: empty beta");
  std::set<int> seen;
  for (int j : support) {
    if (j < 0 || j >= dim()) throw std::invalid_argument("parameter: support index out of range");
    if (!seen.insert(j).second) throw std::invalid_argument("parameter: duplicate support index");
  }
  for (int j = 0; j < dim(); ++j)
    if (beta_star[j] != 0.0 && !seen.count(j))
      throw std::invalid_argument("parameter: nonzero entry off the declared support");
}

SparseParameter make_sparse_parameter(RngStream& rng, int d, int s0) {
  if (d < 1 || s0 < 1 || s0 > d) throw std::invalid_argument("parameter: need 1 <= s0 <= d");
  std::vector<int> all(d);
  std::iota(all.begin(), all.end(), 0);
  SparseParameter param;
  param.support = draw_distinct(rng, std::move(all), s0);
  param.beta_star = Eigen::VectorXd::Zero(d);
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (int j : param.support) {
      const double v = rng.normal();
      param.beta_star[j] = v;
      norm_sq += v * v;
    }
  } while (norm_sq == 0.0);
  param.beta_star /= std::sqrt(norm_sq);
  return param;
}

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::CorrelatedGaussian: return "correlated_gaussian";
    case EnvKind::FixedSuboptimal: return "fixed_suboptimal";
    case EnvKind::Custom: return "custom";
  }
  throw std::logic_error("unreachable");
}

EnvKind env_kind_from_string(const std::string& s) {
  if (s == "correlated_gaussian") return EnvKind::CorrelatedGaussian;
  if (s == "fixed_suboptimal") return EnvKind::FixedSuboptimal;
  throw std::invalid_argument("environment: unknown kind '" + s + "'");
}

void EnvironmentSpec::validate() const {
  if (d < 1) throw std::invalid_argument("environment: d must be >= 1");
  if (K < 1) throw std::invalid_argument("environment: K must be >= 1");
  if (s0 < 1 || s0 > d) throw std::invalid_argument("environment: need 1 <= s0 <= d");
  if (noise_sigma < 0.0) throw std::invalid_argument("environment: noise_sigma must be >= 0");
  if (clip_x_max < 0.0) throw std::invalid_argument("environment: clip_x_max must be >= 0");
  if (kind == EnvKind::CorrelatedGaussian) {
    if (correlation < 0.0 || correlation > 1.0)
      throw std::invalid_argument("environment: correlation must lie in [0, 1]");
  }
  if (kind == EnvKind::FixedSuboptimal) {
    if (K < 2) throw std::invalid_argument("environment: fixed_suboptimal needs K >= 2");
    if (static_cast<int>(fixed_rewards.size()) != K - 1)
      throw std::invalid_argument("environment: fixed_rewards must have K-1 entries");
    for (double r : fixed_rewards)
      if (!std::isfinite(r) || r > kOptimalRewardLow)
        throw std::invalid_argument(
            "environment: fixed rewards must not exceed the optimal-reward interval");
    if (num_spikes < 0 || s0 + num_spikes > d)
      throw std::invalid_argument("environment: need s0 + num_spikes <= d");
  }
}

void to_json(json& j, const EnvironmentSpec& spec) {
  j = json{{"kind", to_string(spec.kind)},
           {"d", spec.d},
           {"K", spec.K},
           {"s0", spec.s0},
           {"noise_sigma", spec.noise_sigma},
           {"correlation", spec.correlation},
           {"fixed_rewards", spec.fixed_rewards},
           {"num_spikes", spec.num_spikes},
           {"spike_value", spec.spike_value},
           {"clip_x_max", spec.clip_x_max},
           {"seed", spec.seed}};
}

void from_json(const json& j, EnvironmentSpec& spec) {
  reject_unknown_keys(j,
                      {"kind", "d", "K", "s0", "noise_sigma", "correlation", "fixed_rewards",
                       "num_spikes", "spike_value", "clip_x_max", "seed"},
                      "environment");
  spec = EnvironmentSpec{};
  spec.kind = env_kind_from_string(j.at("kind").get<std::string>());
  spec.d = j.value("d", spec.d);
  spec.K = j.value("K", spec.K);
  spec.s0 = j.value("s0", spec.s0);
  spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
  spec.correlation = j.value("correlation", spec.correlation);
  spec.fixed_rewards = j.value("fixed_rewards", spec.fixed_rewards);
  spec.num_spikes = j.value("num_spikes", spec.num_spikes);
  spec.spike_value = j.value("spike_value", spec.spike_value);
  spec.clip_x_max = j.value("clip_x_max", spec.clip_x_max);
  spec.seed = j.value("seed", spec.seed);
  spec.validate();
}

Eigen::VectorXd pin_expected_reward(const Eigen::VectorXd& x, const SparseParameter& param,
                                    double c) {
  if (x.size() != param.beta_star.size())
    throw std::invalid_argument("environment: pin dimension mismatch");
  const double norm_sq = param.beta_star.squaredNorm();
  if (norm_sq == 0.0) throw std::invalid_argument("environment: cannot pin with beta_* = 0");
  return x + ((c - x.dot(param.beta_star)) / norm_sq) * param.beta_star;
}

Environment Environment::build(const EnvironmentSpec& spec, std::uint64_t root_seed) {
  spec.validate();
  if (spec.kind == EnvKind::Custom)
    throw std::invalid_argument("environment: custom environments need Environment::custom");

  Environment env;
  env.spec_ = spec;
  RngStream param_rng = RngStream(root_seed).derive("param");
  env.param_ = make_sparse_parameter(param_rng, spec.d, spec.s0);

  if (spec.kind == EnvKind::FixedSuboptimal) {
    RngStream build_rng = RngStream(root_seed).derive("arms");
    const int fixed = spec.K - 1;
    env.fixed_arms_.resize(fixed, spec.d);
    for (int k = 0; k < fixed; ++k) {
      Eigen::VectorXd z(spec.d);
      for (int j = 0; j < spec.d; ++j) z[j] = build_rng.normal();
      env.fixed_arms_.row(k) = pin_expected_reward(z, env.param_, spec.fixed_rewards[k]);
    }
    // Spike coordinates live off the support, so overwriting them never moves
    // any arm's expected reward.
    std::vector<int> complement;
    for (int j = 0; j < spec.d; ++j)
      if (std::find(env.param_.support.begin(), env.param_.support.end(), j) ==
          env.param_.support.end())
        complement.push_back(j);
    env.spikes_ = draw_distinct(build_rng, std::move(complement), spec.num_spikes);
    for (int k = 0; k < fixed; ++k)
      for (int j : env.spikes_) env.fixed_arms_(k, j) = spec.spike_value;
  }
  return env;
}

Environment Environment::custom(EnvironmentSpec spec, SparseParameter param, Sampler sampler) {
  param.validate();
  if (param.dim() != spec.d) throw std::invalid_argument("environment: custom dim mismatch");
  Environment env;
  spec.kind = EnvKind::Custom;
  env.spec_ = std::move(spec);
  env.param_ = std::move(param);
  env.sampler_ = std::move(sampler);
  return env;
}

ContextSet Environment::sample_contexts(RngStream& rng, int round) const {
  ContextSet ctx;
  ctx.round = round;
  switch (spec_.kind) {
    case EnvKind::CorrelatedGaussian: {
      // Coordinate i of the K arms is jointly Gaussian with unit variances and
      // common correlation c: x_k = sqrt(1-c) z_k + sqrt(c) g. Consumption
      // order per coordinate: the shared g first, then z_1..z_K.
      ctx.features.resize(spec_.K, spec_.d);
      const double a = std::sqrt(1.0 - spec_.correlation);
      const double b = std::sqrt(spec_.correlation);
      for (int j = 0; j < spec_.d; ++j) {
        const double g = rng.normal();
        for (int k = 0; k < spec_.K; ++k) ctx.features(k, j) = a * rng.normal() + b * g;
      }
      break;
    }
    case EnvKind::FixedSuboptimal: {
      ctx.features.resize(spec_.K, spec_.d);
      ctx.features.topRows(spec_.K - 1) = fixed_arms_;
      Eigen::VectorXd z(spec_.d);
      for (int j = 0; j < spec_.d; ++j) z[j] = rng.normal();
      const double c = rng.uniform(kOptimalRewardLow, kOptimalRewardHigh);
      Eigen::VectorXd fresh = pin_expected_reward(z, param_, c);
      for (int j : spikes_) fresh[j] = spec_.spike_value;
      ctx.features.row(spec_.K - 1) = fresh;
      break;
    }
    case EnvKind::Custom: {
      ctx.features = sampler_(rng, round);
      if (ctx.features.cols() != spec_.d)
        throw std::runtime_error("environment: custom sampler returned wrong dimension");
      break;
    }
  }
  clip_and_stamp(ctx, spec_.clip_x_max);
  return ctx;
}

double draw_reward(RngStream& rng, const Eigen::VectorXd& x, const SparseParameter& param,
                   double noise_sigma) {
  if (noise_sigma < 0.0) throw std::invalid_argument("environment: noise_sigma must be >= 0");
  const double noise = rng.normal();
  return x.dot(param.beta_star) + noise_sigma * noise;
}

int argmax_lowest(const Eigen::VectorXd& scores) {
  int best = 0;
  for (int k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  return best;
}

std::pair<int, double> optimal_arm(const ContextSet& ctx, const SparseParameter& param) {
  if (ctx.num_arms() < 2) throw std::invalid_argument("environment: optimal_arm needs K >= 2");
  if (ctx.dim() != param.dim()) throw std::invalid_argument("environment: dimension mismatch");
  const Eigen::VectorXd scores = ctx.features * param.beta_star;
  const int best = argmax_lowest(scores);
  double runner_up = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < scores.size(); ++k)
    if (k != best) runner_up = std::max(runner_up, scores[k]);
  return {best, scores[best] - runner_up};
}

}  // namespace sparsebandit
