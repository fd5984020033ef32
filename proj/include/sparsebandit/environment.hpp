#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "sparsebandit/rng.hpp"

namespace sparsebandit {

// Ground-truth regression vector. Off-support entries are exactly zero and
// the on-support block has unit Euclidean norm by construction.
struct SparseParameter {
  Eigen::VectorXd beta_star;
  std::vector<int> support;  // sorted, distinct

  int dim() const { return static_cast<int>(beta_star.size()); }
  int s0() const { return static_cast<int>(support.size()); }
  double l1_bound() const { return beta_star.lpNorm<1>(); }
  void validate() const;
};

// Support drawn uniformly among size-s0 subsets of {0..d-1}; on-support values
// uniform on the unit sphere of that subspace.
SparseParameter make_sparse_parameter(RngStream& rng, int d, int s0);

// One round's decision set: row k holds arm k's feature vector. x_max bounds
// every |entry| in this set (the clip level when clipping is on, otherwise the
// realized maximum).
struct ContextSet {
  int round = 0;
  Eigen::MatrixXd features;  // K x d
  double x_max = 0.0;

  int num_arms() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

enum class EnvKind { CorrelatedGaussian, FixedSuboptimal, Custom };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& s);

// Interval the per-round best arm's expected reward is pinned into for the
// FixedSuboptimal construction.
inline constexpr double kOptimalRewardLow = 0.9;
inline constexpr double kOptimalRewardHigh = 1.0;

struct EnvironmentSpec {
  EnvKind kind = EnvKind::CorrelatedGaussian;
  int d = 100;
  int K = 10;
  int s0 = 5;
  double noise_sigma = 0.5;
  // CorrelatedGaussian: common pairwise correlation of one coordinate across arms.
  double correlation = 0.7;
  // FixedSuboptimal: expected rewards the K-1 frozen arms are pinned to.
  std::vector<double> fixed_rewards = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int num_spikes = 5;
  double spike_value = 5.0;
  double clip_x_max = 0.0;  // 0 disables clipping
  std::uint64_t seed = 0;   // standalone builds (diagnostics); the harness overrides

  void validate() const;
};

void to_json(nlohmann::json& j, const EnvironmentSpec& spec);
void from_json(const nlohmann::json& j, EnvironmentSpec& spec);

// x' = x + ((c - x'beta_*)/||beta_*||_2^2) beta_*, so x''beta_* = c exactly.
// Throws std::invalid_argument when beta_* is the zero vector.
Eigen::VectorXd pin_expected_reward(const Eigen::VectorXd& x, const SparseParameter& param,
                                    double c);

class Environment {
 public:
  using Sampler = std::function<Eigen::MatrixXd(RngStream&, int round)>;

  // Draws beta_* and (for FixedSuboptimal) the frozen arms and spike
  // coordinates from streams derived off root_seed. Immutable afterwards.
  static Environment build(const EnvironmentSpec& spec, std::uint64_t root_seed);
  // Test hook: caller supplies the parameter and a row-matrix sampler.
  static Environment custom(EnvironmentSpec spec, SparseParameter param, Sampler sampler);

  ContextSet sample_contexts(RngStream& rng, int round) const;

  const EnvironmentSpec& spec() const { return spec_; }
  const SparseParameter& param() const { return param_; }
  const Eigen::MatrixXd& fixed_arms() const { return fixed_arms_; }
  const std::vector<int>& spike_indices() const { return spikes_; }

 private:
  Environment() = default;
  EnvironmentSpec spec_;
  SparseParameter param_;
  Eigen::MatrixXd fixed_arms_;  // (K-1) x d, FixedSuboptimal only
  std::vector<int> spikes_;
  Sampler sampler_;
};

// x'beta_* plus centered Gaussian noise of scale noise_sigma. Always consumes
// exactly one normal draw so streams stay aligned across sigma choices.
double draw_reward(RngStream& rng, const Eigen::VectorXd& x, const SparseParameter& param,
                   double noise_sigma);

// (best arm, gap to the runner-up). Ties resolve to the lowest index, in which
// case the gap is 0. Requires K >= 2.
std::pair<int, double> optimal_arm(const ContextSet& ctx, const SparseParameter& param);

// Lowest-index argmax of a score vector; the shared tie rule.
int argmax_lowest(const Eigen::VectorXd& scores);

}  // namespace sparsebandit
