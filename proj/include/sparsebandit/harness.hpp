#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "sparsebandit/environment.hpp"
#include "sparsebandit/policies.hpp"

namespace sparsebandit {

// A replicated bandit run: one environment family, several policies, R
// independent replications of T rounds each.
struct ExperimentConfig {
  EnvironmentSpec environment;
  std::vector<PolicySpec> policies;
  int T = 2000;
  int replications = 100;
  std::uint64_t master_seed = 0;
  std::string output_dir = "results";
  // Per-round estimation-error tracking plus regret-cap auditing. Slower and
  // memory heavier, so off by default.
  bool record_debug = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& config);
// Strict: unknown keys are errors, except "resolved_policies", which
// emit_results adds to the persisted copy and which is ignored on load so an
// emitted config.json can be rerun as-is.
void from_json(const nlohmann::json& j, ExperimentConfig& config);

// One (policy, replication) trajectory. Regret is measured on expected
// rewards (noiseless), so inst_regret is nonnegative and cum_regret is
// nondecreasing by construction.
struct RegretTrace {
  std::string policy;
  int rep = 0;
  std::vector<double> inst_regret;  // length T
  std::vector<double> cum_regret;   // prefix sums of inst_regret
  std::vector<int> arms;
  // record_debug only: l1 error of the estimate behind each greedy pick, NaN
  // on rounds that did not rank arms by an estimate. Empty otherwise.
  std::vector<double> est_error;
  int unconverged_solves = 0;
  // record_debug only: rounds whose regret exceeded the applicable cap,
  //   any round     2 x_max ||beta*||_1,
  //   greedy round  2 x_max ||beta* - beta_used||_1.
  // Either count being nonzero means a policy or solver bug.
  int bound_violations = 0;
};

struct PolicySummary {
  std::string policy;
  std::vector<double> mean_cum;  // per-round mean of cum_regret across reps
  std::vector<double> std_cum;   // sample std (divisor R-1); all zero when R = 1
};

struct ExperimentResult {
  std::vector<RegretTrace> traces;     // ordered (policy index, rep)
  std::vector<PolicySummary> summary;  // config order
};

// Runs one replication of one policy. Streams are derived as
//   environment  hash(master_seed, rep, "env")
//   contexts     hash(master_seed, rep, "ctx")
//   noise        hash(master_seed, rep, "noise")
//   policy       hash(master_seed, hash(name), rep, "policy")
// Only the last involves the policy name: every policy in a replication sees
// the same instance, contexts and noise draws, and removing one policy from
// the config cannot perturb another's trace.
RegretTrace run_replication(const ExperimentConfig& config, const PolicySpec& policy, int rep);

// All (policy, rep) pairs on up to `threads` workers pulling from a shared
// queue. Each pair writes a slot fixed up front, so the result is bitwise
// identical for every thread count.
ExperimentResult run_experiment(const ExperimentConfig& config, int threads = 1);

// Ready-made configs: "experiment1" / "experiment2" at publication scale
// (d = 100, T = 2000, 100 replications) and "experiment1-desk" /
// "experiment2-desk" at a scale that finishes in minutes (d = 30, T = 1500,
// 50 replications). experiment1 is the correlated-Gaussian design,
// experiment2 the fixed-suboptimal-arms design. Throws on any other name.
ExperimentConfig make_packaged_config(const std::string& name);

// Writes traces.csv, summary.csv, plot.svg and config.json into output_dir,
// creating it if missing. Doubles use %.17g so a reload is exact. Files are
// staged under a .tmp suffix and renamed once all four are complete; a
// mid-write failure removes the staged files and leaves no final artifact.
// Throws before touching the filesystem when the trace list is empty.
void emit_results(const ExperimentResult& result, const ExperimentConfig& config,
                  const std::string& output_dir);

}  // namespace sparsebandit
