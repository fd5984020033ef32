#include "sparsebandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sparsebandit/json_util.hpp"
#include "sparsebandit/rng.hpp"

namespace sparsebandit {

namespace {

const nlohmann::json& require_key(const nlohmann::json& j, const char* key, const char* what) {
  if (!j.contains(key)) {
    throw std::invalid_argument(std::string(what) + ": missing key '" + key + "'");
  }
  return j.at(key);
}

int get_int(const nlohmann::json& j, const char* key, const char* what) {
  const nlohmann::json& v = require_key(j, key, what);
  if (!v.is_number_integer()) {
    throw std::invalid_argument(std::string(what) + ": '" + key + "' must be an integer");
  }
  return v.get<int>();
}

}  // namespace

void ExperimentConfig::validate() const {
  environment.validate();
  if (T < 1) throw std::invalid_argument("experiment config: T must be >= 1");
  if (replications < 1) {
    throw std::invalid_argument("experiment config: replications must be >= 1");
  }
  if (policies.empty()) {
    throw std::invalid_argument("experiment config: at least one policy is required");
  }
  std::set<std::string> names;
  for (const PolicySpec& p : policies) {
    if (p.name.empty()) throw std::invalid_argument("experiment config: policy name is empty");
    if (p.name.find_first_of(",\"\n\r") != std::string::npos) {
      throw std::invalid_argument("experiment config: policy name '" + p.name +
                                  "' contains CSV delimiter characters");
    }
    if (!names.insert(p.name).second) {
      throw std::invalid_argument("experiment config: duplicate policy name '" + p.name + "'");
    }
  }
  if (output_dir.empty()) {
    throw std::invalid_argument("experiment config: output_dir must be nonempty");
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& config) {
  j = nlohmann::json{{"environment", config.environment},
                     {"policies", config.policies},
                     {"T", config.T},
                     {"replications", config.replications},
                     {"master_seed", config.master_seed},
                     {"output_dir", config.output_dir},
                     {"record_debug", config.record_debug}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& config) {
  const char* what = "experiment config";
  reject_unknown_keys(j,
                      {"environment", "policies", "T", "replications", "master_seed",
                       "output_dir", "record_debug", "resolved_policies"},
                      what);
  config = ExperimentConfig{};
  require_key(j, "environment", what).get_to(config.environment);
  const nlohmann::json& pols = require_key(j, "policies", what);
  if (!pols.is_array()) {
    throw std::invalid_argument(std::string(what) + ": 'policies' must be an array");
  }
  config.policies = pols.get<std::vector<PolicySpec>>();
  config.T = get_int(j, "T", what);
  config.replications = get_int(j, "replications", what);
  if (j.contains("master_seed")) {
    const nlohmann::json& s = j.at("master_seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() &&
                                   s.get<std::int64_t>() < 0)) {
      throw std::invalid_argument(std::string(what) +
                                  ": 'master_seed' must be a nonnegative integer");
    }
    config.master_seed = s.get<std::uint64_t>();
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) {
      throw std::invalid_argument(std::string(what) + ": 'output_dir' must be a string");
    }
    config.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("record_debug")) {
    if (!j.at("record_debug").is_boolean()) {
      throw std::invalid_argument(std::string(what) + ": 'record_debug' must be a boolean");
    }
    config.record_debug = j.at("record_debug").get<bool>();
  }
  config.validate();
}

RegretTrace run_replication(const ExperimentConfig& config, const PolicySpec& policy, int rep) {
  config.validate();
  if (rep < 0 || rep >= config.replications) {
    throw std::invalid_argument("run_replication: rep out of range");
  }
  const std::uint64_t master = config.master_seed;
  const std::uint64_t r = static_cast<std::uint64_t>(rep);
  const std::uint64_t env_seed = hash_combine(hash_combine(master, r), hash_tag("env"));
  Environment env = Environment::build(config.environment, env_seed);
  RngStream ctx_rng = derive_stream(master, {r}, "ctx");
  RngStream noise_rng = derive_stream(master, {r}, "noise");
  RngStream policy_rng = derive_stream(master, {hash_tag(policy.name), r}, "policy");
  std::unique_ptr<Policy> pol = make_policy(policy, env, policy_rng);

  const SparseParameter& param = env.param();
  const double beta_l1 = param.l1_bound();
  RegretTrace trace;
  trace.policy = policy.name;
  trace.rep = rep;
  trace.inst_regret.reserve(config.T);
  trace.cum_regret.reserve(config.T);
  trace.arms.reserve(config.T);
  if (config.record_debug) trace.est_error.reserve(config.T);

  double cum = 0.0;
  for (int t = 1; t <= config.T; ++t) {
    ContextSet ctx = env.sample_contexts(ctx_rng, t);
    int arm = pol->select_arm(ctx);
    double reward =
        draw_reward(noise_rng, ctx.features.row(arm), param, config.environment.noise_sigma);
    pol->observe(ctx, arm, reward);

    Eigen::VectorXd expected = ctx.features * param.beta_star;
    // The max ranges over a set containing the chosen entry, so reg >= 0 holds
    // exactly in floating point as well.
    double reg = expected.maxCoeff() - expected(arm);
    cum += reg;
    trace.inst_regret.push_back(reg);
    trace.cum_regret.push_back(cum);
    trace.arms.push_back(arm);

    if (config.record_debug) {
      double err = std::numeric_limits<double>::quiet_NaN();
      double cap = 2.0 * ctx.x_max * beta_l1;
      if (pol->last_greedy() && pol->last_estimate().size() == param.beta_star.size()) {
        err = (param.beta_star - pol->last_estimate()).lpNorm<1>();
        cap = std::min(cap, 2.0 * ctx.x_max * err);
      }
      trace.est_error.push_back(err);
      if (reg > cap * (1.0 + 1e-9) + 1e-12) ++trace.bound_violations;
    }
  }
  trace.unconverged_solves = pol->unconverged_solves();
  return trace;
}

ExperimentResult run_experiment(const ExperimentConfig& config, int threads) {
  config.validate();
  if (threads < 1) throw std::invalid_argument("run_experiment: threads must be >= 1");
  const int num_policies = static_cast<int>(config.policies.size());
  const int reps = config.replications;
  const int total = num_policies * reps;

  ExperimentResult result;
  result.traces.resize(total);

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= total || failed.load()) return;
      try {
        result.traces[i] = run_replication(config, config.policies[i / reps], i % reps);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  int workers = std::min(threads, total);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failed.load()) std::rethrow_exception(first_error);

  result.summary.reserve(num_policies);
  for (int p = 0; p < num_policies; ++p) {
    PolicySummary s;
    s.policy = config.policies[p].name;
    s.mean_cum.assign(config.T, 0.0);
    s.std_cum.assign(config.T, 0.0);
    for (int rep = 0; rep < reps; ++rep) {
      const std::vector<double>& cum = result.traces[p * reps + rep].cum_regret;
      for (int t = 0; t < config.T; ++t) s.mean_cum[t] += cum[t];
    }
    for (double& m : s.mean_cum) m /= reps;
    if (reps > 1) {
      for (int rep = 0; rep < reps; ++rep) {
        const std::vector<double>& cum = result.traces[p * reps + rep].cum_regret;
        for (int t = 0; t < config.T; ++t) {
          double dev = cum[t] - s.mean_cum[t];
          s.std_cum[t] += dev * dev;
        }
      }
      for (double& v : s.std_cum) v = std::sqrt(v / (reps - 1));
    }
    result.summary.push_back(std::move(s));
  }
  return result;
}

namespace {

PolicySpec packaged_policy(std::string name, std::string kind, nlohmann::json params) {
  PolicySpec p;
  p.name = std::move(name);
  p.kind = std::move(kind);
  p.params = std::move(params);
  return p;
}

}  // namespace

ExperimentConfig make_packaged_config(const std::string& name) {
  std::string base = name;
  bool desk = false;
  const std::string suffix = "-desk";
  if (base.size() > suffix.size() &&
      base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
    desk = true;
    base.resize(base.size() - suffix.size());
  }
  if (base != "experiment1" && base != "experiment2") {
    throw std::invalid_argument("unknown packaged config '" + name +
                                "'; available: experiment1, experiment2, "
                                "experiment1-desk, experiment2-desk");
  }

  ExperimentConfig c;
  c.environment.K = 10;
  c.environment.s0 = 5;
  c.environment.noise_sigma = 0.5;
  c.environment.num_spikes = 5;
  c.environment.spike_value = 5.0;
  if (desk) {
    c.environment.d = 30;
    c.T = 1500;
    c.replications = 50;
  } else {
    c.environment.d = 100;
    c.T = 2000;
    c.replications = 100;
  }
  c.master_seed = 20250814;
  c.output_dir = "results/" + name;

  // Every tunable knob is spelled out so --override can reach it. The values
  // are the per-policy best performers from seeded desk-scale sweeps (each
  // policy tuned for its own lowest mean cumulative regret, then frozen).
  if (base == "experiment1") {
    // Rich context diversity: greedy estimators converge fast, so small M0
    // and sparsity-level penalties win. FS-Lasso's forced fit sees only
    // ~q(T) = O(log T) rows at this scale, so the margin threshold h is kept
    // high enough that the better-fed greedy estimate usually decides.
    nlohmann::json fsw = {
        {"theory_mode", false}, {"M0", 10}, {"w", 1.0}, {"lambda_scale", 0.5}};
    nlohmann::json fsl = {
        {"q_scale", 1.0}, {"h", 0.6}, {"lambda1", 0.3}, {"lambda2_scale", 0.3}};
    nlohmann::json greedy = {{"lambda_scale", 0.5}};
    c.environment.kind = EnvKind::CorrelatedGaussian;
    c.environment.correlation = 0.7;
    c.policies = {packaged_policy("fs-wlasso", "fswlasso", fsw),
                  packaged_policy("fs-lasso", "fslasso", fsl),
                  packaged_policy("greedy-lasso", "greedy-lasso", greedy),
                  packaged_policy("oracle", "oracle", nlohmann::json::object())};
  } else {
    // Adversarial frozen-arm design: the optimal arm's score keeps a noise
    // floor fed only by its own (fresh) rows, so penalties far below the
    // sparsity level and a long forced stage are what minimize regret.
    nlohmann::json fsw = {
        {"theory_mode", false}, {"M0", 135}, {"w", 1.0}, {"lambda_scale", 0.0075}};
    c.environment.kind = EnvKind::FixedSuboptimal;
    c.policies = {packaged_policy("fs-wlasso", "fswlasso", fsw),
                  packaged_policy("estc-50", "estc",
                                  nlohmann::json{{"n0", 50}, {"lambda_scale", 0.005}}),
                  packaged_policy("estc-100", "estc",
                                  nlohmann::json{{"n0", 100}, {"lambda_scale", 0.005}}),
                  packaged_policy("estc-200", "estc",
                                  nlohmann::json{{"n0", 200}, {"lambda_scale", 0.0075}}),
                  packaged_policy("oracle", "oracle", nlohmann::json::object()),
                  packaged_policy("uniform", "uniform", nlohmann::json::object())};
  }
  c.validate();
  return c;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string render_plot_svg(const ExperimentResult& result, const ExperimentConfig& config) {
  const int T = config.T;
  const double width = 960, height = 600;
  const double left = 70, right = width - 180, top = 45, bottom = height - 50;

  double ymax = 0.0;
  for (const PolicySummary& s : result.summary) {
    for (int t = 0; t < T; ++t) ymax = std::max(ymax, s.mean_cum[t] + s.std_cum[t]);
  }
  if (ymax <= 0.0) ymax = 1.0;

  auto xmap = [&](int t) { return left + (right - left) * (t - 1) / std::max(T - 1, 1); };
  auto ymap = [&](double v) { return bottom - (bottom - top) * (v / ymax); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"600\" "
         "viewBox=\"0 0 960 600\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"960\" height=\"600\" fill=\"#ffffff\"/>\n"
      << "<text x=\"" << fmt2((left + right) / 2) << "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">Cumulative regret, mean with +/- 1 std "
         "band over "
      << config.replications << " replications</text>\n";

  // Axes and ticks.
  svg << "<line x1=\"" << fmt2(left) << "\" y1=\"" << fmt2(bottom) << "\" x2=\"" << fmt2(right)
      << "\" y2=\"" << fmt2(bottom) << "\" stroke=\"#000000\"/>\n"
      << "<line x1=\"" << fmt2(left) << "\" y1=\"" << fmt2(top) << "\" x2=\"" << fmt2(left)
      << "\" y2=\"" << fmt2(bottom) << "\" stroke=\"#000000\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    int t = 1 + static_cast<int>(std::lround((T - 1) * (i / 4.0)));
    double x = xmap(t);
    svg << "<line x1=\"" << fmt2(x) << "\" y1=\"" << fmt2(bottom) << "\" x2=\"" << fmt2(x)
        << "\" y2=\"" << fmt2(bottom + 5) << "\" stroke=\"#000000\"/>\n"
        << "<text x=\"" << fmt2(x) << "\" y=\"" << fmt2(bottom + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << t
        << "</text>\n";
    double v = ymax * (i / 4.0);
    double y = ymap(v);
    char label[32];
    std::snprintf(label, sizeof(label), "%.4g", v);
    svg << "<line x1=\"" << fmt2(left - 5) << "\" y1=\"" << fmt2(y) << "\" x2=\"" << fmt2(left)
        << "\" y2=\"" << fmt2(y) << "\" stroke=\"#000000\"/>\n"
        << "<text x=\"" << fmt2(left - 8) << "\" y=\"" << fmt2(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << label
        << "</text>\n";
  }
  svg << "<text x=\"" << fmt2((left + right) / 2) << "\" y=\"" << fmt2(height - 14)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">round t"
         "</text>\n"
      << "<text x=\"18\" y=\"" << fmt2((top + bottom) / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 "
      << fmt2((top + bottom) / 2) << ")\">cumulative regret</text>\n";

  // One band path plus one mean polyline per policy, config order.
  for (std::size_t p = 0; p < result.summary.size(); ++p) {
    const PolicySummary& s = result.summary[p];
    const char* color = kPalette[p % kPaletteSize];
    std::ostringstream band;
    for (int t = 1; t <= T; ++t) {
      band << (t == 1 ? "M" : "L") << fmt2(xmap(t)) << ' '
           << fmt2(ymap(s.mean_cum[t - 1] + s.std_cum[t - 1])) << ' ';
    }
    for (int t = T; t >= 1; --t) {
      band << 'L' << fmt2(xmap(t)) << ' '
           << fmt2(ymap(std::max(0.0, s.mean_cum[t - 1] - s.std_cum[t - 1]))) << ' ';
    }
    band << 'Z';
    svg << "<path d=\"" << band.str() << "\" fill=\"" << color
        << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (int t = 1; t <= T; ++t) {
      svg << fmt2(xmap(t)) << ',' << fmt2(ymap(s.mean_cum[t - 1])) << (t == T ? "" : " ");
    }
    svg << "\"/>\n";
    double ly = top + 16 + 20 * static_cast<double>(p);
    svg << "<line x1=\"" << fmt2(right + 12) << "\" y1=\"" << fmt2(ly) << "\" x2=\""
        << fmt2(right + 36) << "\" y2=\"" << fmt2(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << fmt2(right + 42) << "\" y=\"" << fmt2(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.policy << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("emit_results: cannot open " + path.string());
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("emit_results: write failed for " + path.string());
}

}  // namespace

void emit_results(const ExperimentResult& result, const ExperimentConfig& config,
                  const std::string& output_dir) {
  if (result.traces.empty()) {
    throw std::runtime_error("emit_results: no traces to write");
  }

  std::string traces_csv = "policy,rep,t,inst_regret,cum_regret,arm\n";
  for (const RegretTrace& trace : result.traces) {
    for (std::size_t i = 0; i < trace.inst_regret.size(); ++i) {
      traces_csv += trace.policy;
      traces_csv += ',';
      traces_csv += std::to_string(trace.rep);
      traces_csv += ',';
      traces_csv += std::to_string(i + 1);
      traces_csv += ',';
      traces_csv += fmt17(trace.inst_regret[i]);
      traces_csv += ',';
      traces_csv += fmt17(trace.cum_regret[i]);
      traces_csv += ',';
      traces_csv += std::to_string(trace.arms[i]);
      traces_csv += '\n';
    }
  }

  std::string summary_csv = "policy,t,mean_cum,std_cum\n";
  for (const PolicySummary& s : result.summary) {
    for (std::size_t t = 0; t < s.mean_cum.size(); ++t) {
      summary_csv += s.policy;
      summary_csv += ',';
      summary_csv += std::to_string(t + 1);
      summary_csv += ',';
      summary_csv += fmt17(s.mean_cum[t]);
      summary_csv += ',';
      summary_csv += fmt17(s.std_cum[t]);
      summary_csv += '\n';
    }
  }

  std::string svg = render_plot_svg(result, config);

  nlohmann::json jconfig = config;
  const std::uint64_t env_seed =
      hash_combine(hash_combine(config.master_seed, std::uint64_t{0}), hash_tag("env"));
  Environment env = Environment::build(config.environment, env_seed);
  nlohmann::json resolved = nlohmann::json::array();
  for (const PolicySpec& spec : config.policies) {
    resolved.push_back(nlohmann::json{
        {"name", spec.name}, {"kind", spec.kind}, {"params", resolve_policy_params(spec, env)}});
  }
  jconfig["resolved_policies"] = resolved;

  namespace fs = std::filesystem;
  fs::path dir(output_dir);
  fs::create_directories(dir);
  const std::pair<const char*, const std::string*> files[] = {
      {"traces.csv", &traces_csv},
      {"summary.csv", &summary_csv},
      {"plot.svg", &svg},
  };
  std::string config_text = jconfig.dump(2) + "\n";
  std::vector<fs::path> staged;
  try {
    for (const auto& [name, content] : files) {
      fs::path tmp = dir / (std::string(name) + ".tmp");
      write_file(tmp, *content);
      staged.push_back(tmp);
    }
    fs::path config_tmp = dir / "config.json.tmp";
    write_file(config_tmp, config_text);
    staged.push_back(config_tmp);
  } catch (...) {
    for (const fs::path& tmp : staged) {
      std::error_code ec;
      fs::remove(tmp, ec);
    }
    throw;
  }
  fs::rename(dir / "traces.csv.tmp", dir / "traces.csv");
  fs::rename(dir / "summary.csv.tmp", dir / "summary.csv");
  fs::rename(dir / "plot.svg.tmp", dir / "plot.svg");
  fs::rename(dir / "config.json.tmp", dir / "config.json");
}

}  // namespace sparsebandit
