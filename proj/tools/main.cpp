#include <CLI11.hpp>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "sparsebandit/diagnostics.hpp"
#include "sparsebandit/harness.hpp"
#include "sparsebandit/lasso.hpp"
#include "sparsebandit/rng.hpp"

namespace {

using namespace sparsebandit;
namespace fs = std::filesystem;

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file '" + path + "'");
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    // e.what() carries the byte offset of the failure.
    throw std::runtime_error("config file '" + path + "': " + e.what());
  }
}

// Sets root[path] = value for a dotted path such as
// "policies.0.params.lambda_scale". Every intermediate and the leaf must
// already exist: overrides tweak a config, they never extend its schema.
void apply_override(nlohmann::json& root, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override '" + assignment + "' is not of the form key=value");
  }
  std::string path = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);

  std::vector<std::string> tokens;
  std::istringstream in(path);
  std::string tok;
  while (std::getline(in, tok, '.')) tokens.push_back(tok);
  if (tokens.empty() || path.back() == '.') {
    throw std::invalid_argument("override path '" + path + "' is empty or malformed");
  }

  nlohmann::json* cur = &root;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& key = tokens[i];
    nlohmann::json* next = nullptr;
    if (cur->is_array()) {
      bool digits = !key.empty();
      for (char c : key) digits = digits && std::isdigit(static_cast<unsigned char>(c));
      if (!digits) {
        throw std::invalid_argument("override path '" + path + "': '" + key +
                                    "' must be an array index");
      }
      std::size_t idx = std::stoul(key);
      if (idx >= cur->size()) {
        throw std::invalid_argument("override path '" + path + "': index " + key +
                                    " out of range (array size " +
                                    std::to_string(cur->size()) + ")");
      }
      next = &(*cur)[idx];
    } else if (cur->is_object()) {
      if (!cur->contains(key)) {
        throw std::invalid_argument("override path '" + path + "': unknown key '" + key + "'");
      }
      next = &cur->at(key);
    } else {
      throw std::invalid_argument("override path '" + path + "': '" + key +
                                  "' descends into a scalar");
    }
    if (i + 1 == tokens.size()) {
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(value);
      } catch (const nlohmann::json::parse_error&) {
        parsed = value;  // unquoted strings stay strings
      }
      *next = std::move(parsed);
      return;
    }
    cur = next;
  }
}

// Staged write: the final path appears only after the content is complete.
void write_text_atomic(const std::string& path, const std::string& content) {
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, target);
}

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  bool verbose = false;
};

int cmd_run(const CommonFlags& flags) {
  nlohmann::json j = load_json_file(flags.config_path);
  for (const std::string& ov : flags.overrides) apply_override(j, ov);
  ExperimentConfig config = j.get<ExperimentConfig>();
  if (flags.seed_set) config.master_seed = flags.seed;
  if (!flags.out.empty()) config.output_dir = flags.out;
  if (flags.verbose) {
    std::cerr << "running " << config.policies.size() << " policies x "
              << config.replications << " replications x " << config.T << " rounds on "
              << flags.threads << " thread(s), master seed " << config.master_seed << "\n";
  }
  ExperimentResult result = run_experiment(config, flags.threads);
  emit_results(result, config, config.output_dir);
  if (flags.verbose) {
    for (const PolicySummary& s : result.summary) {
      std::cerr << "  " << s.policy << ": mean cumulative regret at T = "
                << s.mean_cum.back() << " (std " << s.std_cum.back() << ")\n";
    }
  }
  std::cout << "wrote traces.csv, summary.csv, plot.svg, config.json to " << config.output_dir
            << "\n";
  return 0;
}

int cmd_diagnose(const CommonFlags& flags) {
  nlohmann::json j = load_json_file(flags.config_path);
  for (const std::string& ov : flags.overrides) apply_override(j, ov);
  // Two accepted shapes: a full experiment config (its environment +
  // master_seed are used) or a bare environment spec.
  EnvironmentSpec spec;
  std::uint64_t seed = 0;
  if (j.is_object() && j.contains("environment")) {
    ExperimentConfig config = j.get<ExperimentConfig>();
    spec = config.environment;
    seed = config.master_seed;
  } else {
    spec = j.get<EnvironmentSpec>();
    seed = spec.seed;
  }
  if (flags.seed_set) seed = flags.seed;

  // Same derivation replication 0 of a run would use, so the report describes
  // the instance the experiment actually plays.
  std::uint64_t env_seed = hash_combine(hash_combine(seed, std::uint64_t{0}), hash_tag("env"));
  Environment env = Environment::build(spec, env_seed);
  DiagnosticsOptions opts;
  opts.seed = hash_combine(seed, hash_tag("diag"));
  if (flags.verbose) {
    std::cerr << "diagnosing d=" << spec.d << " K=" << spec.K << " s0=" << spec.s0
              << " instance (n_mc=" << opts.n_mc << ")\n";
  }
  DiagnosticsReport report = run_diagnostics(env, opts);

  nlohmann::json out = {
      {"phi_star_sq", report.phi_star_sq},
      {"phi_avg_sq", report.phi_avg_sq},
      {"rho", report.rho},
      {"phi_G_sq", report.phi_g_sq},
      {"margin", {{"alpha", report.margin_alpha}, {"delta_star", report.margin_delta_star}}},
      {"concentration", report.concentration_fraction}};
  std::string text = out.dump(2) + "\n";
  if (flags.out.empty()) {
    std::cout << text;
  } else {
    write_text_atomic(flags.out, text);
    std::cout << "wrote " << flags.out << "\n";
  }
  return 0;
}

int cmd_lasso_solve(const std::string& csv_path, double lambda) {
  if (lambda <= 0.0) {
    throw std::invalid_argument("lambda must be positive, got " + std::to_string(lambda));
  }
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open csv file '" + csv_path + "'");

  std::vector<std::vector<double>> rows_data;
  int dim = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("csv line " + std::to_string(line_no) +
                                    ": cell '" + cell + "' is not a number");
      }
      while (used < cell.size() &&
             std::isspace(static_cast<unsigned char>(cell[used]))) {
        ++used;
      }
      if (used != cell.size()) {
        throw std::invalid_argument("csv line " + std::to_string(line_no) +
                                    ": cell '" + cell + "' is not a number");
      }
      cells.push_back(v);
    }
    if (cells.size() < 3) {
      throw std::invalid_argument("csv line " + std::to_string(line_no) +
                                  ": need weight, at least one feature, and reward");
    }
    int d = static_cast<int>(cells.size()) - 2;
    if (dim < 0) {
      dim = d;
    } else if (d != dim) {
      throw std::invalid_argument("csv line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(dim + 2) + " columns, got " +
                                  std::to_string(cells.size()));
    }
    rows_data.push_back(std::move(cells));
  }
  if (dim < 0) {
    throw std::invalid_argument("csv file '" + csv_path + "' has no data rows");
  }
  LassoQuadratic quad(dim);
  for (std::vector<double>& cells : rows_data) {
    Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(cells.data() + 1, dim);
    quad.add_sample(cells[0], x, cells.back());
  }

  LassoSolution sol = solve(quad, lambda);
  char buf[40];
  std::cout << "beta_hat";
  for (int i = 0; i < dim; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", sol.beta(i));
    std::cout << ' ' << buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", sol.kkt_violation);
  std::cout << "\nkkt_violation " << buf << "\n";
  return 0;
}

int cmd_gen_config(const std::string& name, const std::string& out) {
  ExperimentConfig config = make_packaged_config(name);
  nlohmann::json j = config;
  std::string path = out.empty() ? name + ".json" : out;
  write_text_atomic(path, j.dump(2) + "\n");
  std::cout << "wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse linear contextual bandit laboratory"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string csv_path;
  double lambda = 0.0;
  std::string config_name;

  auto add_common = [&](CLI::App* sub, bool with_threads) {
    sub->add_option("--config", flags.config_path, "JSON config file")->required();
    sub->add_option("--override", flags.overrides,
                    "dotted-path assignment, e.g. environment.d=30 (repeatable)");
    sub->add_option("--out", flags.out, "output location");
    sub->add_option("--seed", flags.seed, "master seed override");
    if (with_threads) {
      sub->add_option("--threads", flags.threads, "worker threads")
          ->envname("SPARSE_BANDIT_THREADS")
          ->check(CLI::PositiveNumber);
    }
    sub->add_flag("--verbose", flags.verbose, "progress details on stderr");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run a replicated experiment");
  add_common(run_cmd, true);
  CLI::App* diag_cmd =
      app.add_subcommand("diagnose", "estimate the statistical constants of an instance");
  add_common(diag_cmd, false);
  CLI::App* lasso_cmd =
      app.add_subcommand("lasso-solve", "solve one weighted lasso problem from a csv");
  lasso_cmd->add_option("csv", csv_path, "rows weight,x1..xd,r")->required();
  lasso_cmd->add_option("--lambda", lambda, "l1 penalty level")->required();
  CLI::App* gen_cmd = app.add_subcommand("gen-config", "write a packaged experiment config");
  gen_cmd->add_option("name", config_name,
                      "experiment1 | experiment2 | experiment1-desk | experiment2-desk")
      ->required();
  gen_cmd->add_option("--out", flags.out, "output path (default <name>.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  flags.seed_set = run_cmd->count("--seed") > 0 || diag_cmd->count("--seed") > 0;

  try {
    if (app.got_subcommand(run_cmd)) return cmd_run(flags);
    if (app.got_subcommand(diag_cmd)) return cmd_diagnose(flags);
    if (app.got_subcommand(lasso_cmd)) return cmd_lasso_solve(csv_path, lambda);
    if (app.got_subcommand(gen_cmd)) return cmd_gen_config(config_name, flags.out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand dispatched\n";
  return 1;
}
