#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sparsebandit/harness.hpp"

using namespace sparsebandit;
namespace fs = std::filesystem;

namespace {

EnvironmentSpec corr_spec(int d, int K, double sigma) {
  EnvironmentSpec s;
  s.kind = EnvKind::CorrelatedGaussian;
  s.d = d;
  s.K = K;
  s.s0 = 3;
  s.noise_sigma = sigma;
  s.correlation = 0.7;
  return s;
}

EnvironmentSpec exp2_spec() {
  EnvironmentSpec s;
  s.kind = EnvKind::FixedSuboptimal;
  s.d = 20;
  s.K = 10;
  s.s0 = 5;
  s.noise_sigma = 0.5;
  return s;
}

PolicySpec spec_of(std::string name, std::string kind,
                   nlohmann::json params = nlohmann::json::object()) {
  PolicySpec p;
  p.name = std::move(name);
  p.kind = std::move(kind);
  p.params = std::move(params);
  return p;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.environment = corr_spec(8, 4, 0.2);
  c.policies = {spec_of("fsw", "fswlasso", nlohmann::json{{"M0", 5}, {"lambda_scale", 0.3}}),
                spec_of("unif", "uniform"), spec_of("opt", "oracle")};
  c.T = 40;
  c.replications = 3;
  c.master_seed = 123;
  c.output_dir = "unused";
  return c;
}

void check_traces_equal(const RegretTrace& a, const RegretTrace& b) {
  REQUIRE(a.policy == b.policy);
  REQUIRE(a.rep == b.rep);
  REQUIRE(a.arms == b.arms);
  REQUIRE(a.inst_regret == b.inst_regret);
  REQUIRE(a.cum_regret == b.cum_regret);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(split(line, ','));
  }
  return rows;
}

int count_occurrences(const std::string& text, const std::string& needle) {
  int n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  ExperimentConfig c = small_config();
  c.record_debug = true;
  nlohmann::json j = c;
  ExperimentConfig back = j.get<ExperimentConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.T == 40);
  CHECK(back.replications == 3);
  CHECK(back.master_seed == 123);
  CHECK(back.record_debug);
  CHECK(back.policies.size() == 3);
  CHECK(back.policies[0].name == "fsw");

  // An emitted config carries a resolved_policies record; loading ignores it.
  nlohmann::json emitted = j;
  emitted["resolved_policies"] = nlohmann::json::array();
  CHECK_NOTHROW(emitted.get<ExperimentConfig>());

  nlohmann::json bad = j;
  bad["horizon"] = 10;
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), std::invalid_argument);

  bad = j;
  bad["T"] = 0;
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), std::invalid_argument);

  bad = j;
  bad["replications"] = 0;
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), std::invalid_argument);

  bad = j;
  bad.erase("T");
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), std::invalid_argument);

  bad = j;
  bad["master_seed"] = -4;
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), std::invalid_argument);

  bad = j;
  bad["record_debug"] = "yes";
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), std::invalid_argument);

  bad = j;
  bad["policies"][1]["name"] = "fsw";
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), std::invalid_argument);

  bad = j;
  bad["policies"][1]["name"] = "uni,form";
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), std::invalid_argument);

  bad = j;
  bad["policies"] = nlohmann::json::array();
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), std::invalid_argument);

  ExperimentConfig no_dir = small_config();
  no_dir.output_dir = "";
  CHECK_THROWS_AS(no_dir.validate(), std::invalid_argument);
}

TEST_CASE("oracle accrues zero regret") {
  ExperimentConfig c = small_config();
  c.T = 60;
  RegretTrace tr = run_replication(c, spec_of("opt", "oracle"), 1);
  REQUIRE(tr.inst_regret.size() == 60);
  REQUIRE(tr.cum_regret.size() == 60);
  REQUIRE(tr.arms.size() == 60);
  CHECK(tr.policy == "opt");
  CHECK(tr.rep == 1);
  for (double r : tr.inst_regret) CHECK(r == 0.0);
  CHECK(tr.cum_regret.back() == 0.0);
  CHECK(tr.unconverged_solves == 0);
}

TEST_CASE("uniform play matches the known mean gap") {
  // K = 10 arms: nine pinned at 0.1..0.9 and the optimal one at U(0.9, 1.0).
  // A uniform player's expected per-round regret is E[0.9 V - 0.45] = 0.405
  // with V ~ U(0.9, 1.0).
  ExperimentConfig c;
  c.environment = exp2_spec();
  c.policies = {spec_of("unif", "uniform")};
  c.T = 10000;
  c.replications = 1;
  c.master_seed = 7;
  RegretTrace tr = run_replication(c, c.policies[0], 0);
  double mean = tr.cum_regret.back() / c.T;
  CHECK(mean == doctest::Approx(0.405).epsilon(0.05));
  CHECK(std::abs(mean - 0.405) < 0.02);
}

TEST_CASE("traces are prefix sums with nonnegative increments") {
  ExperimentConfig c = small_config();
  c.T = 80;
  RegretTrace tr = run_replication(c, c.policies[0], 2);
  double acc = 0.0;
  for (std::size_t i = 0; i < tr.inst_regret.size(); ++i) {
    CHECK(tr.inst_regret[i] >= 0.0);
    acc += tr.inst_regret[i];
    CHECK(tr.cum_regret[i] == acc);
    if (i > 0) CHECK(tr.cum_regret[i] >= tr.cum_regret[i - 1]);
    CHECK(tr.arms[i] >= 0);
    CHECK(tr.arms[i] < c.environment.K);
  }
}

TEST_CASE("same config and seed reproduce results bitwise") {
  ExperimentConfig c = small_config();
  ExperimentResult a = run_experiment(c, 1);
  ExperimentResult b = run_experiment(c, 1);
  REQUIRE(a.traces.size() == b.traces.size());
  for (std::size_t i = 0; i < a.traces.size(); ++i) check_traces_equal(a.traces[i], b.traces[i]);
  REQUIRE(a.summary.size() == b.summary.size());
  for (std::size_t p = 0; p < a.summary.size(); ++p) {
    CHECK(a.summary[p].mean_cum == b.summary[p].mean_cum);
    CHECK(a.summary[p].std_cum == b.summary[p].std_cum);
  }
}

TEST_CASE("thread count does not change results") {
  ExperimentConfig c = small_config();
  ExperimentResult serial = run_experiment(c, 1);
  ExperimentResult pooled = run_experiment(c, 4);
  REQUIRE(serial.traces.size() == pooled.traces.size());
  for (std::size_t i = 0; i < serial.traces.size(); ++i) {
    check_traces_equal(serial.traces[i], pooled.traces[i]);
  }
  for (std::size_t p = 0; p < serial.summary.size(); ++p) {
    CHECK(serial.summary[p].mean_cum == pooled.summary[p].mean_cum);
    CHECK(serial.summary[p].std_cum == pooled.summary[p].std_cum);
  }
}

TEST_CASE("stream isolation across policies") {
  ExperimentConfig full = small_config();
  ExperimentConfig reduced = full;
  reduced.policies = {full.policies[0], full.policies[2]};
  ExperimentConfig reordered = full;
  std::swap(reordered.policies[0], reordered.policies[2]);

  ExperimentResult rf = run_experiment(full, 1);
  ExperimentResult rr = run_experiment(reduced, 1);
  ExperimentResult ro = run_experiment(reordered, 1);

  const int reps = full.replications;
  for (int rep = 0; rep < reps; ++rep) {
    // full: fsw=0, unif=1, opt=2; reduced: fsw=0, opt=1; reordered: opt=0, fsw=2.
    check_traces_equal(rf.traces[0 * reps + rep], rr.traces[0 * reps + rep]);
    check_traces_equal(rf.traces[2 * reps + rep], rr.traces[1 * reps + rep]);
    check_traces_equal(rf.traces[0 * reps + rep], ro.traces[2 * reps + rep]);
    check_traces_equal(rf.traces[2 * reps + rep], ro.traces[0 * reps + rep]);
  }
}

TEST_CASE("summary aggregates means and deviations") {
  ExperimentConfig c = small_config();
  ExperimentResult res = run_experiment(c, 1);
  const int reps = c.replications;
  REQUIRE(res.summary.size() == c.policies.size());
  for (std::size_t p = 0; p < c.policies.size(); ++p) {
    const PolicySummary& s = res.summary[p];
    CHECK(s.policy == c.policies[p].name);
    REQUIRE(static_cast<int>(s.mean_cum.size()) == c.T);
    for (int t = 0; t < c.T; ++t) {
      double mean = 0.0;
      for (int rep = 0; rep < reps; ++rep) mean += res.traces[p * reps + rep].cum_regret[t];
      mean /= reps;
      CHECK(s.mean_cum[t] == doctest::Approx(mean).epsilon(1e-12));
      double sq = 0.0;
      for (int rep = 0; rep < reps; ++rep) {
        double dev = res.traces[p * reps + rep].cum_regret[t] - mean;
        sq += dev * dev;
      }
      CHECK(s.std_cum[t] == doctest::Approx(std::sqrt(sq / (reps - 1))).epsilon(1e-12));
    }
  }

  ExperimentConfig single = small_config();
  single.replications = 1;
  ExperimentResult one = run_experiment(single, 1);
  for (const PolicySummary& s : one.summary) {
    for (int t = 0; t < single.T; ++t) CHECK(s.std_cum[t] == 0.0);
  }
  for (std::size_t p = 0; p < single.policies.size(); ++p) {
    CHECK(one.summary[p].mean_cum == one.traces[p].cum_regret);
  }
}

TEST_CASE("debug mode audits the regret caps") {
  ExperimentConfig c = small_config();
  c.record_debug = true;
  c.T = 60;
  ExperimentResult res = run_experiment(c, 1);
  for (const RegretTrace& tr : res.traces) {
    CHECK(tr.bound_violations == 0);
    REQUIRE(tr.est_error.size() == static_cast<std::size_t>(c.T));
  }
  const int reps = c.replications;
  // Uniform rounds rank no arms by an estimate, so the error slot stays NaN.
  for (double e : res.traces[1 * reps + 0].est_error) CHECK(std::isnan(e));
  // The oracle uses the true parameter; its error is identically zero.
  for (double e : res.traces[2 * reps + 0].est_error) CHECK(e == 0.0);

  c.record_debug = false;
  RegretTrace plain = run_replication(c, c.policies[0], 0);
  CHECK(plain.est_error.empty());
  CHECK(plain.bound_violations == 0);
}

TEST_CASE("emitted files round trip") {
  ExperimentConfig c = small_config();
  c.T = 25;
  c.replications = 2;
  ExperimentResult res = run_experiment(c, 1);
  fs::path dir = fs::temp_directory_path() / "sparsebandit_emit_test";
  fs::remove_all(dir);
  emit_results(res, c, dir.string());

  for (const char* name : {"traces.csv", "summary.csv", "plot.svg", "config.json"}) {
    CHECK(fs::exists(dir / name));
    CHECK(!fs::exists(dir / (std::string(name) + ".tmp")));
  }

  auto trace_rows = read_csv(dir / "traces.csv");
  REQUIRE(trace_rows.size() == 1 + c.policies.size() * c.replications * c.T);
  CHECK(trace_rows[0] == std::vector<std::string>{"policy", "rep", "t", "inst_regret",
                                                  "cum_regret", "arm"});
  std::size_t row = 1;
  for (const RegretTrace& tr : res.traces) {
    for (int t = 1; t <= c.T; ++t, ++row) {
      const std::vector<std::string>& cells = trace_rows[row];
      REQUIRE(cells.size() == 6);
      CHECK(cells[0] == tr.policy);
      CHECK(std::stoi(cells[1]) == tr.rep);
      CHECK(std::stoi(cells[2]) == t);
      // %.17g makes the decimal-to-binary round trip exact.
      CHECK(std::stod(cells[3]) == tr.inst_regret[t - 1]);
      CHECK(std::stod(cells[4]) == tr.cum_regret[t - 1]);
      CHECK(std::stoi(cells[5]) == tr.arms[t - 1]);
    }
  }

  auto summary_rows = read_csv(dir / "summary.csv");
  REQUIRE(summary_rows.size() == 1 + c.policies.size() * c.T);
  row = 1;
  for (const PolicySummary& s : res.summary) {
    for (int t = 1; t <= c.T; ++t, ++row) {
      const std::vector<std::string>& cells = summary_rows[row];
      REQUIRE(cells.size() == 4);
      CHECK(cells[0] == s.policy);
      CHECK(std::stoi(cells[1]) == t);
      CHECK(std::stod(cells[2]) == s.mean_cum[t - 1]);
      CHECK(std::stod(cells[3]) == s.std_cum[t - 1]);
    }
  }

  std::ifstream svg_in(dir / "plot.svg");
  std::stringstream svg_buf;
  svg_buf << svg_in.rdbuf();
  std::string svg = svg_buf.str();
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count_occurrences(svg, "<polyline") == static_cast<int>(c.policies.size()));
  for (const PolicySpec& p : c.policies) CHECK(svg.find(">" + p.name + "<") != std::string::npos);

  std::ifstream cfg_in(dir / "config.json");
  nlohmann::json emitted = nlohmann::json::parse(cfg_in);
  REQUIRE(emitted.contains("resolved_policies"));
  REQUIRE(emitted["resolved_policies"].size() == c.policies.size());
  CHECK(emitted["resolved_policies"][0]["params"].contains("lambda_scale"));
  CHECK(emitted["master_seed"] == 123);
  ExperimentConfig reloaded = emitted.get<ExperimentConfig>();
  CHECK(reloaded.T == c.T);
  CHECK(reloaded.replications == c.replications);
  CHECK(reloaded.policies.size() == c.policies.size());
  CHECK(nlohmann::json(reloaded.environment) == nlohmann::json(c.environment));

  // Rerunning the emitted config reproduces the original traces.
  ExperimentResult again = run_experiment(reloaded, 1);
  REQUIRE(again.traces.size() == res.traces.size());
  for (std::size_t i = 0; i < res.traces.size(); ++i) {
    check_traces_equal(res.traces[i], again.traces[i]);
  }
  fs::remove_all(dir);
}

TEST_CASE("emit refuses an empty result") {
  ExperimentConfig c = small_config();
  fs::path dir = fs::temp_directory_path() / "sparsebandit_emit_empty";
  fs::remove_all(dir);
  CHECK_THROWS_AS(emit_results(ExperimentResult{}, c, dir.string()), std::runtime_error);
  CHECK(!fs::exists(dir));
}

TEST_CASE("experiment runner validates inputs") {
  ExperimentConfig c = small_config();
  CHECK_THROWS_AS(run_experiment(c, 0), std::invalid_argument);
  CHECK_THROWS_AS(run_replication(c, c.policies[0], -1), std::invalid_argument);
  CHECK_THROWS_AS(run_replication(c, c.policies[0], c.replications), std::invalid_argument);
  ExperimentConfig bad = c;
  bad.T = 0;
  CHECK_THROWS_AS(run_experiment(bad, 1), std::invalid_argument);
}
