#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "sparsebandit/lasso.hpp"
#include "sparsebandit/rng.hpp"

using namespace sparsebandit;

namespace {

WeightedLassoProblem single_sample_problem() {
  WeightedLassoProblem p;
  Eigen::VectorXd x(1);
  x << 2.0;
  p.samples.push_back({1.0, x, 4.0});
  p.lambda = 2.0;
  return p;
}

// Random dense problem with n rows of N(0,1) features, a sparse truth and
// additive noise. Strictly convex whenever n > d (almost surely).
WeightedLassoProblem random_problem(RngStream& rng, int n, int d, double lambda) {
  WeightedLassoProblem p;
  p.lambda = lambda;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < std::max(1, d / 4); ++j) beta[rng.uniform_int(d)] = rng.normal();
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j) x[j] = rng.normal();
    const double r = x.dot(beta) + 0.1 * rng.normal();
    p.samples.push_back({0.5 + rng.uniform(), x, r});
  }
  return p;
}

}  // namespace

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(3.0, 1.0) == doctest::Approx(2.0));
  CHECK(soft_threshold(-3.0, 1.0) == doctest::Approx(-2.0));
  CHECK(soft_threshold(0.5, 1.0) == 0.0);
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  CHECK(soft_threshold(1.0, 1.0) == 0.0);
  CHECK(soft_threshold(7.0, 0.0) == 7.0);
}

TEST_CASE("one-dimensional solve matches a brute-force grid search") {
  const auto p = single_sample_problem();

  // Independent oracle: scan beta over [-5, 5] in steps of 1e-4.
  double best_b = 0.0, best_f = std::numeric_limits<double>::infinity();
  for (int k = -50000; k <= 50000; ++k) {
    const double b = k * 1e-4;
    Eigen::VectorXd bv(1);
    bv << b;
    const double f = objective(p, bv);
    if (f < best_f) {
      best_f = f;
      best_b = b;
    }
  }
  CHECK(best_b == doctest::Approx(1.75).epsilon(1e-3));

  const auto sol = solve(p);
  REQUIRE(sol.converged);
  CHECK(sol.beta[0] == doctest::Approx(1.75).epsilon(1e-10));
  CHECK(sol.kkt_violation <= 1e-8);
  // Closed form for this instance: S(sum w x r, lambda/2) / sum w x^2 = S(8,1)/4.
  CHECK(sol.beta[0] == doctest::Approx(soft_threshold(8.0, 1.0) / 4.0));
}

TEST_CASE("objective arithmetic on the one-dimensional instance") {
  const auto p = single_sample_problem();
  Eigen::VectorXd b(1);
  b << 1.75;
  CHECK(objective(p, b) == doctest::Approx(3.75).epsilon(1e-14));
  // (2*1.75 - 4)^2 + 2*1.75 = 0.25 + 3.5
  const auto q = LassoQuadratic::from_problem(p);
  CHECK(q.objective(b, p.lambda) == doctest::Approx(3.75).epsilon(1e-12));
}

TEST_CASE("penalty above twice the max correlation forces the zero solution") {
  RngStream rng(17);
  auto p = random_problem(rng, 30, 8, 1.0);
  const auto q = LassoQuadratic::from_problem(p);
  p.lambda = 2.0 * q.moment().lpNorm<Eigen::Infinity>() * 1.01 + 1.0;
  const auto sol = solve(p);
  REQUIRE(sol.converged);
  CHECK(sol.beta.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("solution sits exactly at the nondifferentiable point when KKT binds") {
  WeightedLassoProblem p;
  Eigen::VectorXd x(1);
  x << 1.0;
  p.samples.push_back({1.0, x, 1.0});
  p.lambda = 2.0;  // |gradient at 0| = 2 = lambda: 0 is optimal, boundary case
  const auto sol = solve(p);
  REQUIRE(sol.converged);
  CHECK(sol.beta[0] == 0.0);
  CHECK(sol.kkt_violation <= 1e-8);
}

TEST_CASE("vanishing penalty recovers the least-squares solution") {
  SUBCASE("identity design") {
    WeightedLassoProblem p;
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(2), e2 = Eigen::VectorXd::Zero(2);
    e1[0] = 1.0;
    e2[1] = 1.0;
    p.samples.push_back({1.0, e1, 1.0});
    p.samples.push_back({1.0, e2, 2.0});
    p.lambda = 1e-8;
    const auto sol = solve(p);
    REQUIRE(sol.converged);
    CHECK(sol.beta[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.beta[1] == doctest::Approx(2.0).epsilon(1e-6));
  }
  SUBCASE("random overdetermined design vs normal equations") {
    RngStream rng(99);
    auto p = random_problem(rng, 60, 6, 1e-9);
    const auto q = LassoQuadratic::from_problem(p);
    const Eigen::VectorXd ols = q.gram().ldlt().solve(q.moment());
    const auto sol = solve(p, {1e-10, 200000});
    CHECK((sol.beta - ols).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("solver beats random candidates and certifies stationarity") {
  RngStream rng(4242);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = random_problem(rng, 50, 12, 0.8 + trial * 0.6);
    const auto q = LassoQuadratic::from_problem(p);
    const auto sol = solve(p);
    REQUIRE(sol.converged);
    CHECK(kkt_violation(q, sol.beta, p.lambda) <= 1e-8);
    CHECK(sol.objective == doctest::Approx(objective(p, sol.beta)).epsilon(1e-12));

    for (int k = 0; k < 1000; ++k) {
      Eigen::VectorXd cand(q.dim());
      for (int j = 0; j < q.dim(); ++j) cand[j] = 2.0 * rng.normal();
      CHECK(sol.objective <= objective(p, cand) + 1e-10);
    }
    // The all-zero vector is also never better.
    CHECK(sol.objective <= objective(p, Eigen::VectorXd::Zero(q.dim())) + 1e-10);
  }
}

TEST_CASE("warm start from a perturbed solution lands on the cold-start solution") {
  RngStream rng(7);
  auto p = random_problem(rng, 50, 10, 1.5);
  const auto cold = solve(p);
  REQUIRE(cold.converged);
  Eigen::VectorXd warm = cold.beta;
  for (int j = 0; j < warm.size(); ++j) warm[j] += 0.01 * rng.normal();
  const auto hot = solve(p, {}, &warm);
  REQUIRE(hot.converged);
  CHECK((hot.beta - cold.beta).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("scaling all weights and lambda by the same factor leaves the solution fixed") {
  RngStream rng(31);
  auto p = random_problem(rng, 40, 9, 1.2);
  const auto base = solve(p);
  REQUIRE(base.converged);

  WeightedLassoProblem scaled = p;
  const double c = 3.0;
  for (auto& s : scaled.samples) s.weight *= c;
  scaled.lambda *= c;
  const auto ssol = solve(scaled);
  REQUIRE(ssol.converged);
  CHECK((ssol.beta - base.beta).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("zero-weight samples are inert") {
  RngStream rng(55);
  auto p = random_problem(rng, 30, 7, 1.0);
  const auto base = solve(p);
  auto padded = p;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd junk(7);
    for (int j = 0; j < 7; ++j) junk[j] = 100.0 * rng.normal();
    padded.samples.push_back({0.0, junk, 1e9});
  }
  const auto psol = solve(padded);
  CHECK(psol.beta == base.beta);  // bitwise: zero-weight rows never touch the accumulator
}

TEST_CASE("degenerate coordinate is pinned to zero") {
  WeightedLassoProblem p;
  Eigen::VectorXd x1(3), x2(3);
  x1 << 1.0, 0.0, 0.0;
  x2 << 0.5, 0.0, 1.0;
  p.samples.push_back({1.0, x1, 1.0});
  p.samples.push_back({2.0, x2, -0.5});
  p.lambda = 0.1;
  const auto sol = solve(p);
  REQUIRE(sol.converged);
  CHECK(sol.beta[1] == 0.0);

  // Even when the warm start puts mass on the dead coordinate.
  Eigen::VectorXd warm = Eigen::VectorXd::Constant(3, 5.0);
  const auto sol2 = solve(p, {}, &warm);
  REQUIRE(sol2.converged);
  CHECK(sol2.beta[1] == 0.0);
}

TEST_CASE("input validation") {
  WeightedLassoProblem p = single_sample_problem();

  SUBCASE("lambda must be positive") {
    p.lambda = 0.0;
    CHECK_THROWS_AS(solve(p), std::invalid_argument);
    p.lambda = -1.0;
    CHECK_THROWS_AS(solve(p), std::invalid_argument);
  }
  SUBCASE("negative weights rejected") {
    p.samples[0].weight = -0.25;
    CHECK_THROWS_AS(solve(p), std::invalid_argument);
  }
  SUBCASE("all-zero weights rejected") {
    p.samples[0].weight = 0.0;
    CHECK_THROWS_AS(solve(p), std::invalid_argument);
  }
  SUBCASE("dimension mismatch rejected") {
    Eigen::VectorXd x(2);
    x << 1.0, 2.0;
    p.samples.push_back({1.0, x, 0.0});
    CHECK_THROWS_AS(solve(p), std::invalid_argument);
  }
  SUBCASE("empty problem rejected") {
    p.samples.clear();
    CHECK_THROWS_AS(solve(p), std::invalid_argument);
  }
}
