#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "postbc/constructions.hpp"
#include "postbc/estimators.hpp"
#include "postbc/experiments.hpp"

using namespace postbc;

namespace {

CountTable table_from_counts(int num_actions, const std::vector<std::int64_t>& sa) {
  CountTable ct;
  ct.num_states = 1;
  ct.num_actions = num_actions;
  ct.horizon = 1;
  ct.state_action_counts = sa;
  std::int64_t total = 0;
  for (auto c : sa) total += c;
  ct.state_counts = {total};
  return ct;
}

// Quadrature oracle: posterior mean of the first action probability under a
// uniform (Dirichlet(1,..,1)) prior, given per-action counts.
double dirichlet_posterior_mean_first(const std::vector<std::int64_t>& counts) {
  const int grid = 400;
  if (counts.size() == 2) {
    double num = 0.0, den = 0.0;
    for (int i = 1; i < grid; ++i) {
      double p = static_cast<double>(i) / grid;
      double like = std::pow(p, static_cast<double>(counts[0])) *
                    std::pow(1.0 - p, static_cast<double>(counts[1]));
      num += p * like;
      den += like;
    }
    return num / den;
  }
  REQUIRE(counts.size() == 3);
  double num = 0.0, den = 0.0;
  for (int i = 1; i < grid; ++i)
    for (int j = 1; j < grid - i; ++j) {
      double x = static_cast<double>(i) / grid;
      double y = static_cast<double>(j) / grid;
      double z = 1.0 - x - y;
      double like = std::pow(x, static_cast<double>(counts[0])) *
                    std::pow(y, static_cast<double>(counts[1])) *
                    std::pow(z, static_cast<double>(counts[2]));
      num += x * like;
      den += like;
    }
  return num / den;
}

}  // namespace

TEST_CASE("bc estimate formula") {
  CountTable ct = table_from_counts(2, {3, 1});
  TabularPolicy bc = bc_estimate(ct, 2);
  CHECK(bc.prob(0, 0, 0) == doctest::Approx(0.75));
  CHECK(bc.prob(0, 0, 1) == doctest::Approx(0.25));

  CountTable empty = table_from_counts(3, {0, 0, 0});
  TabularPolicy uniform_bc = bc_estimate(empty, 3);
  for (int a = 0; a < 3; ++a) CHECK(uniform_bc.prob(0, 0, a) == doctest::Approx(1.0 / 3));

  CountTable collapsed = table_from_counts(3, {4, 0, 0});
  TabularPolicy pi = bc_estimate(collapsed, 3);
  CHECK(pi.prob(0, 0, 0) == 1.0);
  CHECK(pi.prob(0, 0, 1) == 0.0);
  CHECK(pi.prob(0, 0, 2) == 0.0);
}

TEST_CASE("bc rows equal empirical frequencies on random datasets") {
  TabularMdp mdp;
  TabularPolicy demo;
  Rng gen(31);
  experiments::random_mdp_instance(4, 3, 3, gen, &mdp, &demo);
  Rng rng(32);
  DemoDataset ds = collect_dataset(mdp, demo, 40, rng);
  CountTable ct = counts(ds, 4, 3, 3);
  TabularPolicy bc = bc_estimate(ct, 3);
  for (int h = 0; h < 3; ++h)
    for (int s = 0; s < 4; ++s) {
      if (ct.state_count(h, s) == 0) continue;
      for (int a = 0; a < 3; ++a)
        CHECK(bc.prob(h, s, a) ==
              doctest::Approx(static_cast<double>(ct.state_action_count(h, s, a)) /
                              ct.state_count(h, s)));
    }
  bc.validate();
}

TEST_CASE("uniform mix estimate") {
  CountTable ct = table_from_counts(2, {4, 0});
  TabularPolicy bc = bc_estimate(ct, 2);
  TabularPolicy mixed = uniform_mix_estimate(bc, 0.2);
  CHECK(mixed.prob(0, 0, 0) == doctest::Approx(0.9));
  CHECK(mixed.prob(0, 0, 1) == doctest::Approx(0.1));
  CHECK(uniform_mix_estimate(bc, 0.0).probs == bc.probs);
  TabularPolicy unif = uniform_mix_estimate(bc, 1.0);
  CHECK(unif.prob(0, 0, 0) == doctest::Approx(0.5));
  CHECK(unif.prob(0, 0, 1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(uniform_mix_estimate(bc, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(uniform_mix_estimate(bc, 1.1), std::invalid_argument);
}

TEST_CASE("posterior estimate closed form") {
  CountTable ct = table_from_counts(2, {3, 1});
  TabularPolicy post = posterior_estimate(ct, 2);
  CHECK(post.prob(0, 0, 0) == doctest::Approx(4.0 / 6));
  CHECK(post.prob(0, 0, 1) == doctest::Approx(2.0 / 6));

  CountTable empty = table_from_counts(5, {0, 0, 0, 0, 0});
  TabularPolicy unif = posterior_estimate(empty, 5);
  for (int a = 0; a < 5; ++a) CHECK(unif.prob(0, 0, a) == doctest::Approx(0.2));

  CountTable one = table_from_counts(4, {1, 0, 0, 0});
  TabularPolicy p1 = posterior_estimate(one, 4);
  CHECK(p1.prob(0, 0, 0) == doctest::Approx(0.4));
  for (int a = 1; a < 4; ++a) CHECK(p1.prob(0, 0, a) == doctest::Approx(0.2));
}

TEST_CASE("posterior estimate matches Dirichlet posterior-mean quadrature") {
  for (std::vector<std::int64_t> counts :
       std::vector<std::vector<std::int64_t>>{{0, 0}, {1, 0}, {2, 1}, {3, 0}, {1, 2}}) {
    CountTable ct = table_from_counts(2, counts);
    double expected = dirichlet_posterior_mean_first(counts);
    if (counts[0] + counts[1] == 0) expected = 0.5;  // unseen-state branch
    CHECK(posterior_estimate(ct, 2).prob(0, 0, 0) ==
          doctest::Approx(expected).epsilon(1e-3));
  }
  for (std::vector<std::int64_t> counts :
       std::vector<std::vector<std::int64_t>>{{1, 0, 0}, {2, 1, 0}, {3, 0, 0}, {1, 1, 1}}) {
    CountTable ct = table_from_counts(3, counts);
    CHECK(posterior_estimate(ct, 3).prob(0, 0, 0) ==
          doctest::Approx(dirichlet_posterior_mean_first(counts)).epsilon(2e-3));
  }
}

TEST_CASE("posterior lambda estimate") {
  CountTable ct = table_from_counts(2, {3, 1});
  TabularPolicy base = posterior_estimate(ct, 2);
  TabularPolicy lam_a = posterior_lambda_estimate(ct, 2, 2.0);
  CHECK(lam_a.probs == base.probs);

  TabularPolicy lam4 = posterior_lambda_estimate(ct, 2, 4.0);
  CHECK(lam4.prob(0, 0, 0) == doctest::Approx(5.0 / 8));
  CHECK(lam4.prob(0, 0, 1) == doctest::Approx(3.0 / 8));

  CountTable empty = table_from_counts(2, {0, 0});
  TabularPolicy unif = posterior_lambda_estimate(empty, 2, 7.0);
  CHECK(unif.prob(0, 0, 0) == doctest::Approx(0.5));

  CHECK_THROWS_AS(posterior_lambda_estimate(ct, 2, 1.5), std::invalid_argument);
}

TEST_CASE("mixture pt estimate") {
  CountTable ct = table_from_counts(2, {3, 1});
  TabularPolicy bc = bc_estimate(ct, 2);
  TabularPolicy lam4 = posterior_lambda_estimate(ct, 2, 4.0);
  TabularPolicy pt = mixture_pt_estimate(bc, lam4, 0.5);
  CHECK(pt.prob(0, 0, 0) == doctest::Approx(0.6875));
  CHECK(mixture_pt_estimate(bc, lam4, 0.0).probs == bc.probs);
  CHECK(mixture_pt_estimate(bc, lam4, 1.0).probs == lam4.probs);
  TabularPolicy wrong = TabularPolicy::uniform(2, 2, 1);
  CHECK_THROWS_AS(mixture_pt_estimate(bc, wrong, 0.5), std::invalid_argument);
}

TEST_CASE("mixture lower bound holds on random count tables") {
  TabularMdp mdp;
  TabularPolicy demo;
  Rng gen(33);
  experiments::random_mdp_instance(5, 4, 3, gen, &mdp, &demo);
  Rng rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    int T = 5 + trial;
    DemoDataset ds = collect_dataset(mdp, demo, T, rng);
    CountTable ct = counts(ds, 5, 4, 3);
    TheoremParams tp = default_theorem_params(4, 3, T);
    TabularPolicy bc = bc_estimate(ct, 4);
    TabularPolicy lam = posterior_lambda_estimate(ct, 4, tp.lambda);
    TabularPolicy pt = mixture_pt_estimate(bc, lam, tp.alpha);
    for (int h = 0; h < 3; ++h)
      for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 4; ++a) {
          double lower = tp.alpha * (tp.lambda / 4.0) /
                         (static_cast<double>(ct.state_count(h, s)) + tp.lambda);
          CHECK(pt.prob(h, s, a) >= lower - 1e-12);
        }
  }
}

TEST_CASE("default theorem params") {
  TheoremParams p = default_theorem_params(2, 2, 10);
  CHECK(p.alpha == doctest::Approx(1.0 / std::log(20.0)).epsilon(1e-12));
  CHECK(p.alpha == doctest::Approx(0.3338).epsilon(1e-3));
  CHECK(p.lambda == doctest::Approx(4.0 * std::log(20.0)).epsilon(1e-12));
  CHECK(p.lambda == doctest::Approx(11.983).epsilon(1e-3));

  TheoremParams q = default_theorem_params(10, 2, 2);
  CHECK(q.alpha == doctest::Approx(0.1));
  CHECK(q.lambda == doctest::Approx(10.0));

  // alpha non-increasing in each argument
  for (int a = 2; a <= 12; a += 2)
    CHECK(default_theorem_params(a + 1, 3, 50).alpha <=
          default_theorem_params(a, 3, 50).alpha + 1e-15);
  for (int h = 1; h <= 12; h += 2)
    CHECK(default_theorem_params(3, h + 1, 50).alpha <=
          default_theorem_params(3, h, 50).alpha + 1e-15);
  for (int t = 1; t <= 4096; t *= 4)
    CHECK(default_theorem_params(3, 3, t * 2).alpha <=
          default_theorem_params(3, 3, t).alpha + 1e-15);
}

TEST_CASE("coverage gamma") {
  Prop1Instances inst = prop1_bandits(0.01);
  CHECK(coverage_gamma(inst.demonstrator, inst.demonstrator) == doctest::Approx(1.0));

  CountTable collapsed = table_from_counts(3, {4, 0, 0});
  TabularPolicy bc = bc_estimate(collapsed, 3);
  CHECK(coverage_gamma(bc, inst.demonstrator) == 0.0);

  TabularPolicy uniform4 = TabularPolicy::uniform(1, 4, 1);
  TabularPolicy demo4 = TabularPolicy::uniform(1, 4, 1);
  demo4.prob(0, 0, 0) = 0.5;
  demo4.prob(0, 0, 1) = 0.5;
  demo4.prob(0, 0, 2) = 0.0;
  demo4.prob(0, 0, 3) = 0.0;
  CHECK(coverage_gamma(uniform4, demo4) == doctest::Approx(0.5));
}

TEST_CASE("suboptimality") {
  Prop1Instances inst = prop1_bandits(0.01);
  CHECK(suboptimality(inst.m1, inst.demonstrator, inst.demonstrator) == doctest::Approx(0.0));

  CountTable collapsed = table_from_counts(3, {4, 0, 0});
  TabularPolicy bc = bc_estimate(collapsed, 3);
  CHECK(suboptimality(inst.m1, inst.demonstrator, bc) == doctest::Approx(0.02));

  TabularPolicy optimal = TabularPolicy::uniform(1, 3, 1);
  optimal.prob(0, 0, 0) = 0.0;
  optimal.prob(0, 0, 1) = 1.0;
  optimal.prob(0, 0, 2) = 0.0;
  CHECK(suboptimality(inst.m1, inst.demonstrator, optimal) == doctest::Approx(-0.98));
}

TEST_CASE("pt coverage strictly positive over many draws") {
  TabularMdp mdp;
  TabularPolicy demo;
  Rng gen(35);
  experiments::random_mdp_instance(5, 4, 3, gen, &mdp, &demo);
  for (int i = 0; i < 1000; ++i) {
    Rng rng = Rng::stream(36, i);
    DemoDataset ds = collect_dataset(mdp, demo, 20, rng);
    CountTable ct = counts(ds, 5, 4, 3);
    TabularPolicy pt =
        build_estimator(EstimatorSpec{"pt", -1.0, -1.0}, ct, demo, 20);
    REQUIRE(coverage_gamma(pt, demo) > 0.0);
  }
}

TEST_CASE("post-sampler lemma bound fails rarely") {
  experiments::Thm1SuiteParams p;
  p.demo_counts = {50};
  p.draws_per_count = 500;
  p.num_mdps = 5;
  p.seed = 37;
  experiments::Thm1SuiteResult res = experiments::run_thm1_suite(p);
  REQUIRE(res.rows.size() == 1);
  CHECK(res.rows[0].frac_bound_fail <= 0.13);
  CHECK(res.rows[0].frac_gamma_zero_pt == 0.0);
}

TEST_CASE("suboptimality decay across demo counts") {
  experiments::Thm1SuiteParams p;
  p.demo_counts = {50, 100, 250, 1000};
  p.draws_per_count = 1500;
  p.seed = 38;
  experiments::Thm1SuiteResult res = experiments::run_thm1_suite(p);
  REQUIRE(res.rows.size() == 4);
  for (const auto& row : res.rows)
    CHECK(row.mean_subopt_pt <= row.mean_subopt_bc + 0.02);
  const auto& r250 = res.rows[2];
  const auto& r1000 = res.rows[3];
  CHECK(r1000.mean_subopt_pt <= 0.6 * r250.mean_subopt_pt);
}

TEST_CASE("estimator study summaries") {
  Prop1Instances inst = prop1_bandits(0.01);

  StudySummary oracle = monte_carlo_estimator_study(
      inst.m1, inst.demonstrator, EstimatorSpec{"oracle", -1, -1}, 4, 200, 39);
  CHECK(oracle.mean_subopt == doctest::Approx(0.0));
  CHECK(oracle.se_subopt == doctest::Approx(0.0));
  CHECK(oracle.frac_gamma_zero == 0.0);

  StudySummary bc = monte_carlo_estimator_study(inst.m1, inst.demonstrator,
                                                EstimatorSpec{"bc", -1, -1}, 4, 10000, 40);
  CHECK(bc.frac_gamma_zero >= 0.84);

  StudySummary pt = monte_carlo_estimator_study(inst.m1, inst.demonstrator,
                                                EstimatorSpec{"pt", -1, -1}, 4, 2000, 41);
  CHECK(pt.frac_gamma_zero == 0.0);

  CHECK_THROWS_AS(monte_carlo_estimator_study(inst.m1, inst.demonstrator,
                                              EstimatorSpec{"nope", -1, -1}, 4, 10, 42),
                  std::invalid_argument);

  // identical for any worker count
  StudySummary w1 = monte_carlo_estimator_study(inst.m1, inst.demonstrator,
                                                EstimatorSpec{"bc", -1, -1}, 4, 500, 43, 1);
  StudySummary w4 = monte_carlo_estimator_study(inst.m1, inst.demonstrator,
                                                EstimatorSpec{"bc", -1, -1}, 4, 500, 43, 4);
  CHECK(w1.mean_subopt == w4.mean_subopt);
  CHECK(w1.gamma_median == w4.gamma_median);
  CHECK(w1.frac_gamma_zero == w4.frac_gamma_zero);
}
