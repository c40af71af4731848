#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "postbc/mdp.hpp"

namespace postbc {

/// Behavioral cloning: empirical action frequencies, uniform on unseen states.
TabularPolicy bc_estimate(const CountTable& counts, int num_actions);

/// (1-alpha) * bc + alpha * unif(A), rowwise.
TabularPolicy uniform_mix_estimate(const TabularPolicy& bc, double alpha);

/// Posterior demonstrator policy under the uniform prior:
/// (T_h(s,a)+1) / (T_h(s)+A) on seen states, uniform otherwise.
TabularPolicy posterior_estimate(const CountTable& counts, int num_actions);

/// Regularized posterior: (T_h(s,a)+lambda/A) / (T_h(s)+lambda), lambda >= A.
TabularPolicy posterior_lambda_estimate(const CountTable& counts, int num_actions,
                                        double lambda);

/// Pretrained mixture: (1-alpha) * bc + alpha * post_lambda, rowwise.
TabularPolicy mixture_pt_estimate(const TabularPolicy& bc, const TabularPolicy& post_lambda,
                                  double alpha);

struct TheoremParams {
  double alpha;
  double lambda;
};

/// alpha = 1/max{A, H, ln(HT)}, lambda = max{A, 4 ln(HT)} (natural log).
TheoremParams default_theorem_params(int num_actions, int horizon, int num_trajectories);

/// Demonstrator action coverage: min over supported (s,a,h) of
/// pi_h(a|s) / demo_h(a|s). Demonstrator entries below 1e-15 count as
/// unsupported.
double coverage_gamma(const TabularPolicy& policy, const TabularPolicy& demonstrator);

/// Coverage restricted to a single (h, s) row.
double coverage_gamma_at(const TabularPolicy& policy, const TabularPolicy& demonstrator,
                         int h, int s);

/// J(demonstrator) - J(policy); negative when the policy outperforms.
double suboptimality(const TabularMdp& mdp, const TabularPolicy& demonstrator,
                     const TabularPolicy& policy);

/// Registry of tabular estimators, keyed for the CLI and study harness:
///   "bc"          plain behavioral cloning
///   "sigma-bc"    uniform mix, uses alpha
///   "post"        posterior estimate
///   "post-lambda" regularized posterior, uses lambda
///   "pt"          mixture of bc and post-lambda, uses alpha and lambda
///   "oracle"      the demonstrator itself (diagnostics)
/// alpha/lambda < 0 means: take the Theorem-1 defaults for (A, H, T).
struct EstimatorSpec {
  std::string id = "bc";
  double alpha = -1.0;
  double lambda = -1.0;
};

TabularPolicy build_estimator(const EstimatorSpec& spec, const CountTable& counts,
                              const TabularPolicy& demonstrator, int num_trajectories);

struct StudySummary {
  std::string estimator;
  int num_trajectories = 0;
  int n_trials = 0;
  double mean_subopt = 0.0;
  double se_subopt = 0.0;
  double gamma_min = 0.0;
  double gamma_median = 0.0;
  double frac_gamma_zero = 0.0;
  std::uint64_t seed = 0;
};

/// Monte-Carlo study over dataset draws: suboptimality moments, coverage
/// quantiles, and the fraction of draws with gamma = 0. Trial i uses RNG
/// stream i of `seed`; results are merged in trial order, so the summary is
/// identical for any worker count.
StudySummary monte_carlo_estimator_study(const TabularMdp& mdp,
                                         const TabularPolicy& demonstrator,
                                         const EstimatorSpec& spec, int num_trajectories,
                                         int n_trials, std::uint64_t seed, int workers = 1);

/// CSV header matching StudySummary serialization.
std::vector<std::string> study_csv_header();
std::vector<std::string> study_csv_row(const StudySummary& s);

}  // namespace postbc
