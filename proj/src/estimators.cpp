#include "postbc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "postbc/csv.hpp"
#include "postbc/parallel.hpp"

namespace postbc {

namespace {

constexpr double kSupportTol = 1e-15;

TabularPolicy empty_like(const CountTable& counts) {
  TabularPolicy pi;
  pi.num_states = counts.num_states;
  pi.num_actions = counts.num_actions;
  pi.horizon = counts.horizon;
  pi.probs.assign(
      static_cast<std::size_t>(counts.horizon) * counts.num_states * counts.num_actions, 0.0);
  return pi;
}

void check_same_shape(const TabularPolicy& a, const TabularPolicy& b, const char* what) {
  if (a.num_states != b.num_states || a.num_actions != b.num_actions ||
      a.horizon != b.horizon)
    throw std::invalid_argument(std::string(what) + ": policy shape mismatch");
}

}  // namespace

TabularPolicy bc_estimate(const CountTable& counts, int num_actions) {
  if (num_actions != counts.num_actions)
    throw std::invalid_argument("bc_estimate: num_actions does not match CountTable");
  TabularPolicy pi = empty_like(counts);
  for (int h = 0; h < counts.horizon; ++h)
    for (int s = 0; s < counts.num_states; ++s) {
      std::int64_t n = counts.state_count(h, s);
      double* row = pi.row(h, s);
      if (n > 0) {
        for (int a = 0; a < num_actions; ++a)
          row[a] = static_cast<double>(counts.state_action_count(h, s, a)) /
                   static_cast<double>(n);
      } else {
        for (int a = 0; a < num_actions; ++a) row[a] = 1.0 / num_actions;
      }
    }
  return pi;
}

TabularPolicy uniform_mix_estimate(const TabularPolicy& bc, double alpha) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("uniform_mix_estimate: alpha must be in [0,1]");
  TabularPolicy pi = bc;
  const double u = alpha / bc.num_actions;
  for (double& p : pi.probs) p = (1.0 - alpha) * p + u;
  return pi;
}

TabularPolicy posterior_estimate(const CountTable& counts, int num_actions) {
  return posterior_lambda_estimate(counts, num_actions, static_cast<double>(num_actions));
}

TabularPolicy posterior_lambda_estimate(const CountTable& counts, int num_actions,
                                        double lambda) {
  if (num_actions != counts.num_actions)
    throw std::invalid_argument("posterior_lambda_estimate: num_actions mismatch");
  if (lambda < num_actions)
    throw std::invalid_argument("posterior_lambda_estimate: lambda must be >= A");
  TabularPolicy pi = empty_like(counts);
  const double pseudo = lambda / num_actions;
  for (int h = 0; h < counts.horizon; ++h)
    for (int s = 0; s < counts.num_states; ++s) {
      std::int64_t n = counts.state_count(h, s);
      double* row = pi.row(h, s);
      if (n > 0) {
        double denom = static_cast<double>(n) + lambda;
        for (int a = 0; a < num_actions; ++a)
          row[a] = (static_cast<double>(counts.state_action_count(h, s, a)) + pseudo) / denom;
      } else {
        for (int a = 0; a < num_actions; ++a) row[a] = 1.0 / num_actions;
      }
    }
  return pi;
}

TabularPolicy mixture_pt_estimate(const TabularPolicy& bc, const TabularPolicy& post_lambda,
                                  double alpha) {
  check_same_shape(bc, post_lambda, "mixture_pt_estimate");
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("mixture_pt_estimate: alpha must be in [0,1]");
  TabularPolicy pi = bc;
  for (std::size_t i = 0; i < pi.probs.size(); ++i)
    pi.probs[i] = (1.0 - alpha) * bc.probs[i] + alpha * post_lambda.probs[i];
  return pi;
}

TheoremParams default_theorem_params(int num_actions, int horizon, int num_trajectories) {
  if (num_actions < 1 || horizon < 1 || num_trajectories < 1)
    throw std::invalid_argument("default_theorem_params: A, H, T must be >= 1");
  double log_ht = std::log(static_cast<double>(horizon) * num_trajectories);
  double alpha =
      1.0 / std::max({static_cast<double>(num_actions), static_cast<double>(horizon), log_ht});
  double lambda = std::max(static_cast<double>(num_actions), 4.0 * log_ht);
  return TheoremParams{alpha, lambda};
}

double coverage_gamma(const TabularPolicy& policy, const TabularPolicy& demonstrator) {
  check_same_shape(policy, demonstrator, "coverage_gamma");
  double gamma = -1.0;
  for (std::size_t i = 0; i < policy.probs.size(); ++i) {
    double d = demonstrator.probs[i];
    if (d <= kSupportTol) continue;
    double ratio = policy.probs[i] / d;
    if (gamma < 0.0 || ratio < gamma) gamma = ratio;
  }
  if (gamma < 0.0)
    throw std::invalid_argument("coverage_gamma: demonstrator has empty support");
  return gamma;
}

double coverage_gamma_at(const TabularPolicy& policy, const TabularPolicy& demonstrator,
                         int h, int s) {
  check_same_shape(policy, demonstrator, "coverage_gamma_at");
  const double* prow = policy.row(h, s);
  const double* drow = demonstrator.row(h, s);
  double gamma = -1.0;
  for (int a = 0; a < policy.num_actions; ++a) {
    if (drow[a] <= kSupportTol) continue;
    double ratio = prow[a] / drow[a];
    if (gamma < 0.0 || ratio < gamma) gamma = ratio;
  }
  if (gamma < 0.0)
    throw std::invalid_argument("coverage_gamma_at: demonstrator row has empty support");
  return gamma;
}

double suboptimality(const TabularMdp& mdp, const TabularPolicy& demonstrator,
                     const TabularPolicy& policy) {
  return evaluate_policy(mdp, demonstrator) - evaluate_policy(mdp, policy);
}

TabularPolicy build_estimator(const EstimatorSpec& spec, const CountTable& counts,
                              const TabularPolicy& demonstrator, int num_trajectories) {
  const int A = counts.num_actions;
  TheoremParams defaults =
      default_theorem_params(A, counts.horizon, std::max(1, num_trajectories));
  double alpha = spec.alpha >= 0.0 ? spec.alpha : defaults.alpha;
  double lambda = spec.lambda >= 0.0 ? spec.lambda : defaults.lambda;
  if (spec.id == "bc") return bc_estimate(counts, A);
  if (spec.id == "sigma-bc") return uniform_mix_estimate(bc_estimate(counts, A), alpha);
  if (spec.id == "post") return posterior_estimate(counts, A);
  if (spec.id == "post-lambda") return posterior_lambda_estimate(counts, A, lambda);
  if (spec.id == "pt")
    return mixture_pt_estimate(bc_estimate(counts, A),
                               posterior_lambda_estimate(counts, A, lambda), alpha);
  if (spec.id == "oracle") return demonstrator;
  throw std::invalid_argument("unknown estimator id: " + spec.id);
}

StudySummary monte_carlo_estimator_study(const TabularMdp& mdp,
                                         const TabularPolicy& demonstrator,
                                         const EstimatorSpec& spec, int num_trajectories,
                                         int n_trials, std::uint64_t seed, int workers) {
  if (n_trials < 1)
    throw std::invalid_argument("monte_carlo_estimator_study: n_trials must be >= 1");
  // validate the estimator id eagerly so a bad id fails before the trials run
  {
    DemoDataset probe;
    probe.trajectories.push_back(Trajectory(mdp.horizon, Step{0, 0, 0.0}));
    build_estimator(spec, counts(probe, mdp.num_states, mdp.num_actions, mdp.horizon),
                    demonstrator, 1);
  }

  std::vector<double> subopts(n_trials), gammas(n_trials);
  parallel_for(n_trials, workers, [&](std::int64_t i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    DemoDataset ds = collect_dataset(mdp, demonstrator, num_trajectories, rng);
    CountTable ct = counts(ds, mdp.num_states, mdp.num_actions, mdp.horizon);
    TabularPolicy pi = build_estimator(spec, ct, demonstrator, num_trajectories);
    subopts[i] = suboptimality(mdp, demonstrator, pi);
    gammas[i] = coverage_gamma(pi, demonstrator);
  });

  StudySummary out;
  out.estimator = spec.id;
  out.num_trajectories = num_trajectories;
  out.n_trials = n_trials;
  out.seed = seed;
  double sum = 0.0;
  for (double v : subopts) sum += v;
  out.mean_subopt = sum / n_trials;
  double sq = 0.0;
  for (double v : subopts) sq += (v - out.mean_subopt) * (v - out.mean_subopt);
  out.se_subopt = n_trials > 1 ? std::sqrt(sq / (n_trials - 1.0) / n_trials) : 0.0;
  std::vector<double> sorted_gamma = gammas;
  std::sort(sorted_gamma.begin(), sorted_gamma.end());
  out.gamma_min = sorted_gamma.front();
  out.gamma_median = n_trials % 2 == 1
                         ? sorted_gamma[n_trials / 2]
                         : 0.5 * (sorted_gamma[n_trials / 2 - 1] + sorted_gamma[n_trials / 2]);
  int zero_count = 0;
  for (double g : gammas)
    if (g <= 0.0) ++zero_count;
  out.frac_gamma_zero = static_cast<double>(zero_count) / n_trials;
  return out;
}

std::vector<std::string> study_csv_header() {
  return {"estimator",  "T",         "n_trials",     "mean_subopt",    "se_subopt",
          "gamma_min",  "gamma_median", "frac_gamma_zero", "seed"};
}

std::vector<std::string> study_csv_row(const StudySummary& s) {
  return {s.estimator,
          std::to_string(s.num_trajectories),
          std::to_string(s.n_trials),
          format_double(s.mean_subopt),
          format_double(s.se_subopt),
          format_double(s.gamma_min),
          format_double(s.gamma_median),
          format_double(s.frac_gamma_zero),
          std::to_string(s.seed)};
}

}  // namespace postbc
