#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "postbc/csv.hpp"
#include "postbc/ensemble.hpp"
#include "postbc/mdp.hpp"

namespace postbc::experiments {

/// One threshold check evaluated by an experiment; the CLI --check mode and
/// the acceptance suite both consume these.
struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

bool all_passed(const std::vector<CheckLine>& checks);

// ---------------------------------------------------------------------------
// Tabular experiments

struct Prop1Params {
  double epsilon = 0.01;
  int num_demos = 4;
  int trials = 10000;
  std::uint64_t seed = 20240801;
  int workers = 1;
};

struct Prop1Result {
  double frac_support_collapse = 0.0;  // both rare arms unseen
  double expected_collapse = 0.0;      // (1 - 4 eps)^T
  double frac_gamma_zero_bc = 0.0;     // any supported arm unseen
  double frac_gamma_zero_pt = 0.0;
  CsvTable table{std::vector<std::string>{}};
  CsvTable study_table{std::vector<std::string>{}};
  std::vector<CheckLine> checks;
};

Prop1Result run_prop1_counterexample(const Prop1Params& params);

struct Prop1FinetuneParams {
  double epsilon = 0.01;
  int num_demos = 4;
  int t_prime = 2000;
  int repetitions = 200;
  std::uint64_t seed = 20240802;
  int workers = 1;
};

struct Prop1FinetuneResult {
  double collapsed_frac_regret_one = 0.0;  // fraction of reps with max regret 1
  double pt_recovered_frac = 0.0;          // optimal on both instances
  CsvTable table{std::vector<std::string>{}};
  std::vector<CheckLine> checks;
};

Prop1FinetuneResult run_prop1_finetune(const Prop1FinetuneParams& params);

struct Thm1SuiteParams {
  int num_states = 5;
  int num_actions = 4;
  int horizon = 3;
  std::vector<int> demo_counts = {50, 250, 1000};
  int draws_per_count = 2000;
  double delta = 0.1;
  int num_mdps = 10;
  std::uint64_t seed = 20240803;
  int workers = 1;
};

struct Thm1SuiteRow {
  int num_demos = 0;
  double frac_bound_fail = 0.0;
  double frac_gamma_zero_pt = 0.0;
  double mean_subopt_bc = 0.0;
  double mean_subopt_pt = 0.0;
  double se_subopt_bc = 0.0;
  double se_subopt_pt = 0.0;
};

struct Thm1SuiteResult {
  std::vector<Thm1SuiteRow> rows;
  CsvTable table{std::vector<std::string>{}};
  std::vector<CheckLine> coverage_checks;  // acceptance 3
  std::vector<CheckLine> subopt_checks;    // acceptance 4
};

Thm1SuiteResult run_thm1_suite(const Thm1SuiteParams& params);

/// Random (MDP, demonstrator) pair used by the Theorem-1 suite.
void random_mdp_instance(int num_states, int num_actions, int horizon, Rng& rng,
                         TabularMdp* mdp, TabularPolicy* demonstrator);

struct Prop2Params {
  int num_states = 5;
  int horizon = 4;
  double delta = 0.08;
  int num_demos = 8;
  int trials = 10000;
  std::vector<double> alphas = {0.05, 0.2, 0.5, 1.0};
  std::uint64_t seed = 20240804;
  int workers = 1;
};

struct Prop2Result {
  double event_freq = 0.0;
  bool coverage_exact = false;
  double demonstrator_value = 0.0;
  CsvTable table{std::vector<std::string>{}};
  std::vector<CheckLine> checks;
};

Prop2Result run_prop2_tradeoff(const Prop2Params& params);

struct Thm2Params {
  std::vector<int> action_counts = {2, 4, 8};
  int num_demos = 50;
  int draws_per_instance = 2000;
  std::uint64_t seed = 20240805;
  int workers = 1;
};

struct Thm2Result {
  std::vector<double> gammas;  // measured gamma per A, same order as action_counts
  CsvTable table{std::vector<std::string>{}};
  std::vector<CheckLine> checks;
};

Thm2Result run_thm2_scaling(const Thm2Params& params);

// ---------------------------------------------------------------------------
// Gaussian / ensemble / gradient experiments

struct GaussianCheckParams {
  int samples = 10000;
  std::uint64_t seed = 20240806;
  int workers = 1;
};

struct GaussianCheckResult {
  double mean_err_x = 0.0, mean_err_y = 0.0;
  double cov_frob_rel_err = 0.0;
  double ks_x = 0.0, ks_y = 0.0;
  double ks_threshold = 0.0;
  CsvTable table{std::vector<std::string>{}};
  std::vector<CheckLine> checks;
};

GaussianCheckResult run_gaussian_check(const GaussianCheckParams& params);

struct EnsembleCheckParams {
  int ensemble_size = 1000;
  int num_demos = 20;
  std::uint64_t seed = 20240807;
  int workers = 1;
};

struct EnsembleCheckResult {
  double cov_frob_rel_err = 0.0;
  CsvTable table{std::vector<std::string>{}};
  std::vector<CheckLine> checks;
};

EnsembleCheckResult run_ensemble_check(const EnsembleCheckParams& params);

struct GradCheckParams {
  int coords_per_arch = 10;
  std::uint64_t seed = 20240808;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  CsvTable table{std::vector<std::string>{}};
  std::vector<CheckLine> checks;
};

GradCheckResult run_grad_check(const GradCheckParams& params);

// ---------------------------------------------------------------------------
// Fork-fixture experiments (Fig.-1 behavior and Best-of-N)

struct ForkFixtureParams {
  int demos = 10;             // 9 branch-committed + 1 through the fork zone
  int ensemble_size = 12;
  EnsembleNoise ensemble_mode = EnsembleNoise::kGaussianNoise;
  double ensemble_sigma = 0.3;
  double ensemble_prior_reg = 1.0;  // Prop.-4 anchor weight
  double postbc_alpha = 5.0;        // posterior noise weight
  int policy_epochs = 9600;
  int policy_batch = 32;
  double policy_lr = 2e-3;
  std::vector<int> policy_hidden = {64, 64};
  int regressor_epochs = 400;
  std::vector<int> regressor_hidden = {32, 32};
};

struct Fig1Params {
  int num_seeds = 3;
  int samples = 1000;
  std::uint64_t seed = 20240809;
  int workers = 1;
  ForkFixtureParams fixture;
};

struct Fig1Result {
  double bc_minority_mass = 0.0;      // mean over seeds, at the fork state
  double postbc_minority_mass = 0.0;
  double bc_fork_std = 0.0;
  double postbc_fork_std = 0.0;
  double high_density_mean_gap = 0.0;
  int high_density_occurrences = 0;
  CsvTable table{std::vector<std::string>{}};
  std::vector<CheckLine> checks;
};

Fig1Result run_fig1_fork(const Fig1Params& params);

struct BonParams {
  int num_seeds = 3;
  int t_on = 100;
  int best_of_n = 16;
  int eval_episodes = 200;
  std::uint64_t seed = 20240810;
  int workers = 1;
  ForkFixtureParams fixture;
  int q_steps = 12000;
  double q_tau = 0.7;
};

struct BonResult {
  double bc_pretrained = 0.0;   // mean success over seeds
  double postbc_pretrained = 0.0;
  double bc_bon = 0.0;
  double postbc_bon = 0.0;
  CsvTable table{std::vector<std::string>{}};
  std::vector<CheckLine> checks;
};

BonResult run_bon_fork(const BonParams& params);

}  // namespace postbc::experiments
