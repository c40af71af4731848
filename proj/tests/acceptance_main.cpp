// Acceptance suite: runs the documented end-to-end criteria at their stated
// sizes and tolerances, one line per criterion, and verifies that every
// experiment reproduces its CSV output byte-for-byte when repeated with the
// same seed. Exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "postbc/experiments.hpp"
#include "postbc/parallel.hpp"
#include "postbc/run_io.hpp"

using namespace postbc;
namespace expt = postbc::experiments;

namespace {

struct CriterionOutcome {
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  std::vector<expt::CheckLine> checks;
};

int g_workers = 1;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void print_outcome(int index, const CriterionOutcome& outcome) {
  std::printf("[%s] criterion %2d: %s (%.1fs)\n", outcome.passed ? "PASS" : "FAIL", index,
              outcome.name.c_str(), outcome.seconds);
  for (const auto& c : outcome.checks)
    if (!c.passed) std::printf("         failed: %s (%s)\n", c.name.c_str(), c.detail.c_str());
}

bool runtime_ok(double seconds, double limit) { return seconds < limit; }

}  // namespace

int main() {
  g_workers = default_workers();
  std::filesystem::create_directories("acceptance_runs");
  std::vector<CriterionOutcome> outcomes;
  std::vector<std::pair<std::string, std::string>> csv_snapshots;  // name -> bytes

  // --- experiments run once; criteria read off their results -------------

  expt::Prop1Params prop1_params;
  prop1_params.workers = g_workers;
  auto t0 = std::chrono::steady_clock::now();
  expt::Prop1Result prop1 = expt::run_prop1_counterexample(prop1_params);
  double prop1_secs = seconds_since(t0);
  prop1.table.write_file("acceptance_runs/prop1.csv");
  prop1.study_table.write_file("acceptance_runs/prop1_study.csv");
  csv_snapshots.emplace_back("prop1.csv", prop1.table.to_string());
  csv_snapshots.emplace_back("prop1_study.csv", prop1.study_table.to_string());
  {
    CriterionOutcome c;
    c.name = "Prop. 1 failure rate: collapse frequency within 0.02 of (1-4eps)^T, < 5 s";
    c.checks = prop1.checks;
    c.seconds = prop1_secs;
    c.passed = expt::all_passed(prop1.checks) && runtime_ok(prop1_secs, 5.0);
    outcomes.push_back(c);
  }

  expt::Prop1FinetuneParams pf_params;
  pf_params.workers = g_workers;
  t0 = std::chrono::steady_clock::now();
  expt::Prop1FinetuneResult pf = expt::run_prop1_finetune(pf_params);
  double pf_secs = seconds_since(t0);
  pf.table.write_file("acceptance_runs/prop1_finetune.csv");
  csv_snapshots.emplace_back("prop1_finetune.csv", pf.table.to_string());
  {
    CriterionOutcome c;
    c.name =
        "Prop. 1 finetuning impossibility: collapsed BC stuck, pt recovers >= 95%, < 30 s";
    c.checks = pf.checks;
    c.seconds = pf_secs;
    c.passed = expt::all_passed(pf.checks) && runtime_ok(pf_secs, 30.0);
    outcomes.push_back(c);
  }

  expt::Thm1SuiteParams thm1_params;
  thm1_params.workers = g_workers;
  t0 = std::chrono::steady_clock::now();
  expt::Thm1SuiteResult thm1 = expt::run_thm1_suite(thm1_params);
  double thm1_secs = seconds_since(t0);
  thm1.table.write_file("acceptance_runs/thm1_suite.csv");
  csv_snapshots.emplace_back("thm1_suite.csv", thm1.table.to_string());
  {
    CriterionOutcome c;
    c.name = "Thm. 1 coverage: sampler bound fails <= 13%, gamma(pt) > 0 always, < 2 min";
    c.checks = thm1.coverage_checks;
    c.seconds = thm1_secs;
    c.passed = expt::all_passed(thm1.coverage_checks) && runtime_ok(thm1_secs, 120.0);
    outcomes.push_back(c);
    CriterionOutcome c2;
    c2.name = "Thm. 1 suboptimality: pt <= bc + 0.02 per T, 1/T-style decay, < 2 min";
    c2.checks = thm1.subopt_checks;
    c2.seconds = thm1_secs;
    c2.passed = expt::all_passed(thm1.subopt_checks) && runtime_ok(thm1_secs, 120.0);
    outcomes.push_back(c2);
  }

  expt::Prop2Params prop2_params;
  prop2_params.workers = g_workers;
  t0 = std::chrono::steady_clock::now();
  expt::Prop2Result prop2 = expt::run_prop2_tradeoff(prop2_params);
  double prop2_secs = seconds_since(t0);
  prop2.table.write_file("acceptance_runs/prop2.csv");
  csv_snapshots.emplace_back("prop2.csv", prop2.table.to_string());
  {
    CriterionOutcome c;
    c.name = "Prop. 2 tradeoff: rare event >= 0.08, exact on-event coverage, < 1 min";
    c.checks = prop2.checks;
    c.seconds = prop2_secs;
    c.passed = expt::all_passed(prop2.checks) && runtime_ok(prop2_secs, 60.0);
    outcomes.push_back(c);
  }

  expt::Thm2Params thm2_params;
  thm2_params.workers = g_workers;
  t0 = std::chrono::steady_clock::now();
  expt::Thm2Result thm2 = expt::run_thm2_scaling(thm2_params);
  double thm2_secs = seconds_since(t0);
  thm2.table.write_file("acceptance_runs/thm2.csv");
  csv_snapshots.emplace_back("thm2.csv", thm2.table.to_string());
  {
    CriterionOutcome c;
    c.name = "Thm. 2 scaling: gamma decreasing in A, ratio in [2, 8], < 1 min";
    c.checks = thm2.checks;
    c.seconds = thm2_secs;
    c.passed = expt::all_passed(thm2.checks) && runtime_ok(thm2_secs, 60.0);
    outcomes.push_back(c);
  }

  expt::GaussianCheckParams gauss_params;
  gauss_params.workers = g_workers;
  t0 = std::chrono::steady_clock::now();
  expt::GaussianCheckResult gauss = expt::run_gaussian_check(gauss_params);
  double gauss_secs = seconds_since(t0);
  gauss.table.write_file("acceptance_runs/gaussian_moments.csv");
  csv_snapshots.emplace_back("gaussian_moments.csv", gauss.table.to_string());
  {
    CriterionOutcome c;
    c.name = "Gaussian sampler: moments and per-coordinate KS at 0.01, < 10 s";
    c.checks = gauss.checks;
    c.seconds = gauss_secs;
    c.passed = expt::all_passed(gauss.checks) && runtime_ok(gauss_secs, 10.0);
    outcomes.push_back(c);
  }

  expt::EnsembleCheckParams ens_params;
  ens_params.workers = g_workers;
  t0 = std::chrono::steady_clock::now();
  expt::EnsembleCheckResult ens = expt::run_ensemble_check(ens_params);
  double ens_secs = seconds_since(t0);
  ens.table.write_file("acceptance_runs/ensemble_calibration.csv");
  csv_snapshots.emplace_back("ensemble_calibration.csv", ens.table.to_string());
  {
    CriterionOutcome c;
    c.name = "Ensemble calibration: cov within 10% Frobenius of (1/21) I, < 30 s";
    c.checks = ens.checks;
    c.seconds = ens_secs;
    c.passed = expt::all_passed(ens.checks) && runtime_ok(ens_secs, 30.0);
    outcomes.push_back(c);
  }

  expt::GradCheckParams grad_params;
  t0 = std::chrono::steady_clock::now();
  expt::GradCheckResult grad = expt::run_grad_check(grad_params);
  double grad_secs = seconds_since(t0);
  grad.table.write_file("acceptance_runs/grad_check.csv");
  csv_snapshots.emplace_back("grad_check.csv", grad.table.to_string());
  {
    CriterionOutcome c;
    c.name = "Gradient correctness: rel err < 1e-4, 10 coords x 3 architectures, < 10 s";
    c.checks = grad.checks;
    c.seconds = grad_secs;
    c.passed = expt::all_passed(grad.checks) && runtime_ok(grad_secs, 10.0);
    outcomes.push_back(c);
  }

  expt::Fig1Params fig1_params;
  fig1_params.workers = g_workers;
  t0 = std::chrono::steady_clock::now();
  expt::Fig1Result fig1 = expt::run_fig1_fork(fig1_params);
  double fig1_secs = seconds_since(t0);
  fig1.table.write_file("acceptance_runs/fig1_fork.csv");
  csv_snapshots.emplace_back("fig1_fork.csv", fig1.table.to_string());
  {
    CriterionOutcome c;
    c.name = "Fig.-1 fork behavior: minority mass expands, high-density means match, < 5 min";
    c.checks = fig1.checks;
    c.seconds = fig1_secs;
    c.passed = expt::all_passed(fig1.checks) && runtime_ok(fig1_secs, 300.0);
    outcomes.push_back(c);
  }

  expt::BonParams bon_params;
  bon_params.workers = g_workers;
  t0 = std::chrono::steady_clock::now();
  expt::BonResult bon = expt::run_bon_fork(bon_params);
  double bon_secs = seconds_since(t0);
  bon.table.write_file("acceptance_runs/bon_fork.csv");
  csv_snapshots.emplace_back("bon_fork.csv", bon.table.to_string());
  {
    CriterionOutcome c;
    c.name = "Best-of-N: PostBC+BoN >= BC+BoN + 10 pts, pretrained within 5 pts, < 10 min";
    c.checks = bon.checks;
    c.seconds = bon_secs;
    c.passed = expt::all_passed(bon.checks) && runtime_ok(bon_secs, 600.0);
    outcomes.push_back(c);
  }

  // --- criterion 12: every run repeated with the same seed reproduces the
  // CSVs byte-for-byte --------------------------------------------------
  t0 = std::chrono::steady_clock::now();
  std::vector<expt::CheckLine> determinism;
  auto compare = [&determinism, &csv_snapshots](const std::string& name,
                                                const std::string& bytes) {
    for (const auto& [snap_name, snap_bytes] : csv_snapshots)
      if (snap_name == name) {
        determinism.push_back({"rerun reproduces " + name, bytes == snap_bytes,
                               bytes == snap_bytes ? "byte-identical" : "MISMATCH"});
        return;
      }
    determinism.push_back({"rerun reproduces " + name, false, "no snapshot"});
  };
  {
    expt::Prop1Result again = expt::run_prop1_counterexample(prop1_params);
    compare("prop1.csv", again.table.to_string());
    compare("prop1_study.csv", again.study_table.to_string());
    expt::Prop1FinetuneResult pf_again = expt::run_prop1_finetune(pf_params);
    compare("prop1_finetune.csv", pf_again.table.to_string());
    expt::Thm1SuiteResult thm1_again = expt::run_thm1_suite(thm1_params);
    compare("thm1_suite.csv", thm1_again.table.to_string());
    expt::Prop2Result prop2_again = expt::run_prop2_tradeoff(prop2_params);
    compare("prop2.csv", prop2_again.table.to_string());
    expt::Thm2Result thm2_again = expt::run_thm2_scaling(thm2_params);
    compare("thm2.csv", thm2_again.table.to_string());
    expt::GaussianCheckResult gauss_again = expt::run_gaussian_check(gauss_params);
    compare("gaussian_moments.csv", gauss_again.table.to_string());
    expt::EnsembleCheckResult ens_again = expt::run_ensemble_check(ens_params);
    compare("ensemble_calibration.csv", ens_again.table.to_string());
    expt::GradCheckResult grad_again = expt::run_grad_check(grad_params);
    compare("grad_check.csv", grad_again.table.to_string());
    expt::Fig1Result fig1_again = expt::run_fig1_fork(fig1_params);
    compare("fig1_fork.csv", fig1_again.table.to_string());
    expt::BonResult bon_again = expt::run_bon_fork(bon_params);
    compare("bon_fork.csv", bon_again.table.to_string());
  }
  {
    CriterionOutcome c;
    c.name = "Determinism: identical seeds reproduce every CSV byte-for-byte";
    c.checks = determinism;
    c.seconds = seconds_since(t0);
    c.passed = expt::all_passed(determinism);
    outcomes.push_back(c);
  }

  int failures = 0;
  std::printf("\n==== acceptance criteria ====\n");
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    print_outcome(static_cast<int>(i) + 1, outcomes[i]);
    if (!outcomes[i].passed) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(outcomes.size()) - failures,
              outcomes.size());
  return failures == 0 ? 0 : 1;
}
