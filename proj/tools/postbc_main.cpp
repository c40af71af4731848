// Experiment runner: named experiments over the tabular theory suite, the
// Gaussian/ensemble calibration checks, and the fork-environment pretraining
// and Best-of-N comparisons. Each run writes a self-describing directory
// (metadata.json + result CSVs); --check applies the documented thresholds
// and fails the process when one is violated.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "postbc/csv.hpp"
#include "postbc/diffusion.hpp"
#include "postbc/envs.hpp"
#include "postbc/experiments.hpp"
#include "postbc/parallel.hpp"
#include "postbc/run_io.hpp"

namespace {

using nlohmann::json;
using namespace postbc;
namespace expt = postbc::experiments;

int get_int(const json& cfg, const std::string& key, int fallback) {
  return cfg.contains(key) ? cfg.at(key).get<int>() : fallback;
}
double get_double(const json& cfg, const std::string& key, double fallback) {
  return cfg.contains(key) ? cfg.at(key).get<double>() : fallback;
}
std::uint64_t get_seed(const json& cfg, std::uint64_t fallback) {
  return cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : fallback;
}
std::string get_string(const json& cfg, const std::string& key, const std::string& fallback) {
  return cfg.contains(key) ? cfg.at(key).get<std::string>() : fallback;
}

int print_checks(const std::vector<expt::CheckLine>& checks) {
  int failures = 0;
  for (const auto& c : checks) {
    std::printf("[%s] %s (%s)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                c.detail.c_str());
    if (!c.passed) ++failures;
  }
  return failures;
}

struct RunArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_root;
  bool check = false;
};

json resolve_config(const RunArgs& args, const json& defaults,
                    const std::vector<ConfigField>& schema) {
  json cfg = defaults;
  if (!args.config_path.empty()) {
    json file_cfg = load_config_file(args.config_path);
    cfg.merge_patch(file_cfg);
  }
  for (const std::string& o : args.overrides) apply_override(cfg, o);
  validate_config(cfg, schema);
  return cfg;
}

std::string run_dir_for(const RunArgs& args, const std::string& name, const json& cfg) {
  std::string root = args.out_root.empty() ? default_out_root() : args.out_root;
  std::string dir_name = name + "-s" + std::to_string(get_seed(cfg, 0));
  return make_run_dir(root, dir_name, cfg);
}

expt::ForkFixtureParams fixture_from_config(const json& cfg) {
  expt::ForkFixtureParams f;
  f.demos = get_int(cfg, "demos", f.demos);
  f.ensemble_size = get_int(cfg, "ensemble_size", f.ensemble_size);
  f.postbc_alpha = get_double(cfg, "postbc_alpha", f.postbc_alpha);
  f.policy_epochs = get_int(cfg, "policy_epochs", f.policy_epochs);
  f.policy_batch = get_int(cfg, "policy_batch", f.policy_batch);
  f.policy_lr = get_double(cfg, "policy_lr", f.policy_lr);
  f.regressor_epochs = get_int(cfg, "regressor_epochs", f.regressor_epochs);
  return f;
}

const std::vector<ConfigField> kFixtureSchema = {
    {"demos", "integer"},        {"ensemble_size", "integer"},
    {"postbc_alpha", "number"},  {"policy_epochs", "integer"},
    {"policy_batch", "integer"}, {"policy_lr", "number"},
    {"regressor_epochs", "integer"}};

std::vector<ConfigField> with_common(std::vector<ConfigField> fields) {
  fields.push_back({"seed", "integer"});
  fields.push_back({"workers", "integer"});
  return fields;
}

std::vector<ConfigField> with_fixture(std::vector<ConfigField> fields) {
  fields = with_common(std::move(fields));
  fields.insert(fields.end(), kFixtureSchema.begin(), kFixtureSchema.end());
  return fields;
}

int run_tabular_bench(const RunArgs& args) {
  json defaults = {{"seed", 20240803}, {"workers", default_workers()},
                   {"draws", 2000},    {"num_mdps", 10},
                   {"S", 5},           {"A", 4},
                   {"H", 3},           {"delta", 0.1},
                   {"Ts", {50, 250, 1000}}};
  json cfg = resolve_config(args, defaults,
                            with_common({{"draws", "integer"},
                                         {"num_mdps", "integer"},
                                         {"S", "integer"},
                                         {"A", "integer"},
                                         {"H", "integer"},
                                         {"delta", "number"},
                                         {"Ts", "array"}}));
  std::string dir = run_dir_for(args, "tabular-bench", cfg);

  expt::Thm1SuiteParams p;
  p.num_states = get_int(cfg, "S", 5);
  p.num_actions = get_int(cfg, "A", 4);
  p.horizon = get_int(cfg, "H", 3);
  p.demo_counts = cfg.at("Ts").get<std::vector<int>>();
  p.draws_per_count = get_int(cfg, "draws", 2000);
  p.delta = get_double(cfg, "delta", 0.1);
  p.num_mdps = get_int(cfg, "num_mdps", 10);
  p.seed = get_seed(cfg, p.seed);
  p.workers = get_int(cfg, "workers", 1);
  expt::Thm1SuiteResult res = expt::run_thm1_suite(p);
  res.table.write_file(dir + "/thm1_suite.csv");
  std::printf("wrote %s/thm1_suite.csv\n", dir.c_str());
  if (args.check) {
    std::vector<expt::CheckLine> all = res.coverage_checks;
    all.insert(all.end(), res.subopt_checks.begin(), res.subopt_checks.end());
    return print_checks(all) == 0 ? 0 : 1;
  }
  return 0;
}

int run_counterexample(const RunArgs& args, const std::string& name) {
  if (name == "prop1") {
    json defaults = {{"seed", 20240801}, {"workers", default_workers()}, {"epsilon", 0.01},
                     {"T", 4},           {"trials", 10000},              {"T_prime", 2000},
                     {"repetitions", 200}};
    json cfg = resolve_config(args, defaults,
                              with_common({{"epsilon", "number"},
                                           {"T", "integer"},
                                           {"trials", "integer"},
                                           {"T_prime", "integer"},
                                           {"repetitions", "integer"}}));
    std::string dir = run_dir_for(args, "counterexample-prop1", cfg);
    expt::Prop1Params p;
    p.epsilon = get_double(cfg, "epsilon", 0.01);
    p.num_demos = get_int(cfg, "T", 4);
    p.trials = get_int(cfg, "trials", 10000);
    p.seed = get_seed(cfg, p.seed);
    p.workers = get_int(cfg, "workers", 1);
    expt::Prop1Result res = expt::run_prop1_counterexample(p);
    res.table.write_file(dir + "/prop1.csv");
    res.study_table.write_file(dir + "/prop1_study.csv");

    expt::Prop1FinetuneParams fp;
    fp.epsilon = p.epsilon;
    fp.num_demos = p.num_demos;
    fp.t_prime = get_int(cfg, "T_prime", 2000);
    fp.repetitions = get_int(cfg, "repetitions", 200);
    fp.seed = splitmix64(p.seed ^ 0x9d2c5680ULL);
    fp.workers = p.workers;
    expt::Prop1FinetuneResult fres = expt::run_prop1_finetune(fp);
    fres.table.write_file(dir + "/prop1_finetune.csv");
    std::printf("wrote %s/{prop1,prop1_study,prop1_finetune}.csv\n", dir.c_str());
    if (args.check) {
      std::vector<expt::CheckLine> all = res.checks;
      all.insert(all.end(), fres.checks.begin(), fres.checks.end());
      return print_checks(all) == 0 ? 0 : 1;
    }
    return 0;
  }
  if (name == "prop2") {
    json defaults = {{"seed", 20240804}, {"workers", default_workers()},
                     {"S", 5},           {"H", 4},
                     {"delta", 0.08},    {"T", 8},
                     {"trials", 10000},  {"alphas", {0.05, 0.2, 0.5, 1.0}}};
    json cfg = resolve_config(args, defaults,
                              with_common({{"S", "integer"},
                                           {"H", "integer"},
                                           {"delta", "number"},
                                           {"T", "integer"},
                                           {"trials", "integer"},
                                           {"alphas", "array"}}));
    std::string dir = run_dir_for(args, "counterexample-prop2", cfg);
    expt::Prop2Params p;
    p.num_states = get_int(cfg, "S", 5);
    p.horizon = get_int(cfg, "H", 4);
    p.delta = get_double(cfg, "delta", 0.08);
    p.num_demos = get_int(cfg, "T", 8);
    p.trials = get_int(cfg, "trials", 10000);
    p.alphas = cfg.at("alphas").get<std::vector<double>>();
    p.seed = get_seed(cfg, p.seed);
    p.workers = get_int(cfg, "workers", 1);
    expt::Prop2Result res = expt::run_prop2_tradeoff(p);
    res.table.write_file(dir + "/prop2.csv");
    std::printf("wrote %s/prop2.csv\n", dir.c_str());
    return args.check ? (print_checks(res.checks) == 0 ? 0 : 1) : 0;
  }
  if (name == "thm2") {
    json defaults = {{"seed", 20240805},
                     {"workers", default_workers()},
                     {"As", {2, 4, 8}},
                     {"T", 50},
                     {"draws", 2000}};
    json cfg = resolve_config(
        args, defaults,
        with_common({{"As", "array"}, {"T", "integer"}, {"draws", "integer"}}));
    std::string dir = run_dir_for(args, "counterexample-thm2", cfg);
    expt::Thm2Params p;
    p.action_counts = cfg.at("As").get<std::vector<int>>();
    p.num_demos = get_int(cfg, "T", 50);
    p.draws_per_instance = get_int(cfg, "draws", 2000);
    p.seed = get_seed(cfg, p.seed);
    p.workers = get_int(cfg, "workers", 1);
    expt::Thm2Result res = expt::run_thm2_scaling(p);
    res.table.write_file(dir + "/thm2.csv");
    std::printf("wrote %s/thm2.csv\n", dir.c_str());
    return args.check ? (print_checks(res.checks) == 0 ? 0 : 1) : 0;
  }
  std::fprintf(stderr, "unknown construction name: %s (expected prop1|prop2|thm2)\n",
               name.c_str());
  return 2;
}

int run_gaussian_check(const RunArgs& args) {
  json defaults = {{"seed", 20240806}, {"workers", default_workers()}, {"samples", 10000}};
  json cfg = resolve_config(args, defaults, with_common({{"samples", "integer"}}));
  std::string dir = run_dir_for(args, "gaussian-check", cfg);
  expt::GaussianCheckParams p;
  p.samples = get_int(cfg, "samples", 10000);
  p.seed = get_seed(cfg, p.seed);
  p.workers = get_int(cfg, "workers", 1);
  expt::GaussianCheckResult res = expt::run_gaussian_check(p);
  res.table.write_file(dir + "/gaussian_moments.csv");
  std::printf("wrote %s/gaussian_moments.csv\n", dir.c_str());
  return args.check ? (print_checks(res.checks) == 0 ? 0 : 1) : 0;
}

int run_ensemble_check(const RunArgs& args) {
  json defaults = {{"seed", 20240807}, {"workers", default_workers()}, {"K", 1000}, {"T", 20}};
  json cfg = resolve_config(args, defaults,
                            with_common({{"K", "integer"}, {"T", "integer"}}));
  std::string dir = run_dir_for(args, "ensemble-check", cfg);
  expt::EnsembleCheckParams p;
  p.ensemble_size = get_int(cfg, "K", 1000);
  p.num_demos = get_int(cfg, "T", 20);
  p.seed = get_seed(cfg, p.seed);
  p.workers = get_int(cfg, "workers", 1);
  expt::EnsembleCheckResult res = expt::run_ensemble_check(p);
  res.table.write_file(dir + "/ensemble_calibration.csv");
  std::printf("wrote %s/ensemble_calibration.csv\n", dir.c_str());
  return args.check ? (print_checks(res.checks) == 0 ? 0 : 1) : 0;
}

int run_fig1_demo(const RunArgs& args) {
  json defaults = {{"seed", 20240809}, {"workers", default_workers()}, {"num_seeds", 3},
                   {"samples", 1000}};
  json cfg = resolve_config(
      args, defaults, with_fixture({{"num_seeds", "integer"}, {"samples", "integer"}}));
  std::string dir = run_dir_for(args, "fig1-demo", cfg);
  expt::Fig1Params p;
  p.num_seeds = get_int(cfg, "num_seeds", 3);
  p.samples = get_int(cfg, "samples", 1000);
  p.seed = get_seed(cfg, p.seed);
  p.workers = get_int(cfg, "workers", 1);
  p.fixture = fixture_from_config(cfg);
  expt::Fig1Result res = expt::run_fig1_fork(p);
  res.table.write_file(dir + "/fig1_fork.csv");
  std::printf("wrote %s/fig1_fork.csv\n", dir.c_str());
  return args.check ? (print_checks(res.checks) == 0 ? 0 : 1) : 0;
}

int run_finetune_bon(const RunArgs& args) {
  json defaults = {{"seed", 20240810}, {"workers", default_workers()}, {"num_seeds", 3},
                   {"T_on", 100},      {"N", 16},
                   {"episodes", 200},  {"q_steps", 4000},
                   {"q_tau", 0.7}};
  json cfg = resolve_config(args, defaults,
                            with_fixture({{"num_seeds", "integer"},
                                          {"T_on", "integer"},
                                          {"N", "integer"},
                                          {"episodes", "integer"},
                                          {"q_steps", "integer"},
                                          {"q_tau", "number"}}));
  std::string dir = run_dir_for(args, "finetune-bon", cfg);
  expt::BonParams p;
  p.num_seeds = get_int(cfg, "num_seeds", 3);
  p.t_on = get_int(cfg, "T_on", 100);
  p.best_of_n = get_int(cfg, "N", 16);
  p.eval_episodes = get_int(cfg, "episodes", 200);
  p.q_steps = get_int(cfg, "q_steps", 4000);
  p.q_tau = get_double(cfg, "q_tau", 0.7);
  p.seed = get_seed(cfg, p.seed);
  p.workers = get_int(cfg, "workers", 1);
  p.fixture = fixture_from_config(cfg);
  expt::BonResult res = expt::run_bon_fork(p);
  res.table.write_file(dir + "/bon_fork.csv");
  std::printf("wrote %s/bon_fork.csv\n", dir.c_str());
  return args.check ? (print_checks(res.checks) == 0 ? 0 : 1) : 0;
}

int run_pretrain(const RunArgs& args) {
  json defaults = {{"seed", 20240811},  {"workers", default_workers()},
                   {"sigma_bc", 0.25},  {"samples", 1000}};
  json cfg = resolve_config(args, defaults,
                            with_fixture({{"sigma_bc", "number"}, {"samples", "integer"}}));
  std::string dir = run_dir_for(args, "pretrain", cfg);
  std::uint64_t seed = get_seed(cfg, 20240811);
  expt::ForkFixtureParams fixture = fixture_from_config(cfg);

  Rng collect_rng(splitmix64(seed ^ 0x11ULL));
  ForkEnvConfig env_cfg;
  auto env = fork_env(env_cfg);
  auto demo = scripted_demonstrator("fork");
  TrajectoryFilter left = fork_left_branch_filter();
  ContinuousDemoDataset ds =
      collect_continuous_dataset(*env, *demo, fixture.demos, &left, collect_rng);
  save_continuous_jsonl(ds, dir + "/demos.jsonl", dir + "/demos.meta.json");

  TrainConfig tc;
  tc.epochs = fixture.policy_epochs;
  tc.batch_size = fixture.policy_batch;
  tc.step_size = fixture.policy_lr;
  tc.hidden = fixture.policy_hidden;
  tc.seed = seed;

  EnsembleConfig ec;
  ec.ensemble_size = fixture.ensemble_size;
  ec.mode = EnsembleNoise::kTrajectoryBootstrap;
  ec.regressor.hidden = fixture.regressor_hidden;
  ec.regressor.epochs = fixture.regressor_epochs;
  ec.regressor.batch_size = 32;
  ec.regressor.learning_rate = 3e-3;
  Ensemble ens = fit_ensemble(ds.normalized_copy(), ec, splitmix64(seed ^ 0x12ULL),
                              get_int(cfg, "workers", 1));
  save_ensemble(ens, dir + "/ensemble.params");
  CovField field = CovField::from_ensemble(std::move(ens), CovNormalization::kSample);

  Rng bc_rng(splitmix64(seed ^ 0x13ULL));
  GenerativePolicy bc = train_bc(ds, tc, bc_rng);
  Rng sbc_rng(splitmix64(seed ^ 0x13ULL));
  GenerativePolicy sigma_bc =
      train_sigma_bc(ds, get_double(cfg, "sigma_bc", 0.25), tc, sbc_rng);
  Rng post_rng(splitmix64(seed ^ 0x13ULL));
  GenerativePolicy postbc = train_postbc(ds, field, fixture.postbc_alpha, tc, post_rng);
  bc.save(dir + "/policy_bc.params", seed);
  sigma_bc.save(dir + "/policy_sigma_bc.params", seed);
  postbc.save(dir + "/policy_postbc.params", seed);

  // fork-state sample summary for the three policies
  CsvTable table({"method", "fork_mean", "fork_std", "fork_minority_mass", "seed"});
  const int n_samples = get_int(cfg, "samples", 1000);
  auto summarize = [&](const char* name, const GenerativePolicy& p, std::uint64_t tag) {
    Rng rng(splitmix64(seed ^ tag));
    std::vector<double> vals(n_samples);
    std::vector<double> state{0.0};
    for (int i = 0; i < n_samples; ++i) vals[i] = p.sample_action(state, rng)[0];
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= n_samples;
    double sq = 0.0;
    int pos = 0;
    for (double v : vals) {
      sq += (v - mean) * (v - mean);
      if (v > 0.0) ++pos;
    }
    table.append(table.make_row()
                     .add(name)
                     .add(mean)
                     .add(std::sqrt(sq / (n_samples - 1.0)))
                     .add(static_cast<double>(pos) / n_samples)
                     .add(seed));
  };
  summarize("bc", bc, 0x21ULL);
  summarize("sigma-bc", sigma_bc, 0x22ULL);
  summarize("postbc", postbc, 0x23ULL);
  table.write_file(dir + "/pretrain_summary.csv");
  std::printf("wrote %s/{demos.jsonl,ensemble.params,policy_*.params,pretrain_summary.csv}\n",
              dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"postbc: posterior behavioral cloning experiments"};
  app.require_subcommand(1);

  RunArgs args;
  std::string counterexample_name = "prop1";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON config file");
    sub->add_option("--set", args.overrides, "config override key.path=value");
    sub->add_option("--out", args.out_root, "output root (default $POSTBC_OUT_ROOT or runs)");
    sub->add_flag("--check", args.check, "apply documented thresholds; exit 1 on failure");
  };

  CLI::App* tabular = app.add_subcommand("tabular-bench", "Theorem-1 random-MDP suite");
  add_common(tabular);

  CLI::App* counter = app.add_subcommand("counterexample", "Prop.-1/Prop.-2/Thm.-2 checks");
  add_common(counter);
  counter->add_option("--name", counterexample_name, "prop1|prop2|thm2");
  double opt_epsilon = -1.0;
  int opt_t = -1, opt_trials = -1, opt_samples = -1;
  counter->add_option("--epsilon", opt_epsilon, "prop1 epsilon");
  counter->add_option("--T", opt_t, "demo count");
  counter->add_option("--trials", opt_trials, "Monte-Carlo trials");

  CLI::App* gaussian = app.add_subcommand("gaussian-check", "posterior sampler moments");
  add_common(gaussian);
  gaussian->add_option("--samples", opt_samples, "number of posterior samples");

  CLI::App* ensemble = app.add_subcommand("ensemble-check", "ensemble calibration");
  add_common(ensemble);

  CLI::App* pretrain = app.add_subcommand("pretrain", "train fork policies and save them");
  add_common(pretrain);

  CLI::App* bon = app.add_subcommand("finetune-bon", "Best-of-N comparison on the fork");
  add_common(bon);

  CLI::App* fig1 = app.add_subcommand("fig1-demo", "fork-state action distributions");
  add_common(fig1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::cerr << e.what() << "\n" << app.help() << std::endl;
    return 2;
  }

  // map convenience flags onto config overrides
  if (opt_epsilon >= 0.0) args.overrides.push_back("epsilon=" + format_double(opt_epsilon));
  if (opt_t >= 0) args.overrides.push_back("T=" + std::to_string(opt_t));
  if (opt_trials >= 0) args.overrides.push_back("trials=" + std::to_string(opt_trials));
  if (opt_samples >= 0) args.overrides.push_back("samples=" + std::to_string(opt_samples));

  try {
    if (tabular->parsed()) return run_tabular_bench(args);
    if (counter->parsed()) return run_counterexample(args, counterexample_name);
    if (gaussian->parsed()) return run_gaussian_check(args);
    if (ensemble->parsed()) return run_ensemble_check(args);
    if (pretrain->parsed()) return run_pretrain(args);
    if (bon->parsed()) return run_finetune_bon(args);
    if (fig1->parsed()) return run_fig1_demo(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 4;
  }
  std::cerr << app.help() << std::endl;
  return 2;
}
