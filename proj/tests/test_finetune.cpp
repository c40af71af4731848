#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "postbc/constructions.hpp"
#include "postbc/diffusion.hpp"
#include "postbc/envs.hpp"
#include "postbc/experiments.hpp"
#include "postbc/finetune.hpp"

using namespace postbc;

namespace {

class ConstantPolicy : public ContinuousPolicy {
 public:
  explicit ConstantPolicy(std::vector<double> action) : action_(std::move(action)) {}
  std::vector<double> sample(const std::vector<double>&, Rng&) const override {
    return action_;
  }

 private:
  std::vector<double> action_;
};

// small sigma-BC policy on a left-leaning dataset; samples mostly negative
// actions with a minority of positive ones
GenerativePolicy spread_policy(std::uint64_t seed) {
  ContinuousDemoDataset ds;
  ds.state_dim = 1;
  ds.action_dim = 1;
  ds.horizon = 1;
  for (int i = 0; i < 16; ++i) {
    ContinuousStep step;
    step.state = {0.0};
    step.action = {i % 2 == 0 ? -0.9 : -0.5};
    ds.trajectories.push_back({step});
  }
  ds.norm = compute_action_normalization(ds.trajectories, 1);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 16;
  cfg.step_size = 2e-3;
  cfg.hidden = {32, 32};
  cfg.train_steps = 50;
  cfg.infer_steps = 16;
  Rng rng(seed);
  return train_sigma_bc(ds, 4.0, cfg, rng);  // sigma in normalized action units
}

LabeledRollouts single_transition_rollouts(double reward) {
  LabeledRollouts r;
  LabeledTrajectory traj;
  TransitionStep step;
  step.state = {0.25};
  step.action = {0.5};
  step.reward = reward;
  step.next_state = {0.75};
  step.done = true;
  traj.steps.push_back(step);
  traj.success = reward > 0.0;
  r.trajectories.push_back(traj);
  return r;
}

}  // namespace

TEST_CASE("collect_rollouts labels successes and failures") {
  auto env = fork_env();
  auto demo = scripted_demonstrator("fork");
  Rng rng(141);
  LabeledRollouts good = collect_rollouts(*env, *demo, 50, rng);
  good.validate();
  for (const auto& traj : good.trajectories) CHECK(traj.success);

  ConstantPolicy zero({0.0});
  LabeledRollouts bad = collect_rollouts(*env, zero, 20, rng);
  bad.validate();
  for (const auto& traj : bad.trajectories) {
    CHECK(!traj.success);
    CHECK(static_cast<int>(traj.steps.size()) == env->horizon());
  }

  CHECK_THROWS_AS(collect_rollouts(*env, zero, 0, rng), std::invalid_argument);
}

TEST_CASE("rollout label fraction matches the policy success rate") {
  auto env = fork_env();
  ConstantPolicy right({1.0});
  Rng rng(142);
  LabeledRollouts rollouts = collect_rollouts(*env, right, 400, rng);
  double label_rate = 0.0;
  for (const auto& traj : rollouts.trajectories) label_rate += traj.success ? 1.0 : 0.0;
  label_rate /= rollouts.num_trajectories();
  double eval_rate = evaluate_policy_success(*env, right, 4000, 143);
  double se = std::sqrt(eval_rate * (1.0 - eval_rate) / 400.0);
  CHECK(std::abs(label_rate - eval_rate) <= 4.0 * std::max(se, 0.005));
}

TEST_CASE("expectile loss identities") {
  Rng rng(144);
  for (int i = 0; i < 100; ++i) {
    double u = rng.normal();
    CHECK(expectile_loss(u, 0.5) == 0.5 * u * u);  // exact identity
  }
  CHECK(expectile_loss(1.0, 0.7) == doctest::Approx(0.7));
  CHECK(expectile_loss(-1.0, 0.7) == doctest::Approx(0.3));
}

TEST_CASE("Q converges to 1 on a single rewarded terminal transition") {
  QConfig cfg;
  cfg.hidden = {16, 16};
  cfg.steps = 1500;
  cfg.batch_size = 8;
  Rng rng(145);
  QFunction q = fit_expectile_q(single_transition_rollouts(1.0), cfg, rng);
  CHECK(q.q_value({0.25}, {0.5}) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("duplicated rollouts converge to the same values") {
  auto env = fork_env();
  ConstantPolicy right({1.0});
  Rng rng(146);
  LabeledRollouts rollouts = collect_rollouts(*env, right, 30, rng);
  LabeledRollouts doubled = rollouts;
  doubled.trajectories.insert(doubled.trajectories.end(), rollouts.trajectories.begin(),
                              rollouts.trajectories.end());
  QConfig cfg;
  cfg.hidden = {16, 16};
  cfg.steps = 9000;
  cfg.batch_size = 128;
  cfg.learning_rate = 7e-4;
  Rng r1(147), r2(148);
  QFunction q1 = fit_expectile_q(rollouts, cfg, r1);
  QFunction q2 = fit_expectile_q(doubled, cfg, r2);
  const auto& probe = rollouts.trajectories.front().steps.front();
  CHECK(std::abs(q1.q_value(probe.state, probe.action) -
                 q2.q_value(probe.state, probe.action)) <= 0.02);
}

TEST_CASE("fit_expectile_q rejects bad inputs") {
  QConfig cfg;
  Rng rng(149);
  CHECK_THROWS_AS(fit_expectile_q(LabeledRollouts{}, cfg, rng), std::invalid_argument);
  QConfig bad_tau = cfg;
  bad_tau.tau = 1.0;
  CHECK_THROWS_AS(fit_expectile_q(single_transition_rollouts(1.0), bad_tau, rng),
                  std::invalid_argument);
}

TEST_CASE("best_of_n_act contracts") {
  GenerativePolicy policy = spread_policy(150);
  std::vector<double> state{0.0};

  // N = 1 reduces to sample_action under the same rng state
  Rng r1(151), r2(151);
  ActionScorer any = [](const std::vector<double>&, const std::vector<double>& a) {
    return a[0];
  };
  CHECK(best_of_n_act(policy, any, state, 1, r1) == policy.sample_action(state, r2));

  // constant scorer: ties resolve to the first sample
  Rng r3(152), r4(152);
  ActionScorer constant = [](const std::vector<double>&, const std::vector<double>&) {
    return 3.14;
  };
  CHECK(best_of_n_act(policy, constant, state, 8, r3) == policy.sample_action(state, r4));

  Rng r5(153);
  CHECK_THROWS_AS(best_of_n_act(policy, any, state, 0, r5), std::invalid_argument);
}

TEST_CASE("argmax selection is invariant to positive affine maps of the scorer") {
  GenerativePolicy policy = spread_policy(154);
  std::vector<double> state{0.0};
  Rng table_rng(155);
  for (int trial = 0; trial < 20; ++trial) {
    // random smooth scorer
    double w0 = table_rng.normal(), w1 = table_rng.normal(), w2 = table_rng.normal();
    ActionScorer base = [w0, w1, w2](const std::vector<double>&,
                                     const std::vector<double>& a) {
      return w0 + w1 * a[0] + w2 * a[0] * a[0];
    };
    ActionScorer affine = [&base](const std::vector<double>& s,
                                  const std::vector<double>& a) {
      return 2.7 * base(s, a) + 5.0;
    };
    std::uint64_t seed = 156 + trial;
    Rng ra(seed), rb(seed);
    CHECK(best_of_n_act(policy, base, state, 8, ra) ==
          best_of_n_act(policy, affine, state, 8, rb));
  }
}

TEST_CASE("minority-branch selection frequency increases with N under an oracle scorer") {
  GenerativePolicy policy = spread_policy(157);
  ActionScorer toward_positive = [](const std::vector<double>&,
                                    const std::vector<double>& a) { return a[0]; };
  std::vector<double> state{0.0};
  std::vector<double> freq;
  for (int n : {1, 4, 16}) {
    int positive = 0;
    Rng rng(158);
    for (int i = 0; i < 1000; ++i)
      if (best_of_n_act(policy, toward_positive, state, n, rng)[0] > 0.0) ++positive;
    freq.push_back(positive / 1000.0);
  }
  CHECK(freq[1] > freq[0]);
  CHECK(freq[2] > freq[1]);
}

TEST_CASE("evaluate_bon contracts") {
  auto env = fork_env();
  auto demo = scripted_demonstrator("fork");
  // oracle policy (plain evaluation): success rate 1.0
  CHECK(evaluate_policy_success(*env, *demo, 500, 159) == doctest::Approx(1.0));

  GenerativePolicy policy = spread_policy(160);
  // N = 1 ignores the scorer entirely: exact equality under the same seed
  ActionScorer toward_positive = [](const std::vector<double>&,
                                    const std::vector<double>& a) { return a[0]; };
  double plain = evaluate_bon(*env, policy, static_cast<const ActionScorer*>(nullptr), 1,
                              200, 161);
  double bon1 = evaluate_bon(*env, policy, &toward_positive, 1, 200, 161);
  CHECK(plain == bon1);
}

TEST_CASE("evaluate_bon is non-decreasing in N under a success-indicator scorer") {
  auto env = fork_env();
  ActionScorer success_indicator = [&env](const std::vector<double>& s,
                                          const std::vector<double>& a) {
    return env->is_success(env->step(s, a)) ? 1.0 : 0.0;
  };
  std::vector<double> mean_rates;
  for (int n : {1, 4, 16}) {
    double total = 0.0;
    for (int seed = 0; seed < 3; ++seed) {
      GenerativePolicy policy = spread_policy(162 + seed);
      total += evaluate_bon(*env, policy, &success_indicator, n, 200, 163 + seed);
    }
    mean_rates.push_back(total / 3.0);
  }
  CHECK(mean_rates[1] >= mean_rates[0] - 0.02);
  CHECK(mean_rates[2] >= mean_rates[1] - 0.02);
}

TEST_CASE("tabular finetune on bandits") {
  // distinct deterministic rewards: returns the argmax arm once all visited
  TabularMdp mdp = TabularMdp::zeros(1, 3, 1);
  mdp.init_dist[0] = 1.0;
  for (int a = 0; a < 3; ++a) {
    mdp.transition(0, 0, a, 0) = 1.0;
    mdp.reward(0, 0, a) = 0.2 + 0.3 * a;
  }
  TabularPolicy uniform = TabularPolicy::uniform(1, 3, 1);
  Rng rng(164);
  TabularPolicy tuned = tabular_finetune(mdp, uniform, 300, rng);
  CHECK(tuned.prob(0, 0, 2) == 1.0);

  // collapsed pretraining keeps its support
  Prop1Instances inst = prop1_bandits(0.01);
  TabularPolicy collapsed = TabularPolicy::uniform(1, 3, 1);
  collapsed.prob(0, 0, 0) = 1.0;
  collapsed.prob(0, 0, 1) = 0.0;
  collapsed.prob(0, 0, 2) = 0.0;
  TabularPolicy tuned2 = tabular_finetune(inst.m1, collapsed, 500, rng);
  CHECK(tuned2.prob(0, 0, 0) == 1.0);
  CHECK(tuned2.prob(0, 0, 1) == 0.0);
  CHECK(tuned2.prob(0, 0, 2) == 0.0);

  CHECK_THROWS_AS(tabular_finetune(inst.m1, collapsed, 0, rng), std::invalid_argument);
}

TEST_CASE("tabular finetune support discipline on random MDPs") {
  for (int trial = 0; trial < 5; ++trial) {
    TabularMdp mdp;
    TabularPolicy demo;
    Rng gen(165 + trial);
    experiments::random_mdp_instance(4, 3, 3, gen, &mdp, &demo);
    // sparsify the pretrained policy
    TabularPolicy pretrained = demo;
    for (int h = 0; h < 3; ++h)
      for (int s = 0; s < 4; ++s) {
        double* row = pretrained.row(h, s);
        row[0] += row[2];
        row[2] = 0.0;
      }
    Rng rng(166 + trial);
    TabularPolicy tuned = tabular_finetune(mdp, pretrained, 200, rng);
    tuned.validate();
    for (int h = 0; h < 3; ++h)
      for (int s = 0; s < 4; ++s)
        if (tuned.prob(h, s, 2) > 0.0)
          FAIL("positive probability on an action with zero pretrained mass");
  }
}

TEST_CASE("rollouts serialize to JSONL") {
  auto env = fork_env();
  auto demo = scripted_demonstrator("fork");
  Rng rng(167);
  LabeledRollouts rollouts = collect_rollouts(*env, *demo, 3, rng);
  save_rollouts_jsonl(rollouts, "/tmp/postbc_test_rollouts.jsonl");
  std::ifstream f("/tmp/postbc_test_rollouts.jsonl");
  int lines = 0;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 3);
}
