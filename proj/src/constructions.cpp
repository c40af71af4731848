#include "postbc/constructions.hpp"

#include <cmath>
#include <stdexcept>

#include "postbc/finetune.hpp"

namespace postbc {

namespace {

TabularMdp bandit(const std::vector<double>& arm_rewards) {
  TabularMdp mdp = TabularMdp::zeros(1, static_cast<int>(arm_rewards.size()), 1);
  mdp.init_dist[0] = 1.0;
  for (int a = 0; a < mdp.num_actions; ++a) {
    mdp.reward(0, 0, a) = arm_rewards[a];
    mdp.transition(0, 0, a, 0) = 1.0;
  }
  return mdp;
}

}  // namespace

Prop1Instances prop1_bandits(double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 0.125)
    throw std::invalid_argument("prop1_bandits: epsilon must be in (0, 1/8]");
  Prop1Instances out;
  out.m1 = bandit({0.0, 1.0, 0.0});
  out.m2 = bandit({0.0, 0.0, 1.0});
  out.demonstrator = TabularPolicy::uniform(1, 3, 1);
  out.demonstrator.prob(0, 0, 0) = 1.0 - 4.0 * epsilon;
  out.demonstrator.prob(0, 0, 1) = 2.0 * epsilon;
  out.demonstrator.prob(0, 0, 2) = 2.0 * epsilon;
  out.m1.validate();
  out.m2.validate();
  out.demonstrator.validate();
  return out;
}

int prop2_rare_state_index(int num_demos, int num_states) {
  const int k = num_states - 2;
  // nominal masses 2^{-i-1}, i = 1..k; the largest one that is <= 1/T
  int best = -1;
  for (int i = 1; i <= k; ++i) {
    double mass = std::pow(2.0, -(i + 1));
    if (mass <= 1.0 / num_demos) {
      best = i;
      break;  // masses decrease in i, so the first feasible i is the largest mass
    }
  }
  if (best < 0)
    throw std::invalid_argument(
        "prop2_rare_state_index: no branch state with mass <= 1/T; increase S");
  return best - 1;  // branch state s~_i lives at index i-1
}

double prop2_default_delta(int num_demos, int horizon, int num_states, double xi) {
  double eps = static_cast<double>(horizon) * horizon * num_states *
                   std::log(static_cast<double>(num_demos)) / num_demos +
               xi;
  return 2.0 * eps;
}

Prop2Instance prop2_chain(int num_demos, int horizon, int num_states, double delta) {
  if (num_states < 3) throw std::invalid_argument("prop2_chain: need S >= 3");
  if (horizon < 2) throw std::invalid_argument("prop2_chain: need H >= 2");
  if (!(delta > 0.0) || delta >= 0.5)
    throw std::invalid_argument("prop2_chain: delta must be in (0, 1/2)");
  if (num_demos < 1) throw std::invalid_argument("prop2_chain: need T >= 1");

  const int k = num_states - 2;
  const int s1 = k, s2 = k + 1;
  TabularMdp mdp = TabularMdp::zeros(num_states, 2, horizon);

  // P0(s1) = 1/2; branch masses 2^{-i-1} with the correction 2^{-(k+1)}
  // folded into s~_1 so the distribution sums to exactly 1.
  mdp.init_dist[s1] = 0.5;
  mdp.init_dist[0] = 0.25 + std::pow(2.0, -(k + 1));
  for (int i = 2; i <= k; ++i) mdp.init_dist[i - 1] = std::pow(2.0, -(i + 1));

  for (int h = 0; h < horizon; ++h) {
    for (int i = 0; i < k; ++i)
      for (int a = 0; a < 2; ++a) mdp.transition(h, i, a, i) = 1.0;  // branch self-loops
    mdp.transition(h, s1, 0, s1) = 1.0;
    mdp.transition(h, s1, 1, s2) = 1.0;
    for (int a = 0; a < 2; ++a) mdp.transition(h, s2, a, s2) = 1.0;
  }

  for (int i = 0; i < k; ++i) {
    mdp.reward(0, i, 0) = 1.0;
    mdp.reward(0, i, 1) = 1.0 - 2.0 * delta;
  }
  mdp.reward(horizon - 1, s1, 0) = 1.0;

  TabularPolicy demo = TabularPolicy::uniform(num_states, 2, horizon);
  for (int h = 0; h < horizon; ++h) {
    demo.prob(h, s1, 0) = 1.0;
    demo.prob(h, s1, 1) = 0.0;
    demo.prob(h, s2, 0) = 1.0;
    demo.prob(h, s2, 1) = 0.0;
  }

  mdp.validate();
  demo.validate();
  Prop2Instance out;
  out.mdp = std::move(mdp);
  out.demonstrator = std::move(demo);
  out.rare_state = prop2_rare_state_index(num_demos, num_states);
  return out;
}

std::vector<Thm2Instance> thm2_family(int num_actions, double alpha_rare) {
  if (num_actions < 2) throw std::invalid_argument("thm2_family: need A >= 2");
  if (!(alpha_rare > 0.0) || alpha_rare >= 1.0)
    throw std::invalid_argument("thm2_family: alpha_rare must be in (0,1)");
  std::vector<double> arm_rewards(num_actions, 0.0);
  arm_rewards[0] = 1.0;
  std::vector<Thm2Instance> family;
  family.reserve(num_actions);
  for (int i = 0; i < num_actions; ++i) {
    Thm2Instance inst;
    inst.mdp = bandit(arm_rewards);
    TabularPolicy demo = TabularPolicy::uniform(1, num_actions, 1);
    for (int a = 0; a < num_actions; ++a) demo.prob(0, 0, a) = 0.0;
    if (i == 0) {
      demo.prob(0, 0, 0) = 1.0;
    } else {
      demo.prob(0, 0, 0) = 1.0 - alpha_rare;
      demo.prob(0, 0, i) = alpha_rare;
    }
    demo.validate();
    inst.demonstrator = std::move(demo);
    family.push_back(std::move(inst));
  }
  return family;
}

double thm2_default_alpha(int num_demos) {
  if (num_demos < 1) throw std::invalid_argument("thm2_default_alpha: need T >= 1");
  return 1.0 / (2.0 * num_demos);
}

namespace {

double optimal_value(const TabularMdp& mdp) {
  // greedy backward induction over all deterministic policies
  const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
  std::vector<double> value(S, 0.0);
  for (int h = H - 1; h >= 0; --h) {
    std::vector<double> next = value;
    for (int s = 0; s < S; ++s) {
      double best = -1.0;
      for (int a = 0; a < A; ++a) {
        double q = mdp.reward(h, s, a);
        if (h + 1 < H)
          for (int sn = 0; sn < S; ++sn) q += mdp.transition(h, s, a, sn) * next[sn];
        if (q > best) best = q;
      }
      value[s] = best;
    }
  }
  double total = 0.0;
  for (int s = 0; s < S; ++s) total += mdp.init_dist[s] * value[s];
  return total;
}

bool excludes_optimal_arm(const TabularMdp& mdp, const TabularPolicy& policy) {
  // bandit helper: no probability on any maximal-reward arm
  for (int a = 0; a < mdp.num_actions; ++a)
    if (mdp.reward(0, 0, a) == 1.0 && policy.prob(0, 0, a) > 0.0) return false;
  return true;
}

}  // namespace

Prop1FinetuneRecord prop1_finetune_check(const TabularMdp& m1, const TabularMdp& m2,
                                         const TabularPolicy& pretrained, int t_prime,
                                         Rng& rng) {
  if (t_prime < 1) throw std::invalid_argument("prop1_finetune_check: t_prime must be >= 1");
  Prop1FinetuneRecord rec;
  TabularPolicy tuned1 = tabular_finetune(m1, pretrained, t_prime, rng);
  TabularPolicy tuned2 = tabular_finetune(m2, pretrained, t_prime, rng);
  rec.regret_m1 = optimal_value(m1) - evaluate_policy(m1, tuned1);
  rec.regret_m2 = optimal_value(m2) - evaluate_policy(m2, tuned2);
  rec.excludes_optimal_m1 = excludes_optimal_arm(m1, pretrained);
  rec.excludes_optimal_m2 = excludes_optimal_arm(m2, pretrained);
  return rec;
}

Prop1FinetuneRecord prop1_finetune_check(const TabularMdp& m1, const TabularMdp& m2,
                                         const TabularPolicy& demonstrator,
                                         const EstimatorSpec& estimator, int num_demos,
                                         int t_prime, Rng& rng) {
  // m1 and m2 share dynamics, so the demo dataset can be drawn on either
  DemoDataset ds = collect_dataset(m1, demonstrator, num_demos, rng);
  CountTable ct = counts(ds, m1.num_states, m1.num_actions, m1.horizon);
  TabularPolicy pretrained = build_estimator(estimator, ct, demonstrator, num_demos);
  return prop1_finetune_check(m1, m2, pretrained, t_prime, rng);
}

}  // namespace postbc
