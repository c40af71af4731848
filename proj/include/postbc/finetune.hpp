#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "postbc/diffusion.hpp"
#include "postbc/envs.hpp"
#include "postbc/mdp.hpp"
#include "postbc/net.hpp"
#include "postbc/rng.hpp"

namespace postbc {

struct TransitionStep {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
};

struct LabeledTrajectory {
  std::vector<TransitionStep> steps;
  bool success = false;
};

/// Rollouts of the pretrained policy labeled with binary success. Episodes
/// stop at the first success or at the horizon; rewards are 0/1 and done is
/// set exactly once, on the final recorded step.
struct LabeledRollouts {
  std::vector<LabeledTrajectory> trajectories;
  std::uint64_t seed = 0;

  int num_trajectories() const { return static_cast<int>(trajectories.size()); }
  void validate() const;
};

LabeledRollouts collect_rollouts(const ContinuousEnv& env, const ContinuousPolicy& policy,
                                 int t_on, Rng& rng);
LabeledRollouts collect_rollouts(const ContinuousEnv& env, const GenerativePolicy& policy,
                                 int t_on, Rng& rng);

/// Exposes a trained generative policy through the demonstrator interface.
class GenerativePolicyAdapter : public ContinuousPolicy {
 public:
  explicit GenerativePolicyAdapter(const GenerativePolicy& policy) : policy_(&policy) {}
  std::vector<double> sample(const std::vector<double>& state, Rng& rng) const override {
    return policy_->sample_action(state, rng);
  }

 private:
  const GenerativePolicy* policy_;
};

void save_rollouts_jsonl(const LabeledRollouts& rollouts, const std::string& path);

/// Asymmetric squared error |tau - I{u < 0}| * u^2; tau = 1/2 recovers
/// half the symmetric squared error.
double expectile_loss(double residual, double tau);

struct QConfig {
  std::vector<int> hidden = {64, 64};
  int steps = 4000;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double tau = 0.7;
  double gamma_disc = 0.99;

  void validate() const;
};

/// Q(s,a) network plus the expectile value network V(s) fitted against it.
/// Inputs are standardized with statistics taken from the training rollouts.
class QFunction {
 public:
  QFunction() = default;
  QFunction(int state_dim, int action_dim, const QConfig& config, Rng& init_rng);

  double q_value(const std::vector<double>& state, const std::vector<double>& action) const;
  double v_value(const std::vector<double>& state) const;
  double tau() const { return tau_; }
  double gamma_disc() const { return gamma_disc_; }

  Mlp& q_net() { return q_net_; }
  Mlp& v_net() { return v_net_; }
  void set_input_stats(std::vector<double> mean, std::vector<double> scale);
  void standardize(const std::vector<double>& state, const std::vector<double>& action,
                   std::vector<double>& out) const;  // out: state then action features

 private:
  int state_dim_ = 0;
  int action_dim_ = 0;
  double tau_ = 0.7;
  double gamma_disc_ = 0.99;
  std::vector<double> in_mean_, in_scale_;  // state_dim + action_dim entries
  Mlp q_net_, v_net_;
};

/// Expectile-regression Q iteration: V minimizes the tau-expectile loss of
/// Q(s,a) - V(s); Q regresses on one-step targets r + gamma (1-done) V(s').
QFunction fit_expectile_q(const LabeledRollouts& rollouts, const QConfig& config, Rng& rng);

/// Generic scorer form of Best-of-N (used with oracle scorers in tests):
/// samples N actions from the policy, returns the best-scoring one; ties
/// resolve to the lowest sample index.
using ActionScorer =
    std::function<double(const std::vector<double>&, const std::vector<double>&)>;
std::vector<double> best_of_n_act(const GenerativePolicy& policy, const ActionScorer& scorer,
                                  const std::vector<double>& state, int n, Rng& rng);
std::vector<double> best_of_n_act(const GenerativePolicy& policy, const QFunction& q,
                                  const std::vector<double>& state, int n, Rng& rng);

/// Mean success over episodes of the policy filtered through Best-of-N
/// (plain policy evaluation when the scorer is null or n = 1). Episode e
/// uses RNG stream e, so the estimate is identical for any worker count.
double evaluate_bon(const ContinuousEnv& env, const GenerativePolicy& policy,
                    const ActionScorer* scorer, int n, int episodes, std::uint64_t seed,
                    int workers = 1);
double evaluate_bon(const ContinuousEnv& env, const GenerativePolicy& policy,
                    const QFunction* q, int n, int episodes, std::uint64_t seed,
                    int workers = 1);

/// Plain success rate of any demonstrator-interface policy.
double evaluate_policy_success(const ContinuousEnv& env, const ContinuousPolicy& policy,
                               int episodes, std::uint64_t seed, int workers = 1);

/// Rollout-based tabular finetuner for the Prop.-1 impossibility check:
/// rolls the pretrained policy out t_prime episodes and returns the greedy
/// policy with respect to empirical mean returns-to-go, keeping the
/// pretrained row wherever a state was never visited.
TabularPolicy tabular_finetune(const TabularMdp& mdp, const TabularPolicy& pretrained,
                               int t_prime, Rng& rng);

}  // namespace postbc
