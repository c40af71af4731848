#include "postbc/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "postbc/parallel.hpp"

namespace postbc {

void LabeledRollouts::validate() const {
  for (const auto& traj : trajectories) {
    if (traj.steps.empty()) throw std::invalid_argument("LabeledRollouts: empty trajectory");
    int done_count = 0;
    for (const auto& step : traj.steps) {
      if (step.reward != 0.0 && step.reward != 1.0)
        throw std::invalid_argument("LabeledRollouts: rewards must be 0 or 1");
      if (step.done) ++done_count;
    }
    if (done_count != 1 || !traj.steps.back().done)
      throw std::invalid_argument("LabeledRollouts: done must be set exactly once, last");
  }
}

LabeledRollouts collect_rollouts(const ContinuousEnv& env, const GenerativePolicy& policy,
                                 int t_on, Rng& rng) {
  GenerativePolicyAdapter adapter(policy);
  return collect_rollouts(env, adapter, t_on, rng);
}

LabeledRollouts collect_rollouts(const ContinuousEnv& env, const ContinuousPolicy& policy,
                                 int t_on, Rng& rng) {
  if (t_on < 1) throw std::invalid_argument("collect_rollouts: t_on must be >= 1");
  LabeledRollouts out;
  out.trajectories.reserve(t_on);
  for (int t = 0; t < t_on; ++t) {
    LabeledTrajectory traj;
    std::vector<double> state = env.initial_state(rng);
    for (int h = 0; h < env.horizon(); ++h) {
      TransitionStep step;
      step.state = state;
      step.action = policy.sample(state, rng);
      step.next_state = env.step(state, step.action);
      bool success = env.is_success(step.next_state);
      step.reward = success ? 1.0 : 0.0;
      bool last = success || h + 1 == env.horizon();
      step.done = last;
      traj.steps.push_back(std::move(step));
      if (last) {
        traj.success = success;
        break;
      }
      state = traj.steps.back().next_state;
    }
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

void save_rollouts_jsonl(const LabeledRollouts& rollouts, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  for (const auto& traj : rollouts.trajectories) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& step : traj.steps) {
      nlohmann::json j;
      j["s"] = step.state;
      j["a"] = step.action;
      j["r"] = step.reward;
      j["s2"] = step.next_state;
      j["done"] = step.done;
      steps.push_back(j);
    }
    nlohmann::json line;
    line["success"] = traj.success;
    line["steps"] = steps;
    f << line.dump() << '\n';
  }
}

double expectile_loss(double residual, double tau) {
  double w = residual < 0.0 ? std::abs(tau - 1.0) : tau;
  return w * residual * residual;
}

void QConfig::validate() const {
  if (!(tau > 0.0) || !(tau < 1.0)) throw std::invalid_argument("QConfig: tau must be in (0,1)");
  if (!(gamma_disc > 0.0) || gamma_disc > 1.0)
    throw std::invalid_argument("QConfig: gamma_disc must be in (0,1]");
  if (steps <= 0 || batch_size <= 0 || !(learning_rate > 0.0))
    throw std::invalid_argument("QConfig: steps, batch_size, learning_rate must be positive");
}

QFunction::QFunction(int state_dim, int action_dim, const QConfig& config, Rng& init_rng)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      tau_(config.tau),
      gamma_disc_(config.gamma_disc),
      in_mean_(state_dim + action_dim, 0.0),
      in_scale_(state_dim + action_dim, 1.0),
      q_net_(MlpSpec{state_dim + action_dim, config.hidden, 1}),
      v_net_(MlpSpec{state_dim, config.hidden, 1}) {
  config.validate();
  q_net_.init_params(init_rng);
  v_net_.init_params(init_rng);
}

void QFunction::set_input_stats(std::vector<double> mean, std::vector<double> scale) {
  if (static_cast<int>(mean.size()) != state_dim_ + action_dim_ ||
      static_cast<int>(scale.size()) != state_dim_ + action_dim_)
    throw std::invalid_argument("set_input_stats: dimension mismatch");
  in_mean_ = std::move(mean);
  in_scale_ = std::move(scale);
}

void QFunction::standardize(const std::vector<double>& state,
                            const std::vector<double>& action,
                            std::vector<double>& out) const {
  out.resize(state_dim_ + action_dim_);
  for (int i = 0; i < state_dim_; ++i) out[i] = (state[i] - in_mean_[i]) / in_scale_[i];
  for (int i = 0; i < action_dim_; ++i) {
    int j = state_dim_ + i;
    out[j] = (action[i] - in_mean_[j]) / in_scale_[j];
  }
}

double QFunction::q_value(const std::vector<double>& state,
                          const std::vector<double>& action) const {
  std::vector<double> input;
  standardize(state, action, input);
  double out = 0.0;
  MlpScratch scratch = q_net_.make_scratch();
  q_net_.forward(input.data(), &out, scratch);
  return out;
}

double QFunction::v_value(const std::vector<double>& state) const {
  std::vector<double> input(state_dim_);
  for (int i = 0; i < state_dim_; ++i) input[i] = (state[i] - in_mean_[i]) / in_scale_[i];
  double out = 0.0;
  MlpScratch scratch = v_net_.make_scratch();
  v_net_.forward(input.data(), &out, scratch);
  return out;
}

QFunction fit_expectile_q(const LabeledRollouts& rollouts, const QConfig& config, Rng& rng) {
  config.validate();
  if (rollouts.trajectories.empty())
    throw std::invalid_argument("fit_expectile_q: empty rollouts");

  // flatten transitions
  std::vector<const TransitionStep*> steps;
  for (const auto& traj : rollouts.trajectories)
    for (const auto& step : traj.steps) steps.push_back(&step);
  const int n = static_cast<int>(steps.size());
  const int state_dim = static_cast<int>(steps.front()->state.size());
  const int action_dim = static_cast<int>(steps.front()->action.size());

  QFunction qf(state_dim, action_dim, config, rng);
  {
    // standardize inputs with buffer statistics
    std::vector<double> mean(state_dim + action_dim, 0.0);
    std::vector<double> scale(state_dim + action_dim, 0.0);
    for (const TransitionStep* tr : steps) {
      for (int i = 0; i < state_dim; ++i) mean[i] += tr->state[i];
      for (int i = 0; i < action_dim; ++i) mean[state_dim + i] += tr->action[i];
    }
    for (double& m : mean) m /= n;
    for (const TransitionStep* tr : steps) {
      for (int i = 0; i < state_dim; ++i)
        scale[i] += (tr->state[i] - mean[i]) * (tr->state[i] - mean[i]);
      for (int i = 0; i < action_dim; ++i)
        scale[state_dim + i] += (tr->action[i] - mean[state_dim + i]) *
                                (tr->action[i] - mean[state_dim + i]);
    }
    for (double& s : scale) s = std::max(1e-6, std::sqrt(s / n));
    qf.set_input_stats(std::move(mean), std::move(scale));
  }

  Mlp& q_net = qf.q_net();
  Mlp& v_net = qf.v_net();
  std::vector<double> q_grad(q_net.num_params()), v_grad(v_net.num_params());
  AdamState q_adam, v_adam;
  MlpScratch q_scratch = q_net.make_scratch();
  MlpScratch v_scratch = v_net.make_scratch();
  MlpScratch v_next_scratch = v_net.make_scratch();
  std::vector<double> qa_input, v_input(state_dim), v_next_input(state_dim);
  const int batch = std::min(config.batch_size, n);

  for (int step = 0; step < config.steps; ++step) {
    std::fill(q_grad.begin(), q_grad.end(), 0.0);
    std::fill(v_grad.begin(), v_grad.end(), 0.0);
    for (int b = 0; b < batch; ++b) {
      const TransitionStep& tr = *steps[rng.uniform_int(n)];
      qf.standardize(tr.state, tr.action, qa_input);
      std::copy(qa_input.begin(), qa_input.begin() + state_dim, v_input.begin());

      // V step: expectile regression of V(s) toward Q(s,a), Q held fixed
      double q_sa = 0.0;
      q_net.forward(qa_input.data(), &q_sa, q_scratch);
      double v_s = 0.0;
      v_net.forward(v_input.data(), &v_s, v_scratch);
      double u = q_sa - v_s;  // d expectile / d v = -2 w u
      double w = u < 0.0 ? 1.0 - config.tau : config.tau;
      double dv = -2.0 * w * u / batch;
      v_net.backward(&dv, v_grad.data(), nullptr, v_scratch);

      // Q step: one-step TD target with V(s'), V held fixed. Success ends
      // the episode for real; a horizon truncation bootstraps through V so
      // ordinary states are not pinned to zero value.
      bool terminal = tr.done && tr.reward > 0.0;
      double target = tr.reward;
      if (!terminal) {
        qf.standardize(tr.next_state, tr.action, qa_input);
        std::copy(qa_input.begin(), qa_input.begin() + state_dim, v_next_input.begin());
        double v_next = 0.0;
        v_net.forward(v_next_input.data(), &v_next, v_next_scratch);
        target += config.gamma_disc * v_next;
      }
      double dq = 2.0 * (q_sa - target) / batch;
      q_net.backward(&dq, q_grad.data(), nullptr, q_scratch);
    }
    adam_step(v_net.params(), v_grad, v_adam, config.learning_rate);
    adam_step(q_net.params(), q_grad, q_adam, config.learning_rate);
  }
  return qf;
}

std::vector<double> best_of_n_act(const GenerativePolicy& policy, const ActionScorer& scorer,
                                  const std::vector<double>& state, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("best_of_n_act: n must be >= 1");
  std::vector<double> best;
  double best_score = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> action = policy.sample_action(state, rng);
    double score = scorer(state, action);
    if (i == 0 || score > best_score) {
      best = std::move(action);
      best_score = score;
    }
  }
  return best;
}

std::vector<double> best_of_n_act(const GenerativePolicy& policy, const QFunction& q,
                                  const std::vector<double>& state, int n, Rng& rng) {
  return best_of_n_act(
      policy,
      [&q](const std::vector<double>& s, const std::vector<double>& a) {
        return q.q_value(s, a);
      },
      state, n, rng);
}

double evaluate_bon(const ContinuousEnv& env, const GenerativePolicy& policy,
                    const ActionScorer* scorer, int n, int episodes, std::uint64_t seed,
                    int workers) {
  if (episodes < 1) throw std::invalid_argument("evaluate_bon: episodes must be >= 1");
  std::vector<int> successes(episodes, 0);
  parallel_for(episodes, workers, [&](std::int64_t e) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(e));
    std::vector<double> state = env.initial_state(rng);
    bool success = false;
    for (int h = 0; h < env.horizon() && !success; ++h) {
      std::vector<double> action = scorer != nullptr && n > 1
                                       ? best_of_n_act(policy, *scorer, state, n, rng)
                                       : policy.sample_action(state, rng);
      state = env.step(state, action);
      success = env.is_success(state);
    }
    successes[e] = success ? 1 : 0;
  });
  double total = 0.0;
  for (int s : successes) total += s;
  return total / episodes;
}

double evaluate_bon(const ContinuousEnv& env, const GenerativePolicy& policy,
                    const QFunction* q, int n, int episodes, std::uint64_t seed,
                    int workers) {
  if (q == nullptr) return evaluate_bon(env, policy, static_cast<const ActionScorer*>(nullptr),
                                        n, episodes, seed, workers);
  ActionScorer scorer = [q](const std::vector<double>& s, const std::vector<double>& a) {
    return q->q_value(s, a);
  };
  return evaluate_bon(env, policy, &scorer, n, episodes, seed, workers);
}

double evaluate_policy_success(const ContinuousEnv& env, const ContinuousPolicy& policy,
                               int episodes, std::uint64_t seed, int workers) {
  if (episodes < 1)
    throw std::invalid_argument("evaluate_policy_success: episodes must be >= 1");
  std::vector<int> successes(episodes, 0);
  parallel_for(episodes, workers, [&](std::int64_t e) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(e));
    successes[e] = trajectory_succeeded(rollout_env(env, policy, rng)) ? 1 : 0;
  });
  double total = 0.0;
  for (int s : successes) total += s;
  return total / episodes;
}

TabularPolicy tabular_finetune(const TabularMdp& mdp, const TabularPolicy& pretrained,
                               int t_prime, Rng& rng) {
  if (t_prime < 1) throw std::invalid_argument("tabular_finetune: t_prime must be >= 1");
  const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
  std::vector<double> return_sum(static_cast<std::size_t>(H) * S * A, 0.0);
  std::vector<std::int64_t> visits(static_cast<std::size_t>(H) * S * A, 0);
  for (int t = 0; t < t_prime; ++t) {
    Trajectory traj = rollout(mdp, pretrained, rng);
    double tail = 0.0;
    for (int h = H - 1; h >= 0; --h) {
      tail += traj[h].reward;
      std::size_t idx = (static_cast<std::size_t>(h) * S + traj[h].state) * A + traj[h].action;
      return_sum[idx] += tail;
      visits[idx] += 1;
    }
  }

  TabularPolicy tuned = pretrained;
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s) {
      int best_action = -1;
      double best_value = 0.0;
      for (int a = 0; a < A; ++a) {
        std::size_t idx = (static_cast<std::size_t>(h) * S + s) * A + a;
        if (visits[idx] == 0) continue;
        double value = return_sum[idx] / static_cast<double>(visits[idx]);
        if (best_action < 0 || value > best_value) {
          best_action = a;
          best_value = value;
        }
      }
      if (best_action < 0) continue;  // state never visited: keep pretrained row
      double* row = tuned.row(h, s);
      std::fill(row, row + A, 0.0);
      row[best_action] = 1.0;
    }
  return tuned;
}

}  // namespace postbc
