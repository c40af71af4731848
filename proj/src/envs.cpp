#include "postbc/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace postbc {

namespace {

double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

class ForkEnv : public ContinuousEnv {
 public:
  explicit ForkEnv(const ForkEnvConfig& config) : cfg_(config) {}

  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  int horizon() const override { return cfg_.horizon; }

  std::vector<double> initial_state(Rng& rng) const override {
    return {rng.uniform(-cfg_.init_range, cfg_.init_range)};
  }

  std::vector<double> step(const std::vector<double>& state,
                           const std::vector<double>& action) const override {
    double pos = state.at(0);
    double vel = clip(action.at(0), -1.0, 1.0);
    double next = pos + vel;
    // branches are one-way: once beyond a gate, the fork zone is closed off
    if (pos >= cfg_.gate && next < cfg_.gate) next = cfg_.gate;
    if (pos <= -cfg_.gate && next > -cfg_.gate) next = -cfg_.gate;
    next = clip(next, -cfg_.position_bound, cfg_.position_bound);
    return {next};
  }

  bool is_success(const std::vector<double>& state) const override {
    double pos = state.at(0);
    return std::abs(pos - cfg_.goal) < cfg_.tol || std::abs(pos + cfg_.goal) < cfg_.tol;
  }

  const ForkEnvConfig& config() const { return cfg_; }

 private:
  ForkEnvConfig cfg_;
};

class ReacherEnv : public ContinuousEnv {
 public:
  explicit ReacherEnv(const ReacherEnvConfig& config) : cfg_(config) {}

  int state_dim() const override { return 2; }
  int action_dim() const override { return 2; }
  int horizon() const override { return cfg_.horizon; }

  std::vector<double> initial_state(Rng& rng) const override {
    double x = rng.uniform(-cfg_.init_range, cfg_.init_range);
    double y = rng.uniform(-cfg_.init_range, cfg_.init_range);
    return {x, y};
  }

  std::vector<double> step(const std::vector<double>& state,
                           const std::vector<double>& action) const override {
    double vx = action.at(0), vy = action.at(1);
    double n = std::sqrt(vx * vx + vy * vy);
    if (n > 1.0) {
      vx /= n;
      vy /= n;
    }
    double x = clip(state.at(0) + vx, -cfg_.position_bound, cfg_.position_bound);
    double y = clip(state.at(1) + vy, -cfg_.position_bound, cfg_.position_bound);
    return {x, y};
  }

  bool is_success(const std::vector<double>& state) const override {
    double dl = std::hypot(state.at(0) + cfg_.goal_x, state.at(1) - cfg_.goal_y);
    double dr = std::hypot(state.at(0) - cfg_.goal_x, state.at(1) - cfg_.goal_y);
    return std::min(dl, dr) < cfg_.tol;
  }

 private:
  ReacherEnvConfig cfg_;
};

class ScriptedFork : public ContinuousPolicy {
 public:
  ScriptedFork(const ForkEnvConfig& config, double jitter_std)
      : cfg_(config), jitter_(jitter_std) {}

  std::vector<double> sample(const std::vector<double>& state, Rng& rng) const override {
    double pos = state.at(0);
    double a;
    if (std::abs(pos) < cfg_.gate) {
      // undecided: commit to a branch uniformly at random
      a = rng.uniform() < 0.5 ? -1.0 : 1.0;
    } else {
      double goal = pos > 0.0 ? cfg_.goal : -cfg_.goal;
      a = 1.2 * (goal - pos);
    }
    a += rng.normal(0.0, jitter_);
    return {clip(a, -1.0, 1.0)};
  }

 private:
  ForkEnvConfig cfg_;
  double jitter_;
};

class ScriptedReacher : public ContinuousPolicy {
 public:
  ScriptedReacher(const ReacherEnvConfig& config, double jitter_std)
      : cfg_(config), jitter_(jitter_std) {}

  std::vector<double> sample(const std::vector<double>& state, Rng& rng) const override {
    double x = state.at(0), y = state.at(1);
    double dl = std::hypot(x + cfg_.goal_x, y - cfg_.goal_y);
    double dr = std::hypot(x - cfg_.goal_x, y - cfg_.goal_y);
    double gx = dl <= dr ? -cfg_.goal_x : cfg_.goal_x;
    double vx = 1.5 * (gx - x) + rng.normal(0.0, jitter_);
    double vy = 1.5 * (cfg_.goal_y - y) + rng.normal(0.0, jitter_);
    return {vx, vy};  // env clips the norm
  }

 private:
  ReacherEnvConfig cfg_;
  double jitter_;
};

}  // namespace

std::unique_ptr<ContinuousEnv> fork_env(const ForkEnvConfig& config) {
  return std::make_unique<ForkEnv>(config);
}

std::unique_ptr<ContinuousEnv> reacher_env(const ReacherEnvConfig& config) {
  return std::make_unique<ReacherEnv>(config);
}

std::unique_ptr<ContinuousPolicy> scripted_demonstrator(const std::string& env_id,
                                                        const ForkEnvConfig& fork_config,
                                                        const ReacherEnvConfig& reacher_config,
                                                        double jitter_std) {
  if (env_id == "fork") return std::make_unique<ScriptedFork>(fork_config, jitter_std);
  if (env_id == "reacher")
    return std::make_unique<ScriptedReacher>(reacher_config, jitter_std);
  throw std::invalid_argument("scripted_demonstrator: unknown env id " + env_id);
}

std::unique_ptr<ContinuousPolicy> scripted_demonstrator(const std::string& env_id) {
  return scripted_demonstrator(env_id, ForkEnvConfig{}, ReacherEnvConfig{});
}

ContinuousTrajectory rollout_env(const ContinuousEnv& env, const ContinuousPolicy& policy,
                                 Rng& rng) {
  ContinuousTrajectory traj;
  traj.reserve(env.horizon());
  std::vector<double> state = env.initial_state(rng);
  bool succeeded = env.is_success(state);
  for (int h = 0; h < env.horizon(); ++h) {
    ContinuousStep step;
    step.state = state;
    step.action = policy.sample(state, rng);
    std::vector<double> next = env.step(state, step.action);
    if (!succeeded && env.is_success(next)) {
      step.reward = 1.0;
      succeeded = true;
    }
    traj.push_back(std::move(step));
    state = std::move(next);
  }
  return traj;
}

bool trajectory_succeeded(const ContinuousTrajectory& traj) {
  for (const auto& step : traj)
    if (step.reward > 0.0) return true;
  return false;
}

TrajectoryFilter fork_left_branch_filter() {
  return [](const ContinuousTrajectory& traj, Rng&) {
    return trajectory_succeeded(traj) && traj.back().state.at(0) < 0.0;
  };
}

TrajectoryFilter fork_right_branch_filter() {
  return [](const ContinuousTrajectory& traj, Rng&) {
    return trajectory_succeeded(traj) && traj.back().state.at(0) > 0.0;
  };
}

TrajectoryFilter fork_start_zone_filter(TrajectoryFilter base, double gate, bool inside) {
  return [base = std::move(base), gate, inside](const ContinuousTrajectory& traj, Rng& rng) {
    bool starts_inside = std::abs(traj.front().state.at(0)) < gate;
    if (starts_inside != inside) return false;
    return base ? base(traj, rng) : true;
  };
}

TrajectoryFilter reacher_corridor_filter(const ReacherEnvConfig& config, double keep_prob) {
  return [config, keep_prob](const ContinuousTrajectory& traj, Rng& rng) {
    bool hits = false;
    for (const auto& step : traj) {
      double d = std::hypot(step.state.at(0) - config.corridor_x,
                            step.state.at(1) - config.corridor_y);
      if (d < config.corridor_radius) {
        hits = true;
        break;
      }
    }
    if (!hits) return true;
    return rng.uniform() < keep_prob;
  };
}

ContinuousDemoDataset collect_continuous_dataset(const ContinuousEnv& env,
                                                 const ContinuousPolicy& policy, int T,
                                                 const TrajectoryFilter* filter, Rng& rng,
                                                 int rejection_budget) {
  if (T <= 0) throw std::invalid_argument("collect_continuous_dataset: T must be positive");
  ContinuousDemoDataset ds;
  ds.state_dim = env.state_dim();
  ds.action_dim = env.action_dim();
  ds.horizon = env.horizon();
  int attempts = 0;
  while (ds.num_trajectories() < T) {
    if (attempts++ >= rejection_budget)
      throw std::runtime_error(
          "collect_continuous_dataset: rejection budget exhausted before collecting T "
          "trajectories");
    ContinuousTrajectory traj = rollout_env(env, policy, rng);
    if (filter != nullptr && !(*filter)(traj, rng)) continue;
    ds.trajectories.push_back(std::move(traj));
  }
  ds.norm = compute_action_normalization(ds.trajectories, ds.action_dim);
  return ds;
}

}  // namespace postbc
