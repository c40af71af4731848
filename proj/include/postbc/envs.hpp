#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "postbc/continuous_data.hpp"
#include "postbc/rng.hpp"

namespace postbc {

/// Deterministic-dynamics episodic environment with a binary success
/// predicate. Reward is 1 at the first successful step of an episode and 0
/// elsewhere; rollout helpers apply that labeling.
class ContinuousEnv {
 public:
  virtual ~ContinuousEnv() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int horizon() const = 0;
  virtual std::vector<double> initial_state(Rng& rng) const = 0;
  virtual std::vector<double> step(const std::vector<double>& state,
                                   const std::vector<double>& action) const = 0;
  virtual bool is_success(const std::vector<double>& state) const = 0;
};

/// Stochastic state-conditional action sampler (the demonstrator interface).
class ContinuousPolicy {
 public:
  virtual ~ContinuousPolicy() = default;
  virtual std::vector<double> sample(const std::vector<double>& state, Rng& rng) const = 0;
};

/// 1-D fork: position on a line, velocity action in [-1, 1], goals at +-G.
/// Crossing out of the central fork zone (|pos| < gate) into a branch is
/// irreversible, so the episode is decided by the branch committed to first.
struct ForkEnvConfig {
  double goal = 3.0;
  double tol = 0.4;
  int horizon = 8;
  double gate = 0.5;
  double init_range = 2.5;    // initial position ~ U(-init_range, init_range)
  double position_bound = 10.0;
};

std::unique_ptr<ContinuousEnv> fork_env(const ForkEnvConfig& config = ForkEnvConfig{});

/// 2-D reacher: velocity action with norm clipped to 1, goals at (+-2, 2).
struct ReacherEnvConfig {
  double goal_x = 2.0;
  double goal_y = 2.0;
  double tol = 0.3;
  int horizon = 20;
  double init_range = 0.2;
  double position_bound = 5.0;
  // corridor disc on the left-goal path; used to thin demonstrations
  double corridor_x = -1.0;
  double corridor_y = 1.0;
  double corridor_radius = 0.4;
};

std::unique_ptr<ContinuousEnv> reacher_env(const ReacherEnvConfig& config = ReacherEnvConfig{});

/// Scripted demonstrators: fork picks a branch uniformly at random inside
/// the fork zone then runs proportional control with Gaussian jitter toward
/// the committed goal; reacher runs jittered proportional control toward the
/// nearer goal. env_id is "fork" or "reacher".
std::unique_ptr<ContinuousPolicy> scripted_demonstrator(const std::string& env_id,
                                                        const ForkEnvConfig& fork_config,
                                                        const ReacherEnvConfig& reacher_config,
                                                        double jitter_std = 0.05);
std::unique_ptr<ContinuousPolicy> scripted_demonstrator(const std::string& env_id);

/// Episode rollout of length H with first-success reward labeling.
ContinuousTrajectory rollout_env(const ContinuousEnv& env, const ContinuousPolicy& policy,
                                 Rng& rng);

bool trajectory_succeeded(const ContinuousTrajectory& traj);

/// Acceptance predicate for rejection sampling during collection; may
/// consume randomness (probabilistic thinning filters do).
using TrajectoryFilter = std::function<bool(const ContinuousTrajectory&, Rng&)>;

/// Keep trajectories that end in the left (negative-position) branch of the
/// fork, or the right one.
TrajectoryFilter fork_left_branch_filter();
TrajectoryFilter fork_right_branch_filter();
/// Compose: filter and "first state inside/outside the fork zone".
TrajectoryFilter fork_start_zone_filter(TrajectoryFilter base, double gate, bool inside);
/// Reacher corridor thinning: trajectories passing through the corridor disc
/// are kept only with probability keep_prob.
TrajectoryFilter reacher_corridor_filter(const ReacherEnvConfig& config, double keep_prob);

/// T filtered rollouts (rejection sampling when a filter is given). Throws
/// std::runtime_error if the rejection budget is exhausted before T
/// trajectories are accepted.
ContinuousDemoDataset collect_continuous_dataset(const ContinuousEnv& env,
                                                 const ContinuousPolicy& policy, int T,
                                                 const TrajectoryFilter* filter, Rng& rng,
                                                 int rejection_budget = 200000);

}  // namespace postbc
