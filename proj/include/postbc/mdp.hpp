#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "postbc/rng.hpp"

namespace postbc {

/// Finite episodic MDP with deterministic rewards in [0, 1].
/// transitions are indexed [h][s][a][s'], rewards [h][s][a].
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  std::vector<double> transitions;  // horizon * S * A * S
  std::vector<double> init_dist;    // S
  std::vector<double> rewards;      // horizon * S * A

  static TabularMdp zeros(int num_states, int num_actions, int horizon);

  double transition(int h, int s, int a, int s_next) const {
    return transitions[((static_cast<std::size_t>(h) * num_states + s) * num_actions + a) *
                           num_states +
                       s_next];
  }
  double& transition(int h, int s, int a, int s_next) {
    return transitions[((static_cast<std::size_t>(h) * num_states + s) * num_actions + a) *
                           num_states +
                       s_next];
  }
  double reward(int h, int s, int a) const {
    return rewards[(static_cast<std::size_t>(h) * num_states + s) * num_actions + a];
  }
  double& reward(int h, int s, int a) {
    return rewards[(static_cast<std::size_t>(h) * num_states + s) * num_actions + a];
  }

  /// Throws std::invalid_argument if any probability row fails to normalize
  /// within 1e-12, has negative entries, or a reward lies outside [0, 1].
  void validate() const;
};

/// Time-indexed stochastic policy pi_h(a|s), probs indexed [h][s][a].
struct TabularPolicy {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  std::vector<double> probs;  // horizon * S * A

  static TabularPolicy uniform(int num_states, int num_actions, int horizon);

  double prob(int h, int s, int a) const {
    return probs[(static_cast<std::size_t>(h) * num_states + s) * num_actions + a];
  }
  double& prob(int h, int s, int a) {
    return probs[(static_cast<std::size_t>(h) * num_states + s) * num_actions + a];
  }
  const double* row(int h, int s) const {
    return probs.data() + (static_cast<std::size_t>(h) * num_states + s) * num_actions;
  }
  double* row(int h, int s) {
    return probs.data() + (static_cast<std::size_t>(h) * num_states + s) * num_actions;
  }

  void validate() const;
};

struct Step {
  int state = 0;
  int action = 0;
  double reward = 0.0;
};

/// One episode, always exactly horizon steps long.
using Trajectory = std::vector<Step>;

struct DemoDataset {
  std::vector<Trajectory> trajectories;
  std::uint64_t source_seed = 0;

  int num_trajectories() const { return static_cast<int>(trajectories.size()); }
};

/// Visit counts T_h(s) and T_h(s,a) extracted from a demo dataset.
struct CountTable {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  std::vector<std::int64_t> state_counts;         // horizon * S
  std::vector<std::int64_t> state_action_counts;  // horizon * S * A

  std::int64_t state_count(int h, int s) const {
    return state_counts[static_cast<std::size_t>(h) * num_states + s];
  }
  std::int64_t state_action_count(int h, int s, int a) const {
    return state_action_counts[(static_cast<std::size_t>(h) * num_states + s) * num_actions +
                               a];
  }

  void validate(int num_trajectories) const;
};

/// Exact expected return J(pi) by backward induction. Value is in [0, H].
double evaluate_policy(const TabularMdp& mdp, const TabularPolicy& policy);

/// Occupancy measure w_h(s,a) = P[s_h = s, a_h = a], indexed [h][s][a];
/// each w_h sums to 1 over (s,a).
std::vector<double> occupancy(const TabularMdp& mdp, const TabularPolicy& policy);

Trajectory rollout(const TabularMdp& mdp, const TabularPolicy& policy, Rng& rng);

/// T independent rollouts. T = 0 is rejected.
DemoDataset collect_dataset(const TabularMdp& mdp, const TabularPolicy& policy, int T,
                            Rng& rng);

CountTable counts(const DemoDataset& dataset, int num_states, int num_actions, int horizon);

/// JSON-lines serialization: one {"steps":[[s,a,r],...]} object per line,
/// plus a sidecar metadata file {"seed":...,"S":...,"A":...,"H":...,"T":...}.
void save_dataset_jsonl(const DemoDataset& dataset, int num_states, int num_actions,
                        int horizon, const std::string& jsonl_path,
                        const std::string& meta_path);
DemoDataset load_dataset_jsonl(const std::string& jsonl_path, const std::string& meta_path,
                               int* num_states = nullptr, int* num_actions = nullptr,
                               int* horizon = nullptr);

}  // namespace postbc
