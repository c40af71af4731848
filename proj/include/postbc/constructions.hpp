#pragma once

#include <vector>

#include "postbc/estimators.hpp"
#include "postbc/mdp.hpp"

namespace postbc {

/// Two 3-armed bandits distinguished only by which rare arm pays, plus the
/// demonstrator (1-4e, 2e, 2e). J(demonstrator) = 2e on both instances;
/// the optimal value is 1 on each.
struct Prop1Instances {
  TabularMdp m1;  // rewards (0, 1, 0)
  TabularMdp m2;  // rewards (0, 0, 1)
  TabularPolicy demonstrator;
};

Prop1Instances prop1_bandits(double epsilon);

/// Chain MDP with k = S-2 absorbing branch states, the commit state s1 and
/// the sink s2. Initial mass on the branch states halves geometrically;
/// the first branch state absorbs the normalization correction so that the
/// initial distribution sums to exactly 1.
/// State layout: indices 0..k-1 are the branch states (paper's s~_1..s~_k,
/// in order), index k is s1, index k+1 is s2.
struct Prop2Instance {
  TabularMdp mdp;
  TabularPolicy demonstrator;
  int rare_state = 0;  // index of s~_{i_T}: largest 2^{-i-1} <= 1/T
};

Prop2Instance prop2_chain(int num_demos, int horizon, int num_states, double delta);

/// Index (into the state layout above) of the rare branch state selected for
/// T demos: the largest nominal mass 2^{-i-1} that is <= 1/T.
int prop2_rare_state_index(int num_demos, int num_states);

/// delta = 2 * (H^2 S ln(T) / T + xi), the proof's default choice.
double prop2_default_delta(int num_demos, int horizon, int num_states, double xi = 0.0);

/// A-armed bandit family: arm 1 pays 1, all others pay 0. Demonstrator i
/// plays arm 1 with probability 1-alpha_rare and arm i with alpha_rare
/// (demonstrator 1 is deterministic on arm 1).
struct Thm2Instance {
  TabularMdp mdp;
  TabularPolicy demonstrator;
};

std::vector<Thm2Instance> thm2_family(int num_actions, double alpha_rare);

/// The theorem's rare-arm mass, alpha = 1/(2T).
double thm2_default_alpha(int num_demos);

/// One repetition of the Prop.-1 finetuning check: roll the pretrained
/// policy out t_prime times on each instance, run the tabular finetuner,
/// and report per-instance regret (optimal value minus finetuned value)
/// along with whether the pretrained support already excluded the optimal
/// arm.
struct Prop1FinetuneRecord {
  double regret_m1 = 0.0;
  double regret_m2 = 0.0;
  bool excludes_optimal_m1 = false;
  bool excludes_optimal_m2 = false;
};

Prop1FinetuneRecord prop1_finetune_check(const TabularMdp& m1, const TabularMdp& m2,
                                         const TabularPolicy& pretrained, int t_prime,
                                         Rng& rng);

/// Dataset-driven variant: draws num_demos demonstrator trajectories, fits
/// the given estimator, then runs the check above on the fitted policy.
Prop1FinetuneRecord prop1_finetune_check(const TabularMdp& m1, const TabularMdp& m2,
                                         const TabularPolicy& demonstrator,
                                         const EstimatorSpec& estimator, int num_demos,
                                         int t_prime, Rng& rng);

}  // namespace postbc
