#include "postbc/mdp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace postbc {

namespace {

constexpr double kProbTol = 1e-12;

void check_prob_row(const double* row, int n, const char* what) {
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (row[i] < 0.0)
      throw std::invalid_argument(std::string(what) + ": negative probability entry");
    sum += row[i];
  }
  if (std::abs(sum - 1.0) > kProbTol)
    throw std::invalid_argument(std::string(what) + ": probabilities sum to " +
                                std::to_string(sum) + ", expected 1");
}

void check_dims(const TabularMdp& mdp, const TabularPolicy& policy) {
  if (mdp.num_states != policy.num_states || mdp.num_actions != policy.num_actions ||
      mdp.horizon != policy.horizon)
    throw std::invalid_argument("policy dimensions do not match MDP (S,A,H)=(" +
                                std::to_string(mdp.num_states) + "," +
                                std::to_string(mdp.num_actions) + "," +
                                std::to_string(mdp.horizon) + ")");
}

}  // namespace

TabularMdp TabularMdp::zeros(int num_states, int num_actions, int horizon) {
  if (num_states <= 0 || num_actions <= 0 || horizon <= 0)
    throw std::invalid_argument("TabularMdp: S, A, H must be positive");
  TabularMdp mdp;
  mdp.num_states = num_states;
  mdp.num_actions = num_actions;
  mdp.horizon = horizon;
  mdp.transitions.assign(
      static_cast<std::size_t>(horizon) * num_states * num_actions * num_states, 0.0);
  mdp.init_dist.assign(num_states, 0.0);
  mdp.rewards.assign(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0);
  return mdp;
}

void TabularMdp::validate() const {
  check_prob_row(init_dist.data(), num_states, "init_dist");
  for (int h = 0; h < horizon; ++h)
    for (int s = 0; s < num_states; ++s)
      for (int a = 0; a < num_actions; ++a) {
        const double* row =
            transitions.data() +
            ((static_cast<std::size_t>(h) * num_states + s) * num_actions + a) * num_states;
        check_prob_row(row, num_states, "transitions");
        double r = reward(h, s, a);
        if (r < 0.0 || r > 1.0)
          throw std::invalid_argument("reward outside [0,1] at (h,s,a)=(" +
                                      std::to_string(h) + "," + std::to_string(s) + "," +
                                      std::to_string(a) + ")");
      }
}

TabularPolicy TabularPolicy::uniform(int num_states, int num_actions, int horizon) {
  TabularPolicy pi;
  pi.num_states = num_states;
  pi.num_actions = num_actions;
  pi.horizon = horizon;
  pi.probs.assign(static_cast<std::size_t>(horizon) * num_states * num_actions,
                  1.0 / num_actions);
  return pi;
}

void TabularPolicy::validate() const {
  for (int h = 0; h < horizon; ++h)
    for (int s = 0; s < num_states; ++s) check_prob_row(row(h, s), num_actions, "policy row");
}

void CountTable::validate(int num_trajectories) const {
  for (int h = 0; h < horizon; ++h) {
    std::int64_t total = 0;
    for (int s = 0; s < num_states; ++s) {
      std::int64_t row_sum = 0;
      for (int a = 0; a < num_actions; ++a) row_sum += state_action_count(h, s, a);
      if (row_sum != state_count(h, s))
        throw std::logic_error("CountTable: sum_a T_h(s,a) != T_h(s)");
      total += state_count(h, s);
    }
    if (total != num_trajectories)
      throw std::logic_error("CountTable: sum_s T_h(s) != number of trajectories");
  }
}

double evaluate_policy(const TabularMdp& mdp, const TabularPolicy& policy) {
  check_dims(mdp, policy);
  const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
  std::vector<double> value(S, 0.0), next_value(S, 0.0);
  for (int h = H - 1; h >= 0; --h) {
    next_value = value;
    for (int s = 0; s < S; ++s) {
      double v = 0.0;
      for (int a = 0; a < A; ++a) {
        double p = policy.prob(h, s, a);
        if (p == 0.0) continue;
        double q = mdp.reward(h, s, a);
        if (h + 1 < H) {
          for (int sn = 0; sn < S; ++sn) q += mdp.transition(h, s, a, sn) * next_value[sn];
        }
        v += p * q;
      }
      value[s] = v;
    }
  }
  double total = 0.0;
  for (int s = 0; s < S; ++s) total += mdp.init_dist[s] * value[s];
  return total;
}

std::vector<double> occupancy(const TabularMdp& mdp, const TabularPolicy& policy) {
  check_dims(mdp, policy);
  const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
  std::vector<double> w(static_cast<std::size_t>(H) * S * A, 0.0);
  std::vector<double> state_occ(mdp.init_dist);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        w[(static_cast<std::size_t>(h) * S + s) * A + a] = state_occ[s] * policy.prob(h, s, a);
    if (h + 1 < H) {
      std::vector<double> next_occ(S, 0.0);
      for (int s = 0; s < S; ++s) {
        if (state_occ[s] == 0.0) continue;
        for (int a = 0; a < A; ++a) {
          double mass = state_occ[s] * policy.prob(h, s, a);
          if (mass == 0.0) continue;
          for (int sn = 0; sn < S; ++sn) next_occ[sn] += mass * mdp.transition(h, s, a, sn);
        }
      }
      state_occ = std::move(next_occ);
    }
  }
  return w;
}

Trajectory rollout(const TabularMdp& mdp, const TabularPolicy& policy, Rng& rng) {
  check_dims(mdp, policy);
  const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
  Trajectory traj;
  traj.reserve(H);
  int s = rng.categorical(mdp.init_dist.data(), S);
  for (int h = 0; h < H; ++h) {
    int a = rng.categorical(policy.row(h, s), A);
    double r = mdp.reward(h, s, a);
    traj.push_back(Step{s, a, r});
    if (h + 1 < H) {
      const double* row =
          mdp.transitions.data() +
          ((static_cast<std::size_t>(h) * S + s) * A + a) * S;
      s = rng.categorical(row, S);
    }
  }
  return traj;
}

DemoDataset collect_dataset(const TabularMdp& mdp, const TabularPolicy& policy, int T,
                            Rng& rng) {
  if (T <= 0) throw std::invalid_argument("collect_dataset: T must be positive");
  DemoDataset ds;
  ds.trajectories.reserve(T);
  for (int t = 0; t < T; ++t) ds.trajectories.push_back(rollout(mdp, policy, rng));
  return ds;
}

CountTable counts(const DemoDataset& dataset, int num_states, int num_actions, int horizon) {
  CountTable ct;
  ct.num_states = num_states;
  ct.num_actions = num_actions;
  ct.horizon = horizon;
  ct.state_counts.assign(static_cast<std::size_t>(horizon) * num_states, 0);
  ct.state_action_counts.assign(
      static_cast<std::size_t>(horizon) * num_states * num_actions, 0);
  for (const auto& traj : dataset.trajectories) {
    if (static_cast<int>(traj.size()) != horizon)
      throw std::invalid_argument("counts: trajectory length does not match horizon");
    for (int h = 0; h < horizon; ++h) {
      const Step& st = traj[h];
      if (st.state < 0 || st.state >= num_states)
        throw std::out_of_range("counts: state index out of range");
      if (st.action < 0 || st.action >= num_actions)
        throw std::out_of_range("counts: action index out of range");
      ct.state_counts[static_cast<std::size_t>(h) * num_states + st.state] += 1;
      ct.state_action_counts[(static_cast<std::size_t>(h) * num_states + st.state) *
                                 num_actions +
                             st.action] += 1;
    }
  }
  return ct;
}

void save_dataset_jsonl(const DemoDataset& dataset, int num_states, int num_actions,
                        int horizon, const std::string& jsonl_path,
                        const std::string& meta_path) {
  std::ofstream f(jsonl_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + jsonl_path);
  for (const auto& traj : dataset.trajectories) {
    nlohmann::json steps = nlohmann::json::array();
    for (const Step& st : traj)
      steps.push_back(nlohmann::json::array({st.state, st.action, st.reward}));
    nlohmann::json line;
    line["steps"] = steps;
    f << line.dump() << '\n';
  }
  nlohmann::json meta;
  meta["seed"] = dataset.source_seed;
  meta["S"] = num_states;
  meta["A"] = num_actions;
  meta["H"] = horizon;
  meta["T"] = dataset.num_trajectories();
  std::ofstream mf(meta_path, std::ios::binary);
  if (!mf) throw std::runtime_error("cannot open for write: " + meta_path);
  mf << meta.dump(2) << '\n';
}

DemoDataset load_dataset_jsonl(const std::string& jsonl_path, const std::string& meta_path,
                               int* num_states, int* num_actions, int* horizon) {
  std::ifstream mf(meta_path);
  if (!mf) throw std::runtime_error("cannot open: " + meta_path);
  nlohmann::json meta = nlohmann::json::parse(mf);
  DemoDataset ds;
  ds.source_seed = meta.at("seed").get<std::uint64_t>();
  if (num_states) *num_states = meta.at("S").get<int>();
  if (num_actions) *num_actions = meta.at("A").get<int>();
  if (horizon) *horizon = meta.at("H").get<int>();

  std::ifstream f(jsonl_path);
  if (!f) throw std::runtime_error("cannot open: " + jsonl_path);
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Trajectory traj;
    for (const auto& st : j.at("steps"))
      traj.push_back(Step{st.at(0).get<int>(), st.at(1).get<int>(), st.at(2).get<double>()});
    ds.trajectories.push_back(std::move(traj));
  }
  if (ds.num_trajectories() != meta.at("T").get<int>())
    throw std::runtime_error("dataset/meta mismatch: trajectory count");
  return ds;
}

}  // namespace postbc
