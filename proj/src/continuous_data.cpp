#include "postbc/continuous_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace postbc {

ActionNormalization ActionNormalization::identity(int action_dim) {
  ActionNormalization n;
  n.mean.assign(action_dim, 0.0);
  n.scale.assign(action_dim, 1.0);
  return n;
}

std::vector<double> ActionNormalization::normalize(const std::vector<double>& a) const {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - mean[i]) / scale[i];
  return out;
}

std::vector<double> ActionNormalization::denormalize(const std::vector<double>& a) const {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * scale[i] + mean[i];
  return out;
}

void ContinuousDemoDataset::validate() const {
  for (const auto& traj : trajectories) {
    if (static_cast<int>(traj.size()) != horizon)
      throw std::invalid_argument("ContinuousDemoDataset: trajectory length != horizon");
    for (const auto& step : traj) {
      if (static_cast<int>(step.state.size()) != state_dim ||
          static_cast<int>(step.action.size()) != action_dim)
        throw std::invalid_argument("ContinuousDemoDataset: step dimension mismatch");
      std::vector<double> na = norm.normalize(step.action);
      for (double v : na)
        if (std::abs(v) > 1.0 + 1e-9)
          throw std::invalid_argument(
              "ContinuousDemoDataset: normalized action outside [-1, 1]");
    }
  }
}

ContinuousDemoDataset ContinuousDemoDataset::normalized_copy() const {
  ContinuousDemoDataset out = *this;
  for (auto& traj : out.trajectories)
    for (auto& step : traj) step.action = norm.normalize(step.action);
  out.norm = ActionNormalization::identity(action_dim);
  return out;
}

ActionNormalization compute_action_normalization(
    const std::vector<ContinuousTrajectory>& trajectories, int action_dim) {
  ActionNormalization n;
  n.mean.assign(action_dim, 0.0);
  n.scale.assign(action_dim, 1.0);
  std::int64_t count = 0;
  for (const auto& traj : trajectories)
    for (const auto& step : traj) {
      for (int i = 0; i < action_dim; ++i) n.mean[i] += step.action[i];
      ++count;
    }
  if (count == 0) return n;
  for (int i = 0; i < action_dim; ++i) n.mean[i] /= static_cast<double>(count);
  std::vector<double> max_dev(action_dim, 0.0);
  for (const auto& traj : trajectories)
    for (const auto& step : traj)
      for (int i = 0; i < action_dim; ++i)
        max_dev[i] = std::max(max_dev[i], std::abs(step.action[i] - n.mean[i]));
  for (int i = 0; i < action_dim; ++i) n.scale[i] = std::max(max_dev[i], 1e-9);
  return n;
}

void save_continuous_jsonl(const ContinuousDemoDataset& dataset,
                           const std::string& jsonl_path, const std::string& meta_path) {
  std::ofstream f(jsonl_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + jsonl_path);
  for (const auto& traj : dataset.trajectories) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& step : traj) {
      nlohmann::json j;
      j["s"] = step.state;
      j["a"] = step.action;
      j["r"] = step.reward;
      steps.push_back(j);
    }
    nlohmann::json line;
    line["steps"] = steps;
    f << line.dump() << '\n';
  }
  nlohmann::json meta;
  meta["seed"] = dataset.source_seed;
  meta["state_dim"] = dataset.state_dim;
  meta["action_dim"] = dataset.action_dim;
  meta["H"] = dataset.horizon;
  meta["T"] = dataset.num_trajectories();
  meta["norm_mean"] = dataset.norm.mean;
  meta["norm_scale"] = dataset.norm.scale;
  std::ofstream mf(meta_path, std::ios::binary);
  if (!mf) throw std::runtime_error("cannot open for write: " + meta_path);
  mf << meta.dump(2) << '\n';
}

ContinuousDemoDataset load_continuous_jsonl(const std::string& jsonl_path,
                                            const std::string& meta_path) {
  std::ifstream mf(meta_path);
  if (!mf) throw std::runtime_error("cannot open: " + meta_path);
  nlohmann::json meta = nlohmann::json::parse(mf);
  ContinuousDemoDataset ds;
  ds.source_seed = meta.at("seed").get<std::uint64_t>();
  ds.state_dim = meta.at("state_dim").get<int>();
  ds.action_dim = meta.at("action_dim").get<int>();
  ds.horizon = meta.at("H").get<int>();
  ds.norm.mean = meta.at("norm_mean").get<std::vector<double>>();
  ds.norm.scale = meta.at("norm_scale").get<std::vector<double>>();

  std::ifstream f(jsonl_path);
  if (!f) throw std::runtime_error("cannot open: " + jsonl_path);
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    ContinuousTrajectory traj;
    for (const auto& sj : j.at("steps")) {
      ContinuousStep step;
      step.state = sj.at("s").get<std::vector<double>>();
      step.action = sj.at("a").get<std::vector<double>>();
      step.reward = sj.at("r").get<double>();
      traj.push_back(std::move(step));
    }
    ds.trajectories.push_back(std::move(traj));
  }
  if (ds.num_trajectories() != meta.at("T").get<int>())
    throw std::runtime_error("continuous dataset/meta mismatch: trajectory count");
  return ds;
}

}  // namespace postbc
