#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace postbc {

struct ContinuousStep {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
};

using ContinuousTrajectory = std::vector<ContinuousStep>;

/// Per-dimension affine action normalization: normalized = (a - mean)/scale.
struct ActionNormalization {
  std::vector<double> mean;
  std::vector<double> scale;

  static ActionNormalization identity(int action_dim);
  std::vector<double> normalize(const std::vector<double>& a) const;
  std::vector<double> denormalize(const std::vector<double>& a) const;
};

/// Fixed-length continuous trajectories plus the action normalization
/// statistics computed at collection time. Normalized actions always lie in
/// [-1, 1]^{d_a}.
struct ContinuousDemoDataset {
  std::vector<ContinuousTrajectory> trajectories;
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 0;
  ActionNormalization norm;
  std::uint64_t source_seed = 0;

  int num_trajectories() const { return static_cast<int>(trajectories.size()); }
  int num_pairs() const { return num_trajectories() * horizon; }

  const ContinuousStep& pair(int flat_index) const {
    return trajectories[flat_index / horizon][flat_index % horizon];
  }

  void validate() const;

  /// Copy with actions replaced by their normalized values and identity
  /// statistics; used to fit covariance ensembles in normalized action space.
  ContinuousDemoDataset normalized_copy() const;
};

/// mean = per-dim average, scale = max absolute deviation (floored at 1e-9)
/// so that normalized actions lie in [-1, 1].
ActionNormalization compute_action_normalization(
    const std::vector<ContinuousTrajectory>& trajectories, int action_dim);

/// JSON-lines, one {"steps":[{"s":[...],"a":[...],"r":x},...]} per line,
/// with a sidecar metadata object (seed, dims, H, T, normalization).
void save_continuous_jsonl(const ContinuousDemoDataset& dataset,
                           const std::string& jsonl_path, const std::string& meta_path);
ContinuousDemoDataset load_continuous_jsonl(const std::string& jsonl_path,
                                            const std::string& meta_path);

}  // namespace postbc
