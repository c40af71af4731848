#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "postbc/continuous_data.hpp"
#include "postbc/mdp.hpp"
#include "postbc/net.hpp"
#include "postbc/rng.hpp"

namespace postbc {

/// Deterministic state -> action-prediction map; one ensemble member.
class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual Eigen::VectorXd predict(const Eigen::VectorXd& state) const = 0;
  virtual std::vector<double> flat_params() const = 0;
  virtual std::string kind() const = 0;
};

enum class EnsembleNoise {
  kTrajectoryBootstrap,   // resample whole trajectories with replacement
  kStateActionBootstrap,  // resample (s, a) pairs with replacement
  kGaussianNoise,         // perturb actions by N(0, sigma^2 I), optional prior term
};

std::string to_string(EnsembleNoise mode);
EnsembleNoise ensemble_noise_from_string(const std::string& name);

enum class CovNormalization { kSum, kSample };

struct RegressorConfig {
  std::vector<int> hidden = {64, 64};
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  /// Exact per-state least-squares table instead of a network. States are
  /// grouped by exact equality; used for the linear-Gaussian calibration.
  bool tabular = false;
};

struct EnsembleConfig {
  int ensemble_size = 10;  // K
  EnsembleNoise mode = EnsembleNoise::kTrajectoryBootstrap;
  double noise_sigma = 0.1;  // gaussian-noise mode
  /// Weight of the prior-anchoring term ||f(s) - mu_tilde_s||^2 in
  /// gaussian-noise mode; < 0 means "use noise_sigma^2" (the Prop.-4
  /// weighting), 0 disables the term.
  double prior_reg = -1.0;
  RegressorConfig regressor;
};

struct Ensemble {
  std::vector<std::shared_ptr<const Regressor>> members;
  int state_dim = 0;
  int action_dim = 0;
  EnsembleConfig config;
  std::uint64_t seed = 0;
};

/// Trajectory-level bootstrap (whole trajectories, with replacement, to the
/// original count).
ContinuousDemoDataset bootstrap_trajectory(const ContinuousDemoDataset& dataset, Rng& rng);
DemoDataset bootstrap_trajectory(const DemoDataset& dataset, Rng& rng);

/// State-action-level bootstrap: a flat multiset of pairs, cardinality
/// preserved.
std::vector<ContinuousStep> bootstrap_state_action(const ContinuousDemoDataset& dataset,
                                                   Rng& rng);

/// Independent N(0, sigma^2 I) noise on every action; states untouched.
ContinuousDemoDataset perturb_actions(const ContinuousDemoDataset& dataset, double sigma,
                                      Rng& rng);

/// Fits one member on the dataset with the given noise mode, consuming rng.
/// Exposed so tests can drive two members with identical streams.
std::shared_ptr<const Regressor> fit_ensemble_member(const ContinuousDemoDataset& dataset,
                                                     const EnsembleConfig& config, Rng& rng);

/// Algorithm: fit K regressors to independently perturbed/bootstrapped
/// copies of the dataset. Member l uses RNG stream l of `seed`.
Ensemble fit_ensemble(const ContinuousDemoDataset& dataset, const EnsembleConfig& config,
                      std::uint64_t seed, int workers = 1);

/// Ensemble spread at a state: sum_l (f_l - fbar)(f_l - fbar)^T, divided by
/// K-1 in sample mode. Symmetric PSD up to float dust.
Eigen::MatrixXd posterior_cov(const Ensemble& ensemble, CovNormalization normalization,
                              const Eigen::VectorXd& state);

/// State-conditional posterior covariance field backed by an ensemble (or a
/// constant matrix, for the sigma-BC and zero-noise training paths).
class CovField {
 public:
  static CovField from_ensemble(Ensemble ensemble, CovNormalization normalization);
  static CovField constant(int action_dim, const Eigen::MatrixXd& cov);
  static CovField zero(int action_dim);
  static CovField isotropic(int action_dim, double sigma);

  Eigen::MatrixXd cov(const Eigen::VectorXd& state) const;
  Eigen::MatrixXd cov(const std::vector<double>& state) const;
  int action_dim() const { return action_dim_; }
  const Ensemble* ensemble() const { return ensemble_ ? ensemble_.get() : nullptr; }
  CovNormalization normalization() const { return normalization_; }

 private:
  CovField() = default;
  std::shared_ptr<const Ensemble> ensemble_;
  CovNormalization normalization_ = CovNormalization::kSample;
  Eigen::MatrixXd constant_cov_;
  int action_dim_ = 0;
};

/// Flat parameter file with a JSON header line (K, dims, mode, seed) followed
/// by one whitespace-separated parameter line per member.
void save_ensemble(const Ensemble& ensemble, const std::string& path);

}  // namespace postbc
