#include "postbc/ensemble.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "postbc/parallel.hpp"

namespace postbc {

namespace {

struct WeightedPair {
  std::vector<double> state;
  std::vector<double> target;
  double weight = 1.0;
};

/// Exact weighted per-state least-squares table. Grouping is by exact state
/// equality (the calibration fixtures use a finite set of state vectors).
class TabularMeanRegressor : public Regressor {
 public:
  TabularMeanRegressor(const std::vector<WeightedPair>& pairs, int action_dim) {
    Eigen::VectorXd global = Eigen::VectorXd::Zero(action_dim);
    double global_weight = 0.0;
    std::map<std::vector<double>, std::pair<Eigen::VectorXd, double>> acc;
    for (const auto& p : pairs) {
      auto it = acc.find(p.state);
      if (it == acc.end())
        it = acc.emplace(p.state,
                         std::make_pair(Eigen::VectorXd::Zero(action_dim).eval(), 0.0))
                 .first;
      for (int i = 0; i < action_dim; ++i) it->second.first[i] += p.weight * p.target[i];
      it->second.second += p.weight;
      for (int i = 0; i < action_dim; ++i) global[i] += p.weight * p.target[i];
      global_weight += p.weight;
    }
    for (auto& [state, sums] : acc) table_[state] = sums.first / sums.second;
    fallback_ = global_weight > 0.0 ? (global / global_weight).eval()
                                    : Eigen::VectorXd::Zero(action_dim).eval();
  }

  Eigen::VectorXd predict(const Eigen::VectorXd& state) const override {
    std::vector<double> key(state.data(), state.data() + state.size());
    auto it = table_.find(key);
    return it != table_.end() ? it->second : fallback_;
  }

  std::vector<double> flat_params() const override {
    std::vector<double> flat;
    for (const auto& [state, value] : table_) {
      flat.insert(flat.end(), state.begin(), state.end());
      flat.insert(flat.end(), value.data(), value.data() + value.size());
    }
    return flat;
  }

  std::string kind() const override { return "tabular"; }

 private:
  std::map<std::vector<double>, Eigen::VectorXd> table_;
  Eigen::VectorXd fallback_;
};

class MlpRegressor : public Regressor {
 public:
  MlpRegressor(const std::vector<WeightedPair>& pairs, int state_dim, int action_dim,
               const RegressorConfig& cfg, Rng& rng)
      : net_(MlpSpec{state_dim, cfg.hidden, action_dim}), action_dim_(action_dim) {
    net_.init_params(rng);
    const int n = static_cast<int>(pairs.size());
    if (n == 0) throw std::invalid_argument("MlpRegressor: empty training set");
    const int batch = std::min(cfg.batch_size, n);
    const int steps_per_epoch = (n + batch - 1) / batch;
    const int total_steps = cfg.epochs * steps_per_epoch;

    std::vector<double> grad(net_.num_params(), 0.0);
    std::vector<double> pred(action_dim), dpred(action_dim);
    MlpScratch scratch = net_.make_scratch();
    AdamState adam;
    for (int step = 0; step < total_steps; ++step) {
      std::fill(grad.begin(), grad.end(), 0.0);
      for (int b = 0; b < batch; ++b) {
        const WeightedPair& p = pairs[rng.uniform_int(n)];
        net_.forward(p.state.data(), pred.data(), scratch);
        for (int i = 0; i < action_dim; ++i)
          dpred[i] = 2.0 * p.weight * (pred[i] - p.target[i]) / batch;
        net_.backward(dpred.data(), grad.data(), nullptr, scratch);
      }
      adam_step(net_.params(), grad, adam, cfg.learning_rate);
    }
  }

  Eigen::VectorXd predict(const Eigen::VectorXd& state) const override {
    Eigen::VectorXd out(action_dim_);
    MlpScratch scratch = net_.make_scratch();
    net_.forward(state.data(), out.data(), scratch);
    return out;
  }

  std::vector<double> flat_params() const override { return net_.params(); }
  std::string kind() const override { return "mlp"; }

 private:
  Mlp net_;
  int action_dim_;
};

std::vector<WeightedPair> dataset_pairs(const ContinuousDemoDataset& ds) {
  std::vector<WeightedPair> pairs;
  pairs.reserve(ds.num_pairs());
  for (const auto& traj : ds.trajectories)
    for (const auto& step : traj) pairs.push_back(WeightedPair{step.state, step.action, 1.0});
  return pairs;
}

}  // namespace

std::string to_string(EnsembleNoise mode) {
  switch (mode) {
    case EnsembleNoise::kTrajectoryBootstrap:
      return "trajectory-bootstrap";
    case EnsembleNoise::kStateActionBootstrap:
      return "state-action-bootstrap";
    case EnsembleNoise::kGaussianNoise:
      return "gaussian-noise";
  }
  throw std::logic_error("unreachable");
}

EnsembleNoise ensemble_noise_from_string(const std::string& name) {
  if (name == "trajectory-bootstrap") return EnsembleNoise::kTrajectoryBootstrap;
  if (name == "state-action-bootstrap") return EnsembleNoise::kStateActionBootstrap;
  if (name == "gaussian-noise") return EnsembleNoise::kGaussianNoise;
  throw std::invalid_argument("unknown ensemble noise mode: " + name);
}

ContinuousDemoDataset bootstrap_trajectory(const ContinuousDemoDataset& dataset, Rng& rng) {
  if (dataset.trajectories.empty())
    throw std::invalid_argument("bootstrap_trajectory: empty dataset");
  ContinuousDemoDataset out = dataset;
  out.trajectories.clear();
  const int n = dataset.num_trajectories();
  for (int t = 0; t < n; ++t)
    out.trajectories.push_back(dataset.trajectories[rng.uniform_int(n)]);
  return out;
}

DemoDataset bootstrap_trajectory(const DemoDataset& dataset, Rng& rng) {
  if (dataset.trajectories.empty())
    throw std::invalid_argument("bootstrap_trajectory: empty dataset");
  DemoDataset out;
  out.source_seed = dataset.source_seed;
  const int n = dataset.num_trajectories();
  for (int t = 0; t < n; ++t)
    out.trajectories.push_back(dataset.trajectories[rng.uniform_int(n)]);
  return out;
}

std::vector<ContinuousStep> bootstrap_state_action(const ContinuousDemoDataset& dataset,
                                                   Rng& rng) {
  const int n = dataset.num_pairs();
  if (n == 0) throw std::invalid_argument("bootstrap_state_action: empty dataset");
  std::vector<ContinuousStep> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(dataset.pair(rng.uniform_int(n)));
  return out;
}

ContinuousDemoDataset perturb_actions(const ContinuousDemoDataset& dataset, double sigma,
                                      Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("perturb_actions: sigma must be >= 0");
  ContinuousDemoDataset out = dataset;
  for (auto& traj : out.trajectories)
    for (auto& step : traj)
      for (double& a : step.action) a += rng.normal(0.0, sigma);
  return out;
}

std::shared_ptr<const Regressor> fit_ensemble_member(const ContinuousDemoDataset& dataset,
                                                     const EnsembleConfig& config, Rng& rng) {
  if (dataset.num_pairs() == 0)
    throw std::invalid_argument("fit_ensemble_member: empty dataset");
  std::vector<WeightedPair> pairs;
  switch (config.mode) {
    case EnsembleNoise::kTrajectoryBootstrap: {
      ContinuousDemoDataset boot = bootstrap_trajectory(dataset, rng);
      pairs = dataset_pairs(boot);
      break;
    }
    case EnsembleNoise::kStateActionBootstrap: {
      for (const auto& step : bootstrap_state_action(dataset, rng))
        pairs.push_back(WeightedPair{step.state, step.action, 1.0});
      break;
    }
    case EnsembleNoise::kGaussianNoise: {
      ContinuousDemoDataset noisy = perturb_actions(dataset, config.noise_sigma, rng);
      pairs = dataset_pairs(noisy);
      double prior_weight =
          config.prior_reg < 0.0 ? config.noise_sigma * config.noise_sigma : config.prior_reg;
      if (prior_weight > 0.0) {
        // one anchoring pseudo-target mu_tilde ~ N(0, I) per distinct state
        std::map<std::vector<double>, bool> seen;
        for (const auto& traj : dataset.trajectories)
          for (const auto& step : traj) seen.emplace(step.state, true);
        for (const auto& [state, unused] : seen) {
          WeightedPair p;
          p.state = state;
          p.target.resize(dataset.action_dim);
          for (double& v : p.target) v = rng.normal();
          p.weight = prior_weight;
          pairs.push_back(std::move(p));
        }
      }
      break;
    }
  }
  if (config.regressor.tabular)
    return std::make_shared<TabularMeanRegressor>(pairs, dataset.action_dim);
  return std::make_shared<MlpRegressor>(pairs, dataset.state_dim, dataset.action_dim,
                                        config.regressor, rng);
}

Ensemble fit_ensemble(const ContinuousDemoDataset& dataset, const EnsembleConfig& config,
                      std::uint64_t seed, int workers) {
  if (config.ensemble_size < 2)
    throw std::invalid_argument("fit_ensemble: ensemble size must be >= 2");
  if (dataset.num_pairs() == 0) throw std::invalid_argument("fit_ensemble: empty dataset");
  Ensemble ens;
  ens.state_dim = dataset.state_dim;
  ens.action_dim = dataset.action_dim;
  ens.config = config;
  ens.seed = seed;
  ens.members.resize(config.ensemble_size);
  parallel_for(config.ensemble_size, workers, [&](std::int64_t l) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(l));
    ens.members[l] = fit_ensemble_member(dataset, config, rng);
  });
  return ens;
}

Eigen::MatrixXd posterior_cov(const Ensemble& ensemble, CovNormalization normalization,
                              const Eigen::VectorXd& state) {
  const int k = static_cast<int>(ensemble.members.size());
  if (k < 2) throw std::invalid_argument("posterior_cov: need at least 2 members");
  const int d = ensemble.action_dim;
  std::vector<Eigen::VectorXd> preds;
  preds.reserve(k);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& member : ensemble.members) {
    preds.push_back(member->predict(state));
    mean += preds.back();
  }
  mean /= static_cast<double>(k);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& p : preds) {
    Eigen::VectorXd c = p - mean;
    cov += c * c.transpose();
  }
  if (normalization == CovNormalization::kSample) cov /= static_cast<double>(k - 1);
  return 0.5 * (cov + cov.transpose());
}

CovField CovField::from_ensemble(Ensemble ensemble, CovNormalization normalization) {
  CovField f;
  f.action_dim_ = ensemble.action_dim;
  f.ensemble_ = std::make_shared<const Ensemble>(std::move(ensemble));
  f.normalization_ = normalization;
  return f;
}

CovField CovField::constant(int action_dim, const Eigen::MatrixXd& cov) {
  if (cov.rows() != action_dim || cov.cols() != action_dim)
    throw std::invalid_argument("CovField::constant: dimension mismatch");
  CovField f;
  f.action_dim_ = action_dim;
  f.constant_cov_ = 0.5 * (cov + cov.transpose());
  return f;
}

CovField CovField::zero(int action_dim) {
  return constant(action_dim, Eigen::MatrixXd::Zero(action_dim, action_dim));
}

CovField CovField::isotropic(int action_dim, double sigma) {
  return constant(action_dim,
                  sigma * sigma * Eigen::MatrixXd::Identity(action_dim, action_dim));
}

Eigen::MatrixXd CovField::cov(const Eigen::VectorXd& state) const {
  if (ensemble_) return posterior_cov(*ensemble_, normalization_, state);
  return constant_cov_;
}

Eigen::MatrixXd CovField::cov(const std::vector<double>& state) const {
  Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(state.data(), state.size());
  return cov(s);
}

void save_ensemble(const Ensemble& ensemble, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  nlohmann::json header;
  header["K"] = ensemble.members.size();
  header["state_dim"] = ensemble.state_dim;
  header["action_dim"] = ensemble.action_dim;
  header["mode"] = to_string(ensemble.config.mode);
  header["seed"] = ensemble.seed;
  header["kind"] = ensemble.members.empty() ? "none" : ensemble.members.front()->kind();
  f << header.dump() << '\n';
  char buf[64];
  for (const auto& member : ensemble.members) {
    std::vector<double> flat = member->flat_params();
    for (std::size_t i = 0; i < flat.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", flat[i]);
      if (i) f << ' ';
      f << buf;
    }
    f << '\n';
  }
}

}  // namespace postbc
