#include "postbc/diffusion.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace postbc {

namespace {

double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

/// PSD square root via eigendecomposition, negative eigenvalues clamped.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

DiffusionSchedule DiffusionSchedule::linear_variance(int train_steps, double max_noise_var) {
  if (train_steps <= 0)
    throw std::invalid_argument("DiffusionSchedule: train_steps must be positive");
  if (!(max_noise_var > 0.0) || max_noise_var >= 1.0)
    throw std::invalid_argument("DiffusionSchedule: max_noise_var must be in (0,1)");
  DiffusionSchedule s;
  s.train_steps = train_steps;
  s.alpha_bar.resize(train_steps);
  for (int n = 1; n <= train_steps; ++n)
    s.alpha_bar[n - 1] = 1.0 - max_noise_var * n / train_steps;
  return s;
}

void DiffusionSchedule::validate() const {
  if (static_cast<int>(alpha_bar.size()) != train_steps)
    throw std::invalid_argument("DiffusionSchedule: size mismatch");
  double prev_var = 0.0;
  for (double ab : alpha_bar) {
    double var = 1.0 - ab;
    if (!(var > prev_var))
      throw std::invalid_argument(
          "DiffusionSchedule: cumulative noise variance must increase strictly");
    prev_var = var;
    if (!(ab > 0.0)) throw std::invalid_argument("DiffusionSchedule: alpha_bar must stay > 0");
  }
}

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0 || !(step_size > 0.0) || train_steps <= 0 ||
      infer_steps <= 0)
    throw std::invalid_argument("TrainConfig: all fields must be positive");
  for (int hsize : hidden)
    if (hsize <= 0) throw std::invalid_argument("TrainConfig: hidden sizes must be positive");
}

GenerativePolicy::GenerativePolicy(int state_dim, int action_dim, const TrainConfig& config,
                                   ActionNormalization norm, Rng& init_rng)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      schedule_(DiffusionSchedule::linear_variance(config.train_steps)),
      infer_steps_(std::min(config.infer_steps, config.train_steps)),
      norm_(std::move(norm)),
      denoiser_(MlpSpec{state_dim + action_dim + kTimeEmbedDim, config.hidden, action_dim}) {
  schedule_.validate();
  denoiser_.init_params(init_rng);
}

void GenerativePolicy::time_embedding(int n, int train_steps, double* out) {
  double t = static_cast<double>(n) / train_steps;
  const double freqs[kTimeEmbedDim / 2] = {1.0, 2.0, 4.0, 8.0};
  for (int k = 0; k < kTimeEmbedDim / 2; ++k) {
    out[2 * k] = std::sin(M_PI * freqs[k] * t);
    out[2 * k + 1] = std::cos(M_PI * freqs[k] * t);
  }
}

void GenerativePolicy::set_state_range(std::vector<double> lo, std::vector<double> hi) {
  if (static_cast<int>(lo.size()) != state_dim_ || static_cast<int>(hi.size()) != state_dim_)
    throw std::invalid_argument("set_state_range: dimension mismatch");
  state_lo_ = std::move(lo);
  state_hi_ = std::move(hi);
}

void GenerativePolicy::predict_noise(const double* state, const double* noisy_action, int n,
                                     double* out, MlpScratch& scratch) const {
  std::vector<double> input(state_dim_ + action_dim_ + kTimeEmbedDim);
  std::copy(state, state + state_dim_, input.begin());
  if (!state_lo_.empty())
    for (int i = 0; i < state_dim_; ++i) input[i] = clip(input[i], state_lo_[i], state_hi_[i]);
  std::copy(noisy_action, noisy_action + action_dim_, input.begin() + state_dim_);
  time_embedding(n, schedule_.train_steps, input.data() + state_dim_ + action_dim_);
  denoiser_.forward(input.data(), out, scratch);
}

std::vector<double> GenerativePolicy::sample_action(const std::vector<double>& state,
                                                    Rng& rng) const {
  if (static_cast<int>(state.size()) != state_dim_)
    throw std::invalid_argument("sample_action: state dimension mismatch");
  const int N = schedule_.train_steps;
  const int K = infer_steps_;
  // descending subsequence of timesteps, from N down to 1
  std::vector<int> steps;
  steps.reserve(K);
  for (int j = 0; j < K; ++j) {
    int n = K == 1 ? N : 1 + ((N - 1) * (K - 1 - j)) / (K - 1);
    if (steps.empty() || steps.back() != n) steps.push_back(n);
  }

  std::vector<double> x(action_dim_), eps(action_dim_);
  for (double& v : x) v = rng.normal();
  MlpScratch scratch = denoiser_.make_scratch();
  for (std::size_t idx = 0; idx < steps.size(); ++idx) {
    int n = steps[idx];
    int n_prev = idx + 1 < steps.size() ? steps[idx + 1] : 0;
    double ab = schedule_.alpha_bar[n - 1];
    double ab_prev = n_prev == 0 ? 1.0 : schedule_.alpha_bar[n_prev - 1];
    predict_noise(state.data(), x.data(), n, eps.data(), scratch);

    double alpha_eff = ab / ab_prev;          // product of betas skipped this hop
    double beta_eff = 1.0 - alpha_eff;
    double var = n_prev == 0 ? 0.0 : beta_eff * (1.0 - ab_prev) / (1.0 - ab);
    double stddev = std::sqrt(std::max(0.0, var));
    for (int i = 0; i < action_dim_; ++i) {
      double x0_hat = (x[i] - std::sqrt(1.0 - ab) * eps[i]) / std::sqrt(ab);
      double mean = (std::sqrt(ab_prev) * beta_eff * x0_hat +
                     std::sqrt(alpha_eff) * (1.0 - ab_prev) * x[i]) /
                    (1.0 - ab);
      x[i] = mean + (n_prev == 0 ? 0.0 : stddev * rng.normal());
    }
  }
  std::vector<double> action = norm_.denormalize(x);
  for (double& v : action) v = clip(v, -1.0, 1.0);
  return action;
}

void GenerativePolicy::save(const std::string& path, std::uint64_t seed) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  nlohmann::json header;
  header["state_dim"] = state_dim_;
  header["action_dim"] = action_dim_;
  header["train_steps"] = schedule_.train_steps;
  header["infer_steps"] = infer_steps_;
  header["norm_mean"] = norm_.mean;
  header["norm_scale"] = norm_.scale;
  header["state_lo"] = state_lo_;
  header["state_hi"] = state_hi_;
  header["seed"] = seed;
  f << header.dump() << '\n';
  char buf[64];
  const std::vector<double>& p = denoiser_.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", p[i]);
    if (i) f << ' ';
    f << buf;
  }
  f << '\n';
}

double diffusion_loss(const GenerativePolicy& policy,
                      const std::vector<DiffusionBatchItem>& batch, Rng& rng,
                      std::vector<double>& grad, DiffusionLossDebug* debug) {
  if (batch.empty()) throw std::invalid_argument("diffusion_loss: empty batch");
  const int d = policy.action_dim();
  const int N = policy.schedule().train_steps;
  grad.assign(policy.params().size(), 0.0);
  if (debug) {
    debug->timesteps.clear();
    debug->noises.clear();
  }

  std::vector<double> noisy(d), eps(d), pred(d), dpred(d);
  MlpScratch scratch = policy.denoiser().make_scratch();
  const double denom = static_cast<double>(batch.size()) * d;
  double loss = 0.0;
  for (const DiffusionBatchItem& item : batch) {
    int n = 1 + rng.uniform_int(N);
    double ab = policy.schedule().alpha_bar[n - 1];
    for (int i = 0; i < d; ++i) {
      eps[i] = rng.normal();
      noisy[i] = std::sqrt(ab) * item.target[i] + std::sqrt(1.0 - ab) * eps[i];
    }
    if (debug) {
      debug->timesteps.push_back(n);
      debug->noises.insert(debug->noises.end(), eps.begin(), eps.end());
    }
    policy.predict_noise(item.state, noisy.data(), n, pred.data(), scratch);
    for (int i = 0; i < d; ++i) {
      double r = pred[i] - eps[i];
      loss += r * r / denom;
      dpred[i] = 2.0 * r / denom;
    }
    policy.denoiser().backward(dpred.data(), grad.data(), nullptr, scratch);
  }
  return loss;
}

namespace {

GenerativePolicy train_generative(const ContinuousDemoDataset& dataset,
                                  const CovField* cov_field, double alpha,
                                  const TrainConfig& config, Rng& rng) {
  config.validate();
  if (dataset.num_pairs() == 0) throw std::invalid_argument("train: empty dataset");
  if (alpha < 0.0) throw std::invalid_argument("train: alpha must be >= 0");
  dataset.validate();

  const int n_pairs = dataset.num_pairs();
  const int d = dataset.action_dim;
  GenerativePolicy policy(dataset.state_dim, d, config, dataset.norm, rng);
  {
    std::vector<double> lo(dataset.state_dim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dataset.state_dim, -std::numeric_limits<double>::infinity());
    for (const auto& traj : dataset.trajectories)
      for (const auto& step : traj)
        for (int i = 0; i < dataset.state_dim; ++i) {
          lo[i] = std::min(lo[i], step.state[i]);
          hi[i] = std::max(hi[i], step.state[i]);
        }
    policy.set_state_range(std::move(lo), std::move(hi));
  }

  // flatten states and normalized targets; cov factors are deterministic per
  // state, so they are precomputed once (the added noise stays fresh per
  // batch occurrence)
  std::vector<std::vector<double>> states(n_pairs), targets(n_pairs);
  std::vector<Eigen::MatrixXd> noise_factor(n_pairs);
  for (int i = 0; i < n_pairs; ++i) {
    const ContinuousStep& step = dataset.pair(i);
    states[i] = step.state;
    targets[i] = dataset.norm.normalize(step.action);
    if (cov_field != nullptr) noise_factor[i] = psd_sqrt(cov_field->cov(step.state));
  }

  const int batch = std::min(config.batch_size, n_pairs);
  const int steps_per_epoch = (n_pairs + batch - 1) / batch;
  const int total_steps = config.epochs * steps_per_epoch;

  std::vector<double> grad;
  std::vector<DiffusionBatchItem> items(batch);
  std::vector<std::vector<double>> perturbed(batch, std::vector<double>(d));
  std::vector<double> z(d);
  AdamState adam;
  for (int step = 0; step < total_steps; ++step) {
    for (int b = 0; b < batch; ++b) {
      int i = rng.uniform_int(n_pairs);
      // fresh posterior noise draw for this occurrence; the z draws happen
      // unconditionally so bc / postbc(alpha=0) / zero-field training walk
      // identical RNG streams
      for (int c = 0; c < d; ++c) z[c] = rng.normal();
      if (cov_field != nullptr && alpha > 0.0) {
        Eigen::Map<Eigen::VectorXd> zv(z.data(), d);
        Eigen::VectorXd w = noise_factor[i] * zv;
        for (int c = 0; c < d; ++c) perturbed[b][c] = targets[i][c] + alpha * w[c];
      } else {
        perturbed[b] = targets[i];
      }
      items[b] = DiffusionBatchItem{states[i].data(), perturbed[b].data()};
    }
    diffusion_loss(policy, items, rng, grad);
    adam_step(policy.params(), grad, adam, config.step_size);
  }
  return policy;
}

}  // namespace

GenerativePolicy train_bc(const ContinuousDemoDataset& dataset, const TrainConfig& config,
                          Rng& rng) {
  return train_generative(dataset, nullptr, 0.0, config, rng);
}

GenerativePolicy train_postbc(const ContinuousDemoDataset& dataset, const CovField& cov_field,
                              double alpha, const TrainConfig& config, Rng& rng) {
  if (cov_field.action_dim() != dataset.action_dim)
    throw std::invalid_argument("train_postbc: cov field action dimension mismatch");
  return train_generative(dataset, &cov_field, alpha, config, rng);
}

GenerativePolicy train_sigma_bc(const ContinuousDemoDataset& dataset, double sigma,
                                const TrainConfig& config, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("train_sigma_bc: sigma must be >= 0");
  CovField field = CovField::isotropic(dataset.action_dim, sigma);
  return train_generative(dataset, &field, 1.0, config, rng);
}

}  // namespace postbc
