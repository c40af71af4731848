#pragma once

#include <cstdint>
#include <vector>

#include "postbc/rng.hpp"

namespace postbc {

/// Feed-forward network: tanh hidden layers, linear output, flat double
/// parameter vector, hand-written backward pass. Small and deterministic by
/// construction; all the gradient-based pieces of this project (ensemble
/// regressors, the diffusion denoiser, the Q/V networks) run on it.
struct MlpSpec {
  int in_dim = 0;
  std::vector<int> hidden;
  int out_dim = 0;
};

/// Per-call activation storage; reuse across calls inside hot loops.
struct MlpScratch {
  std::vector<std::vector<double>> acts;    // acts[0] = input, acts[l+1] = layer l output
  std::vector<std::vector<double>> deltas;  // backprop buffers, same shapes as acts
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(const MlpSpec& spec);

  void init_params(Rng& rng);  // uniform Glorot-style fan-in/fan-out scaling

  int num_params() const { return static_cast<int>(params_.size()); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  const MlpSpec& spec() const { return spec_; }

  /// y = f(x). Records activations in scratch for a following backward().
  void forward(const double* x, double* y, MlpScratch& scratch) const;

  /// Given dL/dy from the forward recorded in scratch, accumulates dL/dtheta
  /// into grad (same layout as params). If dx is non-null, also writes dL/dx.
  void backward(const double* dy, double* grad, double* dx, MlpScratch& scratch) const;

  MlpScratch make_scratch() const;

 private:
  MlpSpec spec_;
  std::vector<int> layer_in_, layer_out_;  // per-layer dims
  std::vector<int> w_offset_, b_offset_;   // offsets into params_
  std::vector<double> params_;
};

/// Adam with bias correction; fixed hyperparameters beyond the step size.
struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;
};

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

}  // namespace postbc
