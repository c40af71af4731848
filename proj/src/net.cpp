#include "postbc/net.hpp"

#include <cmath>
#include <stdexcept>

namespace postbc {

Mlp::Mlp(const MlpSpec& spec) : spec_(spec) {
  if (spec.in_dim <= 0 || spec.out_dim <= 0)
    throw std::invalid_argument("Mlp: in_dim and out_dim must be positive");
  for (int hsize : spec.hidden)
    if (hsize <= 0) throw std::invalid_argument("Mlp: hidden sizes must be positive");

  int prev = spec.in_dim;
  int offset = 0;
  auto add_layer = [&](int out) {
    layer_in_.push_back(prev);
    layer_out_.push_back(out);
    w_offset_.push_back(offset);
    offset += prev * out;
    b_offset_.push_back(offset);
    offset += out;
    prev = out;
  };
  for (int hsize : spec.hidden) add_layer(hsize);
  add_layer(spec.out_dim);
  params_.assign(offset, 0.0);
}

void Mlp::init_params(Rng& rng) {
  for (std::size_t l = 0; l < layer_in_.size(); ++l) {
    double bound = std::sqrt(6.0 / (layer_in_[l] + layer_out_[l]));
    double* w = params_.data() + w_offset_[l];
    for (int i = 0; i < layer_in_[l] * layer_out_[l]; ++i) w[i] = rng.uniform(-bound, bound);
    double* b = params_.data() + b_offset_[l];
    for (int i = 0; i < layer_out_[l]; ++i) b[i] = 0.0;
  }
}

MlpScratch Mlp::make_scratch() const {
  MlpScratch s;
  s.acts.resize(layer_in_.size() + 1);
  s.deltas.resize(layer_in_.size() + 1);
  s.acts[0].resize(spec_.in_dim);
  s.deltas[0].resize(spec_.in_dim);
  for (std::size_t l = 0; l < layer_in_.size(); ++l) {
    s.acts[l + 1].resize(layer_out_[l]);
    s.deltas[l + 1].resize(layer_out_[l]);
  }
  return s;
}

void Mlp::forward(const double* x, double* y, MlpScratch& scratch) const {
  if (scratch.acts.size() != layer_in_.size() + 1) scratch = make_scratch();
  std::copy(x, x + spec_.in_dim, scratch.acts[0].begin());
  const std::size_t layers = layer_in_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const double* in = scratch.acts[l].data();
    double* out = scratch.acts[l + 1].data();
    const double* w = params_.data() + w_offset_[l];
    const double* b = params_.data() + b_offset_[l];
    const int n_in = layer_in_[l], n_out = layer_out_[l];
    const bool is_last = (l + 1 == layers);
    for (int j = 0; j < n_out; ++j) {
      double acc = b[j];
      const double* wj = w + static_cast<std::size_t>(j) * n_in;
      for (int i = 0; i < n_in; ++i) acc += wj[i] * in[i];
      out[j] = is_last ? acc : std::tanh(acc);
    }
  }
  const std::vector<double>& last = scratch.acts[layers];
  std::copy(last.begin(), last.end(), y);
}

void Mlp::backward(const double* dy, double* grad, double* dx, MlpScratch& scratch) const {
  const std::size_t layers = layer_in_.size();
  std::copy(dy, dy + spec_.out_dim, scratch.deltas[layers].begin());
  for (std::size_t li = layers; li-- > 0;) {
    const int n_in = layer_in_[li], n_out = layer_out_[li];
    const double* in = scratch.acts[li].data();
    const double* out = scratch.acts[li + 1].data();
    double* delta = scratch.deltas[li + 1].data();
    const bool is_last = (li + 1 == layers);
    if (!is_last) {
      // fold the tanh derivative into the incoming delta
      for (int j = 0; j < n_out; ++j) delta[j] *= 1.0 - out[j] * out[j];
    }
    double* gw = grad + w_offset_[li];
    double* gb = grad + b_offset_[li];
    for (int j = 0; j < n_out; ++j) {
      double dj = delta[j];
      gb[j] += dj;
      double* gwj = gw + static_cast<std::size_t>(j) * n_in;
      for (int i = 0; i < n_in; ++i) gwj[i] += dj * in[i];
    }
    if (li > 0 || dx != nullptr) {
      double* prev_delta = scratch.deltas[li].data();
      const double* w = params_.data() + w_offset_[li];
      for (int i = 0; i < n_in; ++i) prev_delta[i] = 0.0;
      for (int j = 0; j < n_out; ++j) {
        double dj = delta[j];
        const double* wj = w + static_cast<std::size_t>(j) * n_in;
        for (int i = 0; i < n_in; ++i) prev_delta[i] += dj * wj[i];
      }
    }
  }
  if (dx != nullptr)
    std::copy(scratch.deltas[0].begin(), scratch.deltas[0].end(), dx);
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (grad.size() != params.size())
    throw std::invalid_argument("adam_step: gradient size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.t = 0;
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace postbc
