#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csr/feature_map.hpp"

namespace csr {

// Stride-1, same-padded convolution with optional ReLU.
// weights layout: out x in x k x k; bias: one per output channel.
struct ConvLayer {
  int kernel_size = 0;
  int in_channels = 0;
  int out_channels = 0;
  bool apply_relu = false;
  std::vector<double> weights;
  std::vector<double> bias;

  static ConvLayer make(int kernel_size, int in_channels, int out_channels,
                        bool apply_relu);

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel_size *
           kernel_size;
  }
};

struct ConvCache {
  FeatureMap input;
  std::vector<std::uint8_t> active;  // relu mask: pre-activation >= 0
  bool valid = false;
};

struct ConvGrads {
  FeatureMap input;
  std::vector<double> weights;
  std::vector<double> bias;
};

FeatureMap conv2d_forward(const FeatureMap& input, const ConvLayer& layer,
                          ConvCache* cache = nullptr, int threads = 1);
ConvGrads conv2d_backward(const FeatureMap& grad_out, const ConvLayer& layer,
                          const ConvCache& cache, int threads = 1);

// Linear map out = W*x + b (no nonlinearity).
struct FCLayer {
  int in_len = 0;
  int out_len = 0;
  std::vector<double> weights;  // out_len x in_len, row-major
  std::vector<double> bias;

  static FCLayer make(int in_len, int out_len);
};

struct FCCache {
  std::vector<double> input;
  bool valid = false;
};

struct FCGrads {
  std::vector<double> input;
  std::vector<double> weights;
  std::vector<double> bias;
};

std::vector<double> fc_forward(std::span<const double> input,
                               const FCLayer& layer, FCCache* cache = nullptr);
FCGrads fc_backward(std::span<const double> grad_out, const FCLayer& layer,
                    const FCCache& cache);

// Batch loss: (1/k) * sum_i ||pred_i - target_i||^2, with the per-sample term
// being the full squared norm over all elements. Gradients carry the 1/k.
struct LossResult {
  double loss = 0.0;
  FeatureMap grad;
};
LossResult mse_loss(const FeatureMap& pred, const FeatureMap& target);

struct BatchLossResult {
  double loss = 0.0;
  std::vector<FeatureMap> grads;
};
BatchLossResult mse_loss_batch(std::span<const FeatureMap> preds,
                               std::span<const FeatureMap> targets);

// v <- mu*v - lr*grad; param <- param + v.
void sgd_step(std::span<double> params, std::span<const double> grads,
              std::span<double> velocity, double lr, double momentum);

// Momentum-SGD state for a stack of parameter tensors. layer_lr holds one
// learning rate per layer; velocity holds one buffer per parameter tensor
// (weights and bias of a layer share its rate).
struct OptimState {
  double momentum = 0.9;
  std::vector<double> layer_lr;
  std::vector<std::vector<double>> velocity;
};

}  // namespace csr
