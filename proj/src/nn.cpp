#include "csr/nn.hpp"

#include <algorithm>
#include <cmath>

namespace csr {

FeatureMap residual_add(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) throw ConfigError("residual_add: shape mismatch");
  FeatureMap out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

ConvLayer ConvLayer::make(int kernel_size, int in_channels, int out_channels,
                          bool apply_relu) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ConfigError("ConvLayer: kernel size must be odd and >= 1");
  if (in_channels < 1 || out_channels < 1)
    throw ConfigError("ConvLayer: channel counts must be >= 1");
  ConvLayer layer;
  layer.kernel_size = kernel_size;
  layer.in_channels = in_channels;
  layer.out_channels = out_channels;
  layer.apply_relu = apply_relu;
  layer.weights.assign(layer.weight_count(), 0.0);
  layer.bias.assign(static_cast<std::size_t>(out_channels), 0.0);
  return layer;
}

FeatureMap conv2d_forward(const FeatureMap& input, const ConvLayer& layer,
                          ConvCache* cache, int threads) {
  if (input.channels != layer.in_channels)
    throw ConfigError("conv2d_forward: input channel mismatch");
  if (layer.weights.size() != layer.weight_count() ||
      layer.bias.size() != static_cast<std::size_t>(layer.out_channels))
    throw ConfigError("conv2d_forward: parameter size mismatch");

  const int h = input.height, w = input.width;
  const int k = layer.kernel_size, pad = (k - 1) / 2;
  FeatureMap out(h, w, layer.out_channels);

  parallel_for(static_cast<std::size_t>(layer.out_channels), threads,
               [&](std::size_t oc) {
    double* op = out.plane(static_cast<int>(oc));
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::fill(op, op + plane, layer.bias[oc]);
    for (int ic = 0; ic < layer.in_channels; ++ic) {
      const double* ip = input.plane(ic);
      const double* wbase =
          layer.weights.data() +
          ((oc * layer.in_channels + ic) * static_cast<std::size_t>(k) * k);
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          const double wv = wbase[ky * k + kx];
          for (int y = y0; y < y1; ++y) {
            const double* src = ip + static_cast<std::size_t>(y + dy) * w + dx;
            double* dst = op + static_cast<std::size_t>(y) * w;
            for (int x = x0; x < x1; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  });

  if (cache) {
    cache->input = input;
    cache->active.clear();
    cache->valid = true;
  }
  if (layer.apply_relu) {
    if (cache) {
      cache->active.resize(out.data.size());
      for (std::size_t i = 0; i < out.data.size(); ++i)
        cache->active[i] = out.data[i] >= 0.0 ? 1 : 0;
    }
    for (double& v : out.data) v = v < 0.0 ? 0.0 : v;
  }
  return out;
}

ConvGrads conv2d_backward(const FeatureMap& grad_out, const ConvLayer& layer,
                          const ConvCache& cache, int threads) {
  if (!cache.valid)
    throw UsageError("conv2d_backward: no forward cache for this layer");
  const FeatureMap& input = cache.input;
  if (grad_out.channels != layer.out_channels ||
      grad_out.height != input.height || grad_out.width != input.width)
    throw ConfigError("conv2d_backward: gradient shape mismatch");

  const int h = input.height, w = input.width;
  const int k = layer.kernel_size, pad = (k - 1) / 2;

  FeatureMap g = grad_out;
  if (layer.apply_relu) {
    if (cache.active.size() != g.data.size())
      throw UsageError("conv2d_backward: relu mask missing from cache");
    for (std::size_t i = 0; i < g.data.size(); ++i)
      if (!cache.active[i]) g.data[i] = 0.0;
  }

  ConvGrads grads;
  grads.weights.assign(layer.weight_count(), 0.0);
  grads.bias.assign(static_cast<std::size_t>(layer.out_channels), 0.0);
  grads.input = FeatureMap(h, w, layer.in_channels);

  // Weight and bias gradients, disjoint per output channel.
  parallel_for(static_cast<std::size_t>(layer.out_channels), threads,
               [&](std::size_t oc) {
    const double* gp = g.plane(static_cast<int>(oc));
    double acc = 0.0;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
    grads.bias[oc] = acc;
    for (int ic = 0; ic < layer.in_channels; ++ic) {
      const double* ip = input.plane(ic);
      double* wg = grads.weights.data() +
                   ((oc * layer.in_channels + ic) *
                    static_cast<std::size_t>(k) * k);
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          double sum = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* src = ip + static_cast<std::size_t>(y + dy) * w + dx;
            const double* grow = gp + static_cast<std::size_t>(y) * w;
            for (int x = x0; x < x1; ++x) sum += grow[x] * src[x];
          }
          wg[ky * k + kx] = sum;
        }
      }
    }
  });

  // Input gradient, disjoint per input channel. Contribution of tap (ky,kx):
  // grad_in[y][x] += w * g[y - dy][x - dx].
  parallel_for(static_cast<std::size_t>(layer.in_channels), threads,
               [&](std::size_t ic) {
    double* gip = grads.input.plane(static_cast<int>(ic));
    for (int oc = 0; oc < layer.out_channels; ++oc) {
      const double* gp = g.plane(oc);
      const double* wbase =
          layer.weights.data() +
          ((static_cast<std::size_t>(oc) * layer.in_channels + ic) *
           static_cast<std::size_t>(k) * k);
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int y0 = std::max(0, dy), y1 = std::min(h, h + dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int x0 = std::max(0, dx), x1 = std::min(w, w + dx);
          const double wv = wbase[ky * k + kx];
          for (int y = y0; y < y1; ++y) {
            const double* src = gp + static_cast<std::size_t>(y - dy) * w - dx;
            double* dst = gip + static_cast<std::size_t>(y) * w;
            for (int x = x0; x < x1; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  });

  return grads;
}

FCLayer FCLayer::make(int in_len, int out_len) {
  if (in_len < 1 || out_len < 1)
    throw ConfigError("FCLayer: lengths must be >= 1");
  FCLayer layer;
  layer.in_len = in_len;
  layer.out_len = out_len;
  layer.weights.assign(static_cast<std::size_t>(out_len) * in_len, 0.0);
  layer.bias.assign(static_cast<std::size_t>(out_len), 0.0);
  return layer;
}

std::vector<double> fc_forward(std::span<const double> input,
                               const FCLayer& layer, FCCache* cache) {
  if (input.size() != static_cast<std::size_t>(layer.in_len))
    throw ConfigError("fc_forward: input length mismatch");
  if (layer.weights.size() !=
      static_cast<std::size_t>(layer.out_len) * layer.in_len)
    throw ConfigError("fc_forward: parameter size mismatch");
  std::vector<double> out(static_cast<std::size_t>(layer.out_len));
  for (int o = 0; o < layer.out_len; ++o) {
    const double* row =
        layer.weights.data() + static_cast<std::size_t>(o) * layer.in_len;
    double acc = layer.bias[o];
    for (int i = 0; i < layer.in_len; ++i) acc += row[i] * input[i];
    out[o] = acc;
  }
  if (cache) {
    cache->input.assign(input.begin(), input.end());
    cache->valid = true;
  }
  return out;
}

FCGrads fc_backward(std::span<const double> grad_out, const FCLayer& layer,
                    const FCCache& cache) {
  if (!cache.valid)
    throw UsageError("fc_backward: no forward cache for this layer");
  if (grad_out.size() != static_cast<std::size_t>(layer.out_len))
    throw ConfigError("fc_backward: gradient length mismatch");
  FCGrads grads;
  grads.bias.assign(grad_out.begin(), grad_out.end());
  grads.weights.assign(layer.weights.size(), 0.0);
  grads.input.assign(static_cast<std::size_t>(layer.in_len), 0.0);
  for (int o = 0; o < layer.out_len; ++o) {
    const double go = grad_out[o];
    const double* wrow =
        layer.weights.data() + static_cast<std::size_t>(o) * layer.in_len;
    double* grow =
        grads.weights.data() + static_cast<std::size_t>(o) * layer.in_len;
    for (int i = 0; i < layer.in_len; ++i) {
      grow[i] = go * cache.input[i];
      grads.input[i] += go * wrow[i];
    }
  }
  return grads;
}

LossResult mse_loss(const FeatureMap& pred, const FeatureMap& target) {
  if (!pred.same_shape(target)) throw ConfigError("mse_loss: shape mismatch");
  LossResult r;
  r.grad = FeatureMap(pred.height, pred.width, pred.channels);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    acc += d * d;
    r.grad.data[i] = 2.0 * d;
  }
  r.loss = acc;
  return r;
}

BatchLossResult mse_loss_batch(std::span<const FeatureMap> preds,
                               std::span<const FeatureMap> targets) {
  if (preds.size() != targets.size() || preds.empty())
    throw ConfigError("mse_loss_batch: batch size mismatch or empty batch");
  const double inv_k = 1.0 / static_cast<double>(preds.size());
  BatchLossResult r;
  r.grads.reserve(preds.size());
  for (std::size_t s = 0; s < preds.size(); ++s) {
    LossResult one = mse_loss(preds[s], targets[s]);
    r.loss += one.loss;
    for (double& v : one.grad.data) v *= inv_k;
    r.grads.push_back(std::move(one.grad));
  }
  r.loss *= inv_k;
  return r;
}

void sgd_step(std::span<double> params, std::span<const double> grads,
              std::span<double> velocity, double lr, double momentum) {
  if (params.size() != grads.size() || params.size() != velocity.size())
    throw ConfigError("sgd_step: size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * grads[i];
    params[i] += velocity[i];
  }
}

}  // namespace csr
