#include "csr/network.hpp"

#include <algorithm>

namespace csr {

const char* network_kind_name(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::FC1ResConv: return "fc1-resconv";
    case NetworkKind::FC2ResConv: return "fc2-resconv";
    case NetworkKind::DeblockResConv: return "deblock-resconv";
    case NetworkKind::ReconNet: return "reconnet";
    case NetworkKind::HalfReconNet: return "half-reconnet";
  }
  throw ConfigError("unknown network kind value");
}

NetworkKind parse_network_kind(const std::string& token) {
  for (NetworkKind k : {NetworkKind::FC1ResConv, NetworkKind::FC2ResConv,
                        NetworkKind::DeblockResConv, NetworkKind::ReconNet,
                        NetworkKind::HalfReconNet})
    if (token == network_kind_name(k)) return k;
  throw ConfigError("unknown network kind: " + token);
}

bool network_kind_has_fc(NetworkKind kind) {
  return kind != NetworkKind::DeblockResConv;
}

int NetworkDescriptor::measurement_len() const {
  if (!has_fc)
    throw ConfigError("measurement_len: descriptor has no measurement stage");
  return measurement_count(patch_size, mr);
}

void NetworkDescriptor::validate() const {
  if (patch_size < 8) throw ConfigError("descriptor: patch size must be >= 8");
  if (stages.empty()) throw ConfigError("descriptor: no conv stages");
  // mr is required for reconstruction nets; for the de-block net it is a
  // provenance tag (the rate whose artifacts it was trained on; 0 = untagged).
  if (has_fc && (!(mr > 0.0) || mr > 1.0))
    throw ConfigError("descriptor: measurement rate must be in (0, 1]");
  if (!has_fc && (mr < 0.0 || mr > 1.0))
    throw ConfigError("descriptor: measurement rate out of range");
  const ConvStageSpec& last = stages.back();
  if (last.out_channels != 1 || last.apply_relu)
    throw ConfigError(
        "descriptor: final conv stage must emit one channel with no relu");
  for (const ConvStageSpec& s : stages) {
    if (s.kernel_size < 1 || s.kernel_size % 2 == 0)
      throw ConfigError("descriptor: conv kernel sizes must be odd");
    if (s.out_channels < 1)
      throw ConfigError("descriptor: conv out_channels must be >= 1");
  }
  const int count = static_cast<int>(stages.size());
  for (const SkipSpec& s : skips) {
    if (s.from_stage < 0 || s.to_stage >= count || s.from_stage > s.to_stage)
      throw ConfigError("descriptor: skip endpoints out of range");
    // The skip adds the tensor entering from_stage to to_stage's output, so
    // both must be single-channel module boundaries.
    const int in_ch =
        s.from_stage == 0 ? 1 : stages[s.from_stage - 1].out_channels;
    if (in_ch != 1 || stages[s.to_stage].out_channels != 1)
      throw ConfigError("descriptor: skip endpoints must be single-channel");
  }
}

namespace {

void append_resconv_module(NetworkDescriptor& d, bool with_skip) {
  const int base = static_cast<int>(d.stages.size());
  d.stages.push_back({11, 64, true});
  d.stages.push_back({1, 32, true});
  d.stages.push_back({7, 1, false});
  if (with_skip) d.skips.push_back({base, base + 2});
}

}  // namespace

NetworkDescriptor build_descriptor(NetworkKind kind, int patch_size,
                                   double mr) {
  NetworkDescriptor d;
  d.kind = kind;
  d.patch_size = patch_size;
  d.has_fc = network_kind_has_fc(kind);
  d.mr = mr;
  switch (kind) {
    case NetworkKind::FC1ResConv:
      append_resconv_module(d, true);
      break;
    case NetworkKind::FC2ResConv:
      append_resconv_module(d, true);
      append_resconv_module(d, true);
      break;
    case NetworkKind::DeblockResConv:
      append_resconv_module(d, true);
      break;
    case NetworkKind::ReconNet:
      append_resconv_module(d, false);
      d.stages.back().apply_relu = true;  // interior 7x7, not the output
      append_resconv_module(d, false);
      break;
    case NetworkKind::HalfReconNet:
      append_resconv_module(d, false);
      break;
    default:
      throw ConfigError("build_descriptor: unknown network kind");
  }
  d.validate();
  if (d.has_fc) d.measurement_len();  // validates (n, mr) combination
  return d;
}

Network make_network(const NetworkDescriptor& desc) {
  desc.validate();
  Network net;
  net.desc = desc;
  if (desc.has_fc) {
    const int n2 = desc.patch_size * desc.patch_size;
    net.fc = FCLayer::make(desc.measurement_len(), n2);
  }
  int in_ch = 1;
  for (const ConvStageSpec& s : desc.stages) {
    net.stages.push_back(
        ConvLayer::make(s.kernel_size, in_ch, s.out_channels, s.apply_relu));
    in_ch = s.out_channels;
  }
  return net;
}

InitSpec default_init_spec(const NetworkDescriptor& desc, std::uint64_t seed) {
  InitSpec spec;
  spec.seed = seed;
  const bool deblock = !desc.has_fc;
  spec.fc_std = deblock ? 0.0 : 0.01;
  spec.conv_stds.assign(desc.stages.size(), deblock ? 0.001 : 0.1);
  return spec;
}

void init_weights(Network& net, const InitSpec& spec) {
  if (spec.conv_stds.size() != net.stages.size())
    throw ConfigError("init_weights: one std per conv stage required");
  for (double s : spec.conv_stds)
    if (!(s > 0.0)) throw ConfigError("init_weights: stds must be positive");
  if (net.desc.has_fc && !(spec.fc_std > 0.0))
    throw ConfigError("init_weights: FC std must be positive");

  GaussianSampler gauss(spec.seed);
  if (net.desc.has_fc) {
    for (double& w : net.fc.weights) w = gauss.next(spec.fc_std);
    std::fill(net.fc.bias.begin(), net.fc.bias.end(), 0.0);
  }
  for (std::size_t i = 0; i < net.stages.size(); ++i) {
    for (double& w : net.stages[i].weights) w = gauss.next(spec.conv_stds[i]);
    std::fill(net.stages[i].bias.begin(), net.stages[i].bias.end(), 0.0);
  }
  net.init_seed = spec.seed;
}

std::size_t parameter_count(const Network& net) {
  std::size_t total = 0;
  if (net.desc.has_fc) total += net.fc.weights.size() + net.fc.bias.size();
  for (const ConvLayer& s : net.stages)
    total += s.weights.size() + s.bias.size();
  return total;
}

namespace {

FeatureMap run_stages(const Network& net, FeatureMap cur,
                      NetForwardCache* cache, int threads) {
  const std::vector<SkipSpec>& skips = net.desc.skips;
  std::vector<FeatureMap> skip_src(net.stages.size());
  for (std::size_t i = 0; i < net.stages.size(); ++i) {
    for (const SkipSpec& s : skips)
      if (s.from_stage == static_cast<int>(i)) skip_src[i] = cur;
    cur = conv2d_forward(cur, net.stages[i],
                         cache ? &cache->stages[i] : nullptr, threads);
    for (const SkipSpec& s : skips)
      if (s.to_stage == static_cast<int>(i))
        cur = residual_add(cur, skip_src[s.from_stage]);
  }
  return cur;
}

void prepare_cache(const Network& net, NetForwardCache* cache) {
  if (!cache) return;
  cache->stages.assign(net.stages.size(), ConvCache{});
  cache->fc = FCCache{};
  cache->valid = true;
}

}  // namespace

FeatureMap net_forward(const Network& net, const Measurement& y,
                       NetForwardCache* cache, int threads) {
  if (!net.desc.has_fc)
    throw UsageError("net_forward: this network takes an image, not a "
                     "measurement");
  if (y.values.size() != static_cast<std::size_t>(net.fc.in_len))
    throw UsageError("net_forward: measurement length mismatch");
  prepare_cache(net, cache);
  const std::vector<double> flat =
      fc_forward(y.values, net.fc, cache ? &cache->fc : nullptr);
  const int n = net.desc.patch_size;
  FeatureMap cur(n, n, 1);
  cur.data = flat;  // row-major reshape, matching vec() in sensing
  return run_stages(net, std::move(cur), cache, threads);
}

FeatureMap net_forward(const Network& net, const FeatureMap& input,
                       NetForwardCache* cache, int threads) {
  if (net.desc.has_fc)
    throw UsageError("net_forward: this network takes a measurement, not an "
                     "image");
  if (input.channels != 1)
    throw UsageError("net_forward: input must be single-channel");
  prepare_cache(net, cache);
  return run_stages(net, input, cache, threads);
}

NetworkGrads net_backward(const Network& net, const FeatureMap& grad_out,
                          const NetForwardCache& cache, int threads) {
  if (!cache.valid || cache.stages.size() != net.stages.size())
    throw UsageError("net_backward: cache does not match network");
  NetworkGrads grads;
  grads.stages.resize(net.stages.size());

  // pending[i] accumulates gradient a skip routes to the tensor entering
  // stage i; added once the backward walk reaches that point.
  std::vector<FeatureMap> pending(net.stages.size());
  std::vector<bool> has_pending(net.stages.size(), false);

  FeatureMap grad = grad_out;
  for (int i = static_cast<int>(net.stages.size()) - 1; i >= 0; --i) {
    for (const SkipSpec& s : net.desc.skips) {
      if (s.to_stage != i) continue;
      if (has_pending[s.from_stage]) {
        pending[s.from_stage] = residual_add(pending[s.from_stage], grad);
      } else {
        pending[s.from_stage] = grad;
        has_pending[s.from_stage] = true;
      }
    }
    grads.stages[i] = conv2d_backward(grad, net.stages[i], cache.stages[i],
                                      threads);
    grad = std::move(grads.stages[i].input);
    grads.stages[i].input = FeatureMap();  // only layer-param grads retained
    if (has_pending[i]) grad = residual_add(grad, pending[i]);
  }

  if (net.desc.has_fc) {
    if (grad.data.size() != static_cast<std::size_t>(net.fc.out_len))
      throw UsageError("net_backward: reshape gradient length mismatch");
    grads.fc = fc_backward(grad.data, net.fc, cache.fc);
  }
  return grads;
}

namespace {

double grad_check_impl(
    const Network& net, const FeatureMap& target,
    const std::function<FeatureMap(const Network&, NetForwardCache*)>& fwd,
    const GradCheckOptions& opts) {
  NetForwardCache cache;
  const FeatureMap pred = fwd(net, &cache);
  const LossResult loss = mse_loss(pred, target);
  NetworkGrads analytic = net_backward(net, loss.grad, cache);

  Network probe = net;  // mutated parameter-by-parameter below
  const std::vector<ParamSlot> slots = parameter_slots(probe, &analytic);
  std::size_t total = 0;
  for (const ParamSlot& s : slots) total += s.params->size();
  const bool exhaustive = total <= opts.max_exhaustive;
  std::mt19937_64 pick(opts.sample_seed);

  const auto loss_at = [&]() {
    return mse_loss(fwd(probe, nullptr), target).loss;
  };

  double worst = 0.0;
  for (const ParamSlot& slot : slots) {
    std::vector<std::size_t> indices;
    if (exhaustive || slot.params->size() <= opts.sample_per_tensor) {
      indices.resize(slot.params->size());
      for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    } else {
      std::uniform_int_distribution<std::size_t> dist(
          0, slot.params->size() - 1);
      for (std::size_t i = 0; i < opts.sample_per_tensor; ++i)
        indices.push_back(dist(pick));
    }
    for (std::size_t idx : indices) {
      double& p = (*slot.params)[idx];
      const double saved = p;
      p = saved + opts.h;
      const double up = loss_at();
      p = saved - opts.h;
      const double down = loss_at();
      p = saved;
      const double numeric = (up - down) / (2.0 * opts.h);
      const double a = (*slot.grads)[idx];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace

double grad_check(const Network& net, const Measurement& input,
                  const FeatureMap& target, const GradCheckOptions& opts) {
  return grad_check_impl(
      net, target,
      [&input](const Network& n, NetForwardCache* c) {
        return net_forward(n, input, c);
      },
      opts);
}

double grad_check(const Network& net, const FeatureMap& input,
                  const FeatureMap& target, const GradCheckOptions& opts) {
  return grad_check_impl(
      net, target,
      [&input](const Network& n, NetForwardCache* c) {
        return net_forward(n, input, c);
      },
      opts);
}

std::vector<ParamSlot> parameter_slots(Network& net, NetworkGrads* grads) {
  std::vector<ParamSlot> slots;
  if (net.desc.has_fc) {
    slots.push_back({&net.fc.weights, grads ? &grads->fc.weights : nullptr,
                     -1, false});
    slots.push_back({&net.fc.bias, grads ? &grads->fc.bias : nullptr, -1,
                     true});
  }
  for (std::size_t i = 0; i < net.stages.size(); ++i) {
    slots.push_back({&net.stages[i].weights,
                     grads ? &grads->stages[i].weights : nullptr,
                     static_cast<int>(i), false});
    slots.push_back({&net.stages[i].bias,
                     grads ? &grads->stages[i].bias : nullptr,
                     static_cast<int>(i), true});
  }
  return slots;
}

}  // namespace csr
