#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csr/nn.hpp"
#include "csr/sensing.hpp"

namespace csr {

enum class NetworkKind : std::uint32_t {
  FC1ResConv = 1,
  FC2ResConv = 2,
  DeblockResConv = 3,
  ReconNet = 4,
  HalfReconNet = 5,
};

// Token used on the command line and in serialized files.
const char* network_kind_name(NetworkKind kind);
NetworkKind parse_network_kind(const std::string& token);
bool network_kind_has_fc(NetworkKind kind);

struct ConvStageSpec {
  int kernel_size = 0;
  int out_channels = 0;
  bool apply_relu = false;
};

// Adds the tensor entering stage `from_stage` to the output of `to_stage`.
struct SkipSpec {
  int from_stage = 0;
  int to_stage = 0;
};

struct NetworkDescriptor {
  NetworkKind kind = NetworkKind::FC1ResConv;
  bool has_fc = false;
  int patch_size = 0;   // n
  double mr = 0.0;      // measurement rate; 0 for the de-block net
  std::vector<ConvStageSpec> stages;
  std::vector<SkipSpec> skips;

  int measurement_len() const;  // m, reconstruction descriptors only
  void validate() const;        // throws ConfigError on broken invariants
};

NetworkDescriptor build_descriptor(NetworkKind kind, int patch_size, double mr);

struct Network {
  NetworkDescriptor desc;
  FCLayer fc;                    // meaningful only when desc.has_fc
  std::vector<ConvLayer> stages;
  std::uint64_t init_seed = 0;
  std::string history;           // free-form training provenance tag
  std::optional<MeasurementMatrix> phi;  // paired matrix, reconstruction nets
};

// Zero-weight network with parameter tensors shaped per the descriptor.
Network make_network(const NetworkDescriptor& desc);

struct InitSpec {
  double fc_std = 0.0;             // ignored when the net has no FC stage
  std::vector<double> conv_stds;   // one per conv stage
  std::uint64_t seed = 0;
};

// Reconstruction nets: FC std 0.01, conv std 0.1. De-block net: all 0.001.
InitSpec default_init_spec(const NetworkDescriptor& desc, std::uint64_t seed);

// Gaussian weights per stage from one seeded stream (FC first, then stages in
// order); biases stay zero.
void init_weights(Network& net, const InitSpec& spec);

std::size_t parameter_count(const Network& net);

struct NetForwardCache {
  FCCache fc;
  std::vector<ConvCache> stages;
  bool valid = false;
};

// Reconstruction forward: FC, reshape to n x n, conv stages with skips.
FeatureMap net_forward(const Network& net, const Measurement& y,
                       NetForwardCache* cache = nullptr, int threads = 1);
// Map-input forward for descriptors without an FC stage (any input size).
FeatureMap net_forward(const Network& net, const FeatureMap& input,
                       NetForwardCache* cache = nullptr, int threads = 1);

struct NetworkGrads {
  FCGrads fc;
  std::vector<ConvGrads> stages;
};

NetworkGrads net_backward(const Network& net, const FeatureMap& grad_out,
                          const NetForwardCache& cache, int threads = 1);

// Flat views over every parameter tensor, in a fixed order shared with the
// matching gradient tensors; the optimizer walks these in lockstep.
struct ParamSlot {
  std::vector<double>* params = nullptr;
  const std::vector<double>* grads = nullptr;
  int stage = -1;      // -1 = FC stage
  bool is_bias = false;
};
std::vector<ParamSlot> parameter_slots(Network& net, NetworkGrads* grads);

// Central-difference verification of the analytic gradients on one
// (input, target) pair under the squared-norm loss. Checks every parameter
// while the total count stays within max_exhaustive, otherwise a seeded
// sample of sample_per_tensor entries per tensor. Returns the worst
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
struct GradCheckOptions {
  double h = 1e-5;
  std::size_t max_exhaustive = 50000;
  std::size_t sample_per_tensor = 100;
  std::uint64_t sample_seed = 12345;
};
double grad_check(const Network& net, const Measurement& input,
                  const FeatureMap& target, const GradCheckOptions& opts = {});
double grad_check(const Network& net, const FeatureMap& input,
                  const FeatureMap& target, const GradCheckOptions& opts = {});

}  // namespace csr
