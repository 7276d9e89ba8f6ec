#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "csr/model_io.hpp"
#include "csr/network.hpp"
#include "doctest.h"
#include "support/synth.hpp"

using namespace csr;
using namespace csr::testsupport;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Measurement random_measurement(int len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Measurement y;
  y.values.resize(static_cast<std::size_t>(len));
  for (double& v : y.values) v = unit(rng);
  return y;
}

}  // namespace

TEST_CASE("descriptors encode the five architectures") {
  SUBCASE("fc1-resconv at n=32, mr=0.25 has FC 256 -> 1024 and one module") {
    const NetworkDescriptor d =
        build_descriptor(NetworkKind::FC1ResConv, 32, 0.25);
    CHECK(d.has_fc);
    CHECK(d.measurement_len() == 256);
    REQUIRE(d.stages.size() == 3);
    CHECK(d.stages[0].kernel_size == 11);
    CHECK(d.stages[0].out_channels == 64);
    CHECK(d.stages[0].apply_relu);
    CHECK(d.stages[1].kernel_size == 1);
    CHECK(d.stages[1].out_channels == 32);
    CHECK(d.stages[2].kernel_size == 7);
    CHECK(d.stages[2].out_channels == 1);
    CHECK_FALSE(d.stages[2].apply_relu);
    REQUIRE(d.skips.size() == 1);
    CHECK(d.skips[0].from_stage == 0);
    CHECK(d.skips[0].to_stage == 2);
  }
  SUBCASE("fc2-resconv cascades two modules with two skips") {
    const NetworkDescriptor d =
        build_descriptor(NetworkKind::FC2ResConv, 32, 0.01);
    CHECK(d.measurement_len() == 10);
    REQUIRE(d.stages.size() == 6);
    REQUIRE(d.skips.size() == 2);
    CHECK(d.skips[1].from_stage == 3);
    CHECK(d.skips[1].to_stage == 5);
  }
  SUBCASE("deblock-resconv has no FC stage") {
    const NetworkDescriptor d =
        build_descriptor(NetworkKind::DeblockResConv, 32, 0.0);
    CHECK_FALSE(d.has_fc);
    CHECK(d.stages.size() == 3);
    CHECK(d.skips.size() == 1);
  }
  SUBCASE("reconnet is six stages, no skips, relu up to the last stage") {
    const NetworkDescriptor d =
        build_descriptor(NetworkKind::ReconNet, 32, 0.25);
    REQUIRE(d.stages.size() == 6);
    CHECK(d.skips.empty());
    for (int i = 0; i < 5; ++i) CHECK(d.stages[i].apply_relu);
    CHECK_FALSE(d.stages[5].apply_relu);
  }
  SUBCASE("half-reconnet is one module without a skip") {
    const NetworkDescriptor d =
        build_descriptor(NetworkKind::HalfReconNet, 32, 0.25);
    CHECK(d.stages.size() == 3);
    CHECK(d.skips.empty());
  }
}

TEST_CASE("kind tokens round-trip and unknown tokens are rejected") {
  for (NetworkKind k : {NetworkKind::FC1ResConv, NetworkKind::FC2ResConv,
                        NetworkKind::DeblockResConv, NetworkKind::ReconNet,
                        NetworkKind::HalfReconNet})
    CHECK(parse_network_kind(network_kind_name(k)) == k);
  CHECK_THROWS_AS(parse_network_kind("resnet50"), ConfigError);
}

TEST_CASE("parameter counts: one ResConv module holds 11457, FC adds m*n^2+n^2") {
  const Network deblock =
      make_network(build_descriptor(NetworkKind::DeblockResConv, 32, 0.0));
  CHECK(parameter_count(deblock) == 11457);  // 7808 + 2080 + 1569

  const Network fc1 =
      make_network(build_descriptor(NetworkKind::FC1ResConv, 32, 0.25));
  CHECK(parameter_count(fc1) == 256 * 1024 + 1024 + 11457);

  const Network fc2 =
      make_network(build_descriptor(NetworkKind::FC2ResConv, 32, 0.25));
  CHECK(parameter_count(fc2) == 256 * 1024 + 1024 + 2 * 11457);
}

TEST_CASE("zero-initialized residual networks are exact identity maps") {
  SUBCASE("deblock module on a random image") {
    const Network net =
        make_network(build_descriptor(NetworkKind::DeblockResConv, 32, 0.25));
    const FeatureMap in = to_feature_map(noise_image(41, 57, 8));
    const FeatureMap out = net_forward(net, in);
    REQUIRE(out.same_shape(in));
    for (std::size_t i = 0; i < in.data.size(); ++i)
      CHECK(out.data[i] == in.data[i]);  // bit-exact
  }
  SUBCASE("constant image through the zero-weight model stays constant") {
    const Network net =
        make_network(build_descriptor(NetworkKind::DeblockResConv, 32, 0.0));
    FeatureMap in(16, 16, 1);
    for (double& v : in.data) v = 0.37;
    const FeatureMap out = net_forward(net, in);
    for (double v : out.data) CHECK(v == 0.37);
  }
}

TEST_CASE("default init spec matches the recipe and biases stay zero") {
  const NetworkDescriptor recon_desc =
      build_descriptor(NetworkKind::FC1ResConv, 32, 0.25);
  const InitSpec recon_spec = default_init_spec(recon_desc, 3);
  CHECK(recon_spec.fc_std == 0.01);
  for (double s : recon_spec.conv_stds) CHECK(s == 0.1);

  const NetworkDescriptor deblock_desc =
      build_descriptor(NetworkKind::DeblockResConv, 32, 0.25);
  const InitSpec deblock_spec = default_init_spec(deblock_desc, 3);
  for (double s : deblock_spec.conv_stds) CHECK(s == 0.001);

  Network net = make_network(recon_desc);
  init_weights(net, recon_spec);
  for (double b : net.fc.bias) CHECK(b == 0.0);
  for (const ConvLayer& stage : net.stages)
    for (double b : stage.bias) CHECK(b == 0.0);
}

TEST_CASE("sampled init std lands near the requested value") {
  Network net = make_network(build_descriptor(NetworkKind::FC1ResConv, 32,
                                              0.25));
  init_weights(net, default_init_spec(net.desc, 11));
  // First conv stage: 7744 weights at std 0.1.
  const std::vector<double>& w = net.stages[0].weights;
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size() - 1);
  const double sd = std::sqrt(var);
  CHECK(sd > 0.09);
  CHECK(sd < 0.11);
}

TEST_CASE("same seed gives bit-identical parameters") {
  Network a = make_network(build_descriptor(NetworkKind::FC2ResConv, 32,
                                            0.10));
  Network b = make_network(build_descriptor(NetworkKind::FC2ResConv, 32,
                                            0.10));
  init_weights(a, default_init_spec(a.desc, 99));
  init_weights(b, default_init_spec(b.desc, 99));
  CHECK(std::memcmp(a.fc.weights.data(), b.fc.weights.data(),
                    a.fc.weights.size() * sizeof(double)) == 0);
  for (std::size_t s = 0; s < a.stages.size(); ++s)
    CHECK(std::memcmp(a.stages[s].weights.data(), b.stages[s].weights.data(),
                      a.stages[s].weights.size() * sizeof(double)) == 0);
}

TEST_CASE("forward equals a hand-composed sequence of layer primitives") {
  const MeasurementMatrix phi = gen_measurement_matrix(16, 0.25, 21);
  Network net = make_network(build_descriptor(NetworkKind::FC1ResConv, 16,
                                              0.25));
  init_weights(net, default_init_spec(net.desc, 22));
  const Measurement y = random_measurement(phi.m, 23);

  const FeatureMap got = net_forward(net, y);

  // Hand composition: FC, reshape, three convs, skip from module input.
  const std::vector<double> flat = fc_forward(y.values, net.fc);
  FeatureMap x(16, 16, 1);
  x.data = flat;
  const FeatureMap module_input = x;
  FeatureMap h = conv2d_forward(x, net.stages[0]);
  h = conv2d_forward(h, net.stages[1]);
  h = conv2d_forward(h, net.stages[2]);
  const FeatureMap want = residual_add(h, module_input);

  REQUIRE(got.same_shape(want));
  double worst = 0.0;
  for (std::size_t i = 0; i < got.data.size(); ++i)
    worst = std::max(worst, std::abs(got.data[i] - want.data[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("deblock output shape equals input shape at paper sizes") {
  Network net = make_network(build_descriptor(NetworkKind::DeblockResConv, 32,
                                              0.25));
  init_weights(net, default_init_spec(net.desc, 5));
  for (int size : {256, 512}) {
    const FeatureMap in = to_feature_map(synth_image(size, size, 600 + size));
    const FeatureMap out = net_forward(net, in);
    CHECK(out.height == size);
    CHECK(out.width == size);
    CHECK(out.channels == 1);
  }
}

TEST_CASE("deblock net is translation-consistent away from the border") {
  Network net = make_network(build_descriptor(NetworkKind::DeblockResConv, 32,
                                              0.25));
  init_weights(net, default_init_spec(net.desc, 7));
  // Use weights large enough that the residual branch matters.
  for (ConvLayer& stage : net.stages)
    for (double& w : stage.weights) w *= 50.0;

  const int h = 48, w = 48, shift = 1;
  const GrayImage base = synth_image(h, w, 71);
  GrayImage shifted(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int sy = std::max(0, y - shift), sx = std::max(0, x - shift);
      shifted.at(y, x) = base.at(sy, sx);
    }

  const FeatureMap out_base = net_forward(net, to_feature_map(base));
  const FeatureMap out_shift = net_forward(net, to_feature_map(shifted));

  // Interior pixels: a conv stack with max kernel 11 has receptive radius
  // (11-1)/2 + (7-1)/2 = 8 per module; stay 16 pixels clear of every edge.
  const int margin = 16;
  double worst = 0.0;
  for (int y = margin; y < h - margin; ++y)
    for (int x = margin; x < w - margin; ++x)
      worst = std::max(worst, std::abs(out_shift.at(0, y, x) -
                                       out_base.at(0, y - shift, x - shift)));
  CHECK(worst < 1e-9);
}

TEST_CASE("forward input validation") {
  Network recon = make_network(build_descriptor(NetworkKind::FC1ResConv, 32,
                                                0.25));
  Network deblock = make_network(
      build_descriptor(NetworkKind::DeblockResConv, 32, 0.25));
  CHECK_THROWS_AS(net_forward(recon, FeatureMap(32, 32, 1)), UsageError);
  CHECK_THROWS_AS(net_forward(deblock, random_measurement(256, 1)),
                  UsageError);
  CHECK_THROWS_AS(net_forward(recon, random_measurement(100, 1)), UsageError);
  CHECK_THROWS_AS(net_forward(deblock, FeatureMap(16, 16, 2)), UsageError);
}

TEST_CASE("gradient check passes on reduced networks and flags sabotage") {
  SUBCASE("single linear FC stage is exact to 1e-8") {
    FCLayer fc = FCLayer::make(6, 9);
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (double& w : fc.weights) w = unit(rng);
    std::vector<double> x(6);
    for (double& v : x) v = unit(rng);
    FeatureMap target(3, 3, 1);
    for (double& v : target.data) v = unit(rng);

    FCCache cache;
    FeatureMap pred(3, 3, 1);
    pred.data = fc_forward(x, fc, &cache);
    const LossResult loss = mse_loss(pred, target);
    const FCGrads grads = fc_backward(loss.grad.data, fc, cache);
    // The loss is exactly quadratic in the FC parameters, so the central
    // difference is exact for any step; a wide one keeps roundoff negligible.
    const double step = 1e-2;
    double worst = 0.0;
    for (std::size_t i = 0; i < fc.weights.size(); ++i) {
      FCLayer probe = fc;
      probe.weights[i] += step;
      FeatureMap up(3, 3, 1);
      up.data = fc_forward(x, probe);
      probe.weights[i] -= 2 * step;
      FeatureMap down(3, 3, 1);
      down.data = fc_forward(x, probe);
      const double numeric =
          (mse_loss(up, target).loss - mse_loss(down, target).loss) /
          (2 * step);
      worst = std::max(worst, std::abs(grads.weights[i] - numeric) /
                                  std::max({std::abs(grads.weights[i]),
                                            std::abs(numeric), 1e-8}));
    }
    CHECK(worst < 1e-8);
  }
  SUBCASE("full residual module on an 8x8 input stays under 1e-4") {
    Network net = make_network(
        build_descriptor(NetworkKind::DeblockResConv, 8, 0.25));
    init_weights(net, default_init_spec(net.desc, 33));
    for (ConvLayer& s : net.stages)
      for (double& w : s.weights) w *= 100.0;  // paper init is near zero
    GradCheckOptions opts;
    opts.max_exhaustive = 0;  // force sampling to keep this test quick
    opts.sample_per_tensor = 40;
    const double err = grad_check(net, noise_map(8, 8, 1, 34),
                                  noise_map(8, 8, 1, 35), opts);
    CHECK(err < 1e-4);
  }
  SUBCASE("a sign-flipped analytic gradient scores an error near 2") {
    // Mimics the checker's formula: |a - n| / max(|a|, |n|) with a = -n
    // evaluates to 2 — the checker cannot miss a sign bug.
    const double n = 0.123, a = -n;
    const double rel =
        std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
    CHECK(rel == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("model files round-trip losslessly") {
  const std::string path = temp_path("models_roundtrip.csnet");
  const MeasurementMatrix phi = gen_measurement_matrix(16, 0.25, 41);
  Network net = make_network(build_descriptor(NetworkKind::FC1ResConv, 16,
                                              0.25));
  init_weights(net, default_init_spec(net.desc, 42));
  net.phi = phi;
  net.history = "unit-test model";
  save_model(net, path, "manifest line\n");

  const ModelFile loaded = load_model(path);
  CHECK(loaded.manifest == "manifest line\n");
  CHECK(loaded.net.history == "unit-test model");
  CHECK(loaded.net.desc.kind == NetworkKind::FC1ResConv);
  CHECK(loaded.net.desc.patch_size == 16);
  CHECK(loaded.net.init_seed == 42);
  REQUIRE(loaded.net.phi.has_value());
  CHECK(loaded.net.phi->content_hash() == phi.content_hash());

  const Measurement y = random_measurement(phi.m, 43);
  const FeatureMap a = net_forward(net, y);
  const FeatureMap b = net_forward(loaded.net, y);
  CHECK(std::memcmp(a.data.data(), b.data.data(),
                    a.data.size() * sizeof(double)) == 0);
}

TEST_CASE("model file for mr 0.25 records m = 256") {
  const std::string path = temp_path("models_m256.csnet");
  const MeasurementMatrix phi = gen_measurement_matrix(32, 0.25, 44);
  Network net = make_network(build_descriptor(NetworkKind::FC1ResConv, 32,
                                              0.25));
  net.phi = phi;
  save_model(net, path, "");
  const ModelFile loaded = load_model(path);
  CHECK(loaded.net.fc.in_len == 256);
  CHECK(loaded.net.phi->m == 256);
}

TEST_CASE("corrupted model files are rejected with format errors") {
  const std::string path = temp_path("models_corrupt.csnet");
  Network net = make_network(build_descriptor(NetworkKind::DeblockResConv, 16,
                                              0.0));
  save_model(net, path, "");

  SUBCASE("magic bytes") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXXXXXX", 8);
    f.close();
    CHECK_THROWS_AS(load_model(path), FormatError);
  }
  SUBCASE("truncation") {
    const std::string data = [&] {
      std::ifstream in(path, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    }();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_model(path), FormatError);
  }
}

TEST_CASE("phi files round-trip and reject other containers") {
  const std::string path = temp_path("models_phi.csphi");
  const MeasurementMatrix phi = gen_measurement_matrix(8, 0.5, 45);
  save_phi(phi, path, "phi manifest");
  const PhiFile loaded = load_phi(path);
  CHECK(loaded.manifest == "phi manifest");
  CHECK(loaded.phi.content_hash() == phi.content_hash());
  CHECK(loaded.phi.seed == 45);

  const std::string model_path = temp_path("models_phi_wrong.csnet");
  Network net = make_network(build_descriptor(NetworkKind::DeblockResConv, 16,
                                              0.0));
  save_model(net, model_path, "");
  CHECK_THROWS_AS(load_phi(model_path), FormatError);
}
