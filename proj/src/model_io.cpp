#include "csr/model_io.hpp"

#include <fstream>

#include "csr/binio.hpp"

namespace csr {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open file");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw FormatError(path + ": read failure");
  return data;
}

void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open file for writing");
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError(path + ": short write");
}

namespace {

constexpr char kPhiMagic[9] = "CSPHIBIN";
constexpr char kModelMagic[9] = "CSNETBIN";
constexpr std::uint32_t kVersion = 1;

// Dimension sanity caps; reject absurd headers before allocating.
constexpr std::uint32_t kMaxDim = 1u << 20;

void write_phi_block(ByteWriter& w, const MeasurementMatrix& phi) {
  w.u32(static_cast<std::uint32_t>(phi.patch_size));
  w.f64(phi.mr);
  w.u64(phi.seed);
  w.u32(static_cast<std::uint32_t>(phi.m));
  w.u32(static_cast<std::uint32_t>(phi.n2));
  for (double v : phi.entries) w.f64(v);
}

MeasurementMatrix read_phi_block(ByteReader& r) {
  MeasurementMatrix phi;
  phi.patch_size = static_cast<int>(r.u32());
  phi.mr = r.f64();
  phi.seed = r.u64();
  phi.m = static_cast<int>(r.u32());
  phi.n2 = static_cast<int>(r.u32());
  if (phi.patch_size < 1 || phi.patch_size > 4096)
    r.fail("phi patch size", "value out of range");
  if (phi.n2 != phi.patch_size * phi.patch_size)
    r.fail("phi n2", "inconsistent with patch size");
  if (phi.m < 1 || phi.m > phi.n2) r.fail("phi m", "value out of range");
  if (!(phi.mr > 0.0) || phi.mr > 1.0)
    r.fail("phi measurement rate", "value out of range");
  if (measurement_count(phi.patch_size, phi.mr) != phi.m)
    r.fail("phi m", "inconsistent with measurement rate");
  phi.entries.resize(static_cast<std::size_t>(phi.m) * phi.n2);
  for (double& v : phi.entries) v = r.f64();
  return phi;
}

}  // namespace

void save_phi(const MeasurementMatrix& phi, const std::string& path,
              const std::string& manifest) {
  ByteWriter w;
  w.bytes(kPhiMagic, 8);
  w.u32(kVersion);
  w.str(manifest);
  write_phi_block(w, phi);
  write_file_bytes(path, w.data());
}

PhiFile load_phi(const std::string& path) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic(kPhiMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion) r.fail("version", "unsupported version");
  PhiFile file;
  file.manifest = r.str("manifest");
  file.phi = read_phi_block(r);
  r.expect_consumed();
  return file;
}

void save_model(const Network& net, const std::string& path,
                const std::string& manifest) {
  net.desc.validate();
  ByteWriter w;
  w.bytes(kModelMagic, 8);
  w.u32(kVersion);
  w.str(manifest);

  const NetworkDescriptor& d = net.desc;
  w.u32(static_cast<std::uint32_t>(d.kind));
  w.u32(static_cast<std::uint32_t>(d.patch_size));
  w.f64(d.mr);
  w.u8(d.has_fc ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(d.stages.size()));
  for (const ConvStageSpec& s : d.stages) {
    w.u32(static_cast<std::uint32_t>(s.kernel_size));
    w.u32(static_cast<std::uint32_t>(s.out_channels));
    w.u8(s.apply_relu ? 1 : 0);
  }
  w.u32(static_cast<std::uint32_t>(d.skips.size()));
  for (const SkipSpec& s : d.skips) {
    w.u32(static_cast<std::uint32_t>(s.from_stage));
    w.u32(static_cast<std::uint32_t>(s.to_stage));
  }

  w.u64(net.init_seed);
  w.str(net.history);

  if (d.has_fc) {
    w.u32(static_cast<std::uint32_t>(net.fc.in_len));
    w.u32(static_cast<std::uint32_t>(net.fc.out_len));
    for (double v : net.fc.weights) w.f64(v);
    for (double v : net.fc.bias) w.f64(v);
  }
  for (const ConvLayer& s : net.stages) {
    for (double v : s.weights) w.f64(v);
    for (double v : s.bias) w.f64(v);
  }

  w.u8(net.phi.has_value() ? 1 : 0);
  if (net.phi) write_phi_block(w, *net.phi);

  write_file_bytes(path, w.data());
}

ModelFile load_model(const std::string& path) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic(kModelMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion) r.fail("version", "unsupported version");

  ModelFile file;
  file.manifest = r.str("manifest");

  NetworkDescriptor d;
  const std::uint32_t kind = r.u32();
  if (kind < 1 || kind > 5) r.fail("network kind", "unknown value");
  d.kind = static_cast<NetworkKind>(kind);
  d.patch_size = static_cast<int>(r.u32());
  if (d.patch_size < 1 || d.patch_size > 4096)
    r.fail("patch size", "value out of range");
  d.mr = r.f64();
  d.has_fc = r.u8() != 0;
  const std::uint32_t stage_count = r.u32();
  if (stage_count < 1 || stage_count > 64)
    r.fail("stage count", "value out of range");
  for (std::uint32_t i = 0; i < stage_count; ++i) {
    ConvStageSpec s;
    s.kernel_size = static_cast<int>(r.u32());
    s.out_channels = static_cast<int>(r.u32());
    s.apply_relu = r.u8() != 0;
    if (s.kernel_size < 1 || s.kernel_size > 63 ||
        s.out_channels < 1 ||
        static_cast<std::uint32_t>(s.out_channels) > kMaxDim)
      r.fail("conv stage", "shape out of range");
    d.stages.push_back(s);
  }
  const std::uint32_t skip_count = r.u32();
  if (skip_count > 64) r.fail("skip count", "value out of range");
  for (std::uint32_t i = 0; i < skip_count; ++i) {
    SkipSpec s;
    s.from_stage = static_cast<int>(r.u32());
    s.to_stage = static_cast<int>(r.u32());
    d.skips.push_back(s);
  }
  try {
    d.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path + ": invalid descriptor: " + e.what());
  }

  Network net = make_network(d);
  net.init_seed = r.u64();
  net.history = r.str("history");

  if (d.has_fc) {
    const std::uint32_t in_len = r.u32(), out_len = r.u32();
    if (in_len != static_cast<std::uint32_t>(net.fc.in_len) ||
        out_len != static_cast<std::uint32_t>(net.fc.out_len))
      r.fail("fc shape", "inconsistent with descriptor");
    for (double& v : net.fc.weights) v = r.f64();
    for (double& v : net.fc.bias) v = r.f64();
  }
  for (ConvLayer& s : net.stages) {
    for (double& v : s.weights) v = r.f64();
    for (double& v : s.bias) v = r.f64();
  }

  if (r.u8()) {
    MeasurementMatrix phi = read_phi_block(r);
    if (d.has_fc &&
        (phi.patch_size != d.patch_size || phi.m != d.measurement_len()))
      r.fail("embedded phi", "inconsistent with descriptor");
    net.phi = std::move(phi);
  }
  r.expect_consumed();

  file.net = std::move(net);
  return file;
}

}  // namespace csr
