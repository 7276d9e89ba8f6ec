#include "csr/pipeline.hpp"

#include <chrono>

#include "csr/binio.hpp"

namespace csr {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

MeasurementGrid measure_image(const GrayImage& image,
                              const MeasurementMatrix& phi) {
  const int n = phi.patch_size;
  if (image.height % n != 0 || image.width % n != 0)
    throw UsageError("measure_image: image size must be a multiple of the "
                     "patch size (pad first)");
  MeasurementGrid grid;
  grid.rows = image.height / n;
  grid.cols = image.width / n;
  grid.patch_size = n;
  grid.mr = phi.mr;
  grid.m = phi.m;
  grid.phi_hash = phi.content_hash();
  grid.orig_height = image.height;
  grid.orig_width = image.width;
  grid.cells.reserve(static_cast<std::size_t>(grid.rows) * grid.cols);
  const PatchGrid tiles = extract_patches(image, n, n);
  for (const FeatureMap& tile : tiles.patches)
    grid.cells.push_back(sense_patch(phi, tile));
  return grid;
}

GrayImage reconstruct_grid(const MeasurementGrid& grid, const Network& recon,
                           int threads, std::uint64_t* pass_counter) {
  if (!recon.desc.has_fc)
    throw ConfigError("reconstruct_grid: model is not a reconstruction net");
  if (recon.desc.patch_size != grid.patch_size ||
      recon.desc.measurement_len() != grid.m)
    throw ConfigError("reconstruct_grid: model patch geometry does not match "
                      "the grid");
  if (recon.phi && recon.phi->content_hash() != grid.phi_hash)
    throw ConfigError("reconstruct_grid: grid was captured with a different "
                      "measurement matrix than the model embeds");
  if (grid.cells.size() != static_cast<std::size_t>(grid.rows) * grid.cols)
    throw ConfigError("reconstruct_grid: incomplete grid");

  PatchGrid patches;
  patches.rows = grid.rows;
  patches.cols = grid.cols;
  patches.patch_size = grid.patch_size;
  patches.patches.assign(grid.cells.size(), FeatureMap());
  // One forward pass per cell, each writing its own slot: output does not
  // depend on the thread count.
  parallel_for(grid.cells.size(), threads, [&](std::size_t i) {
    patches.patches[i] = net_forward(recon, grid.cells[i]);
  });
  if (pass_counter) *pass_counter += grid.cells.size();
  return clamp_image(assemble_nonoverlapping(patches));
}

GrayImage deblock_image(const GrayImage& image, const Network& deblock,
                        int threads, std::uint64_t* pass_counter) {
  if (deblock.desc.has_fc)
    throw ConfigError("deblock_image: model is not a de-block net");
  const FeatureMap out = net_forward(deblock, to_feature_map(image), nullptr,
                                     threads);
  if (pass_counter) *pass_counter += 1;
  return clamp_image(to_image(out));
}

RestoreResult restore_from_grid(const MeasurementGrid& grid,
                                const Network& recon, const Network& deblock,
                                int threads, bool skip_deblock) {
  if (recon.desc.patch_size != grid.patch_size)
    throw ConfigError("restore: reconstruction model patch size does not "
                      "match the capture");
  if (!skip_deblock) {
    if (deblock.desc.has_fc)
      throw ConfigError("restore: de-block model has the wrong architecture");
    if (deblock.desc.patch_size != recon.desc.patch_size)
      throw ConfigError("restore: de-block model trained for a different "
                        "patch size");
    if (deblock.desc.mr > 0.0 && deblock.desc.mr != recon.desc.mr)
      throw ConfigError("restore: de-block model trained for a different "
                        "measurement rate");
  }

  RestoreResult result;
  const auto t0 = std::chrono::steady_clock::now();
  GrayImage blocky = reconstruct_grid(grid, recon, threads,
                                      &result.patch_passes);
  result.recon_seconds = seconds_since(t0);

  GrayImage restored = blocky;
  if (!skip_deblock) {
    const auto t1 = std::chrono::steady_clock::now();
    restored = deblock_image(blocky, deblock, threads, &result.deblock_passes);
    result.deblock_seconds = seconds_since(t1);
  }

  const std::uint64_t expected =
      static_cast<std::uint64_t>(grid.rows) * grid.cols;
  if (result.patch_passes != expected ||
      result.deblock_passes != (skip_deblock ? 0u : 1u))
    throw UsageError("restore: forward-pass counter mismatch (internal "
                     "invariant violated)");

  result.blocky = crop(std::move(blocky), grid.orig_height, grid.orig_width);
  result.restored =
      crop(std::move(restored), grid.orig_height, grid.orig_width);
  return result;
}

RestoreResult restore(const GrayImage& image, const Network& recon,
                      const Network& deblock, int threads, bool skip_deblock) {
  if (!recon.phi)
    throw ConfigError("restore: reconstruction model has no embedded "
                      "measurement matrix");
  PaddedImage padded = pad_to_multiple(image, recon.phi->patch_size);
  MeasurementGrid grid = measure_image(padded.image, *recon.phi);
  grid.orig_height = padded.orig_height;
  grid.orig_width = padded.orig_width;
  return restore_from_grid(grid, recon, deblock, threads, skip_deblock);
}

namespace {
constexpr char kGridMagic[9] = "CSGRDBIN";
constexpr std::uint32_t kGridVersion = 1;
}  // namespace

void save_grid(const MeasurementGrid& grid, const std::string& path,
               const std::string& manifest) {
  ByteWriter w;
  w.bytes(kGridMagic, 8);
  w.u32(kGridVersion);
  w.str(manifest);
  w.u32(static_cast<std::uint32_t>(grid.rows));
  w.u32(static_cast<std::uint32_t>(grid.cols));
  w.u32(static_cast<std::uint32_t>(grid.patch_size));
  w.f64(grid.mr);
  w.u32(static_cast<std::uint32_t>(grid.m));
  w.u64(grid.phi_hash);
  w.u32(static_cast<std::uint32_t>(grid.orig_height));
  w.u32(static_cast<std::uint32_t>(grid.orig_width));
  for (const Measurement& cell : grid.cells) {
    if (cell.values.size() != static_cast<std::size_t>(grid.m))
      throw ConfigError("save_grid: cell length mismatch");
    for (double v : cell.values) w.f64(v);
  }
  write_file_bytes(path, w.data());
}

GridFile load_grid(const std::string& path) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic(kGridMagic);
  if (r.u32() != kGridVersion) r.fail("version", "unsupported version");
  GridFile file;
  file.manifest = r.str("manifest");
  MeasurementGrid& g = file.grid;
  g.rows = static_cast<int>(r.u32());
  g.cols = static_cast<int>(r.u32());
  g.patch_size = static_cast<int>(r.u32());
  g.mr = r.f64();
  g.m = static_cast<int>(r.u32());
  g.phi_hash = r.u64();
  g.orig_height = static_cast<int>(r.u32());
  g.orig_width = static_cast<int>(r.u32());
  if (g.rows < 1 || g.cols < 1 || g.rows > 65536 || g.cols > 65536)
    r.fail("grid shape", "value out of range");
  if (g.patch_size < 1 || g.patch_size > 4096)
    r.fail("patch size", "value out of range");
  if (g.m < 1 || g.m > g.patch_size * g.patch_size)
    r.fail("measurement length", "value out of range");
  if (g.orig_height < 1 || g.orig_height > g.rows * g.patch_size ||
      g.orig_width < 1 || g.orig_width > g.cols * g.patch_size)
    r.fail("original size", "value out of range");
  g.cells.assign(static_cast<std::size_t>(g.rows) * g.cols, Measurement{});
  for (Measurement& cell : g.cells) {
    cell.values.resize(static_cast<std::size_t>(g.m));
    for (double& v : cell.values) v = r.f64();
  }
  r.expect_consumed();
  return file;
}

}  // namespace csr
