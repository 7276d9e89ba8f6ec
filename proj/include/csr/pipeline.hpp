#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csr/image.hpp"
#include "csr/network.hpp"
#include "csr/sensing.hpp"

namespace csr {

// Captured data interchanged between `measure` and `restore`: one measurement
// per non-overlapping n x n tile, row-major. orig_height/orig_width remember
// the pre-padding size so restoration can crop back.
struct MeasurementGrid {
  int rows = 0;
  int cols = 0;
  int patch_size = 0;
  double mr = 0.0;
  int m = 0;
  std::uint64_t phi_hash = 0;
  int orig_height = 0;
  int orig_width = 0;
  std::vector<Measurement> cells;  // rows*cols entries
};

// The image must already be padded to a multiple of phi.patch_size.
MeasurementGrid measure_image(const GrayImage& image,
                              const MeasurementMatrix& phi);

// Per-cell forward pass, non-overlapping assembly, clamp to [0,1]. The model
// must match the grid's (n, m) and the phi hash when the model embeds one.
// pass_counter, when given, is incremented once per network forward pass.
GrayImage reconstruct_grid(const MeasurementGrid& grid, const Network& recon,
                           int threads = 1, std::uint64_t* pass_counter = nullptr);

// One whole-image forward pass through the de-block net, clamped to [0,1].
GrayImage deblock_image(const GrayImage& image, const Network& deblock,
                        int threads = 1, std::uint64_t* pass_counter = nullptr);

struct RestoreResult {
  GrayImage blocky;    // assembled reconstruction, cropped to original size
  GrayImage restored;  // after de-blocking, cropped to original size
  std::uint64_t patch_passes = 0;
  std::uint64_t deblock_passes = 0;
  double recon_seconds = 0.0;
  double deblock_seconds = 0.0;
};

// Full restoration: pad, measure, reconstruct every patch, de-block, crop.
// recon must embed its measurement matrix. Lineage (shared n, and shared
// measurement rate when the de-block model is tagged with one) is enforced.
// skip_deblock leaves `restored` equal to `blocky` and runs no de-block pass.
RestoreResult restore(const GrayImage& image, const Network& recon,
                      const Network& deblock, int threads = 1,
                      bool skip_deblock = false);

// Same, but from previously captured measurements.
RestoreResult restore_from_grid(const MeasurementGrid& grid,
                                const Network& recon, const Network& deblock,
                                int threads = 1, bool skip_deblock = false);

void save_grid(const MeasurementGrid& grid, const std::string& path,
               const std::string& manifest);
struct GridFile {
  MeasurementGrid grid;
  std::string manifest;
};
GridFile load_grid(const std::string& path);

}  // namespace csr
