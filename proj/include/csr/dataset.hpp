#pragma once

#include <vector>

#include "csr/image.hpp"
#include "csr/network.hpp"
#include "csr/sensing.hpp"

namespace csr {

enum class DatasetKind {
  Reconstruction,  // inputs are measurements
  Deblock,         // inputs are blocky reconstructions (feature maps)
  JpegDeblock,     // inputs are externally degraded images (feature maps)
};

// Sample i is (vec_inputs[i] | map_inputs[i], targets[i]); exactly one input
// vector is populated, per the kind.
struct PatchDataset {
  DatasetKind kind = DatasetKind::Reconstruction;
  double mr = 0.0;
  int patch_size = 0;
  std::vector<Measurement> vec_inputs;
  std::vector<FeatureMap> map_inputs;
  std::vector<FeatureMap> targets;

  std::size_t size() const { return targets.size(); }
};

// Overlapping patches at `stride` from every image; input = phi * vec(patch),
// target = the patch. Images smaller than the patch are skipped with a
// warning on stderr.
PatchDataset build_recon_dataset(const std::vector<GrayImage>& images,
                                 const MeasurementMatrix& phi, int size,
                                 int stride);

// Tiles each image non-overlapping (stride = n), senses and reconstructs
// every tile with recon_model, assembles the blocky image, then pairs
// overlapping blocky patches at `stride` with the co-located clean patches.
PatchDataset build_blocky_dataset(const std::vector<GrayImage>& images,
                                  const Network& recon_model,
                                  const MeasurementMatrix& phi, int stride,
                                  int threads = 1);

// Co-located patch pairs from externally degraded/clean image pairs.
PatchDataset build_pair_dataset(const std::vector<GrayImage>& degraded,
                                const std::vector<GrayImage>& clean, int size,
                                int stride);

}  // namespace csr
