#include "csr/dataset.hpp"

#include <iostream>

#include "csr/pipeline.hpp"

namespace csr {

PatchDataset build_recon_dataset(const std::vector<GrayImage>& images,
                                 const MeasurementMatrix& phi, int size,
                                 int stride) {
  if (size != phi.patch_size)
    throw ConfigError("build_recon_dataset: patch size does not match the "
                      "measurement matrix");
  PatchDataset ds;
  ds.kind = DatasetKind::Reconstruction;
  ds.mr = phi.mr;
  ds.patch_size = size;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const GrayImage& img = images[i];
    if (img.height < size || img.width < size) {
      std::cerr << "warning: image " << i << " (" << img.height << "x"
                << img.width << ") smaller than patch size " << size
                << ", skipped\n";
      continue;
    }
    PatchGrid grid = extract_patches(img, size, stride);
    for (FeatureMap& patch : grid.patches) {
      ds.vec_inputs.push_back(sense_patch(phi, patch));
      ds.targets.push_back(std::move(patch));
    }
  }
  return ds;
}

PatchDataset build_blocky_dataset(const std::vector<GrayImage>& images,
                                  const Network& recon_model,
                                  const MeasurementMatrix& phi, int stride,
                                  int threads) {
  if (!recon_model.desc.has_fc)
    throw ConfigError("build_blocky_dataset: model is not a reconstruction "
                      "net");
  const int n = phi.patch_size;
  if (recon_model.desc.patch_size != n ||
      recon_model.desc.measurement_len() != phi.m)
    throw ConfigError("build_blocky_dataset: model does not match the "
                      "measurement matrix");
  if (recon_model.phi &&
      recon_model.phi->content_hash() != phi.content_hash())
    throw ConfigError("build_blocky_dataset: model embeds a different "
                      "measurement matrix");

  PatchDataset ds;
  ds.kind = DatasetKind::Deblock;
  ds.mr = phi.mr;
  ds.patch_size = n;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const GrayImage& img = images[i];
    if (img.height < n || img.width < n) {
      std::cerr << "warning: image " << i << " (" << img.height << "x"
                << img.width << ") smaller than patch size " << n
                << ", skipped\n";
      continue;
    }
    const PaddedImage padded = pad_to_multiple(img, n);
    const MeasurementGrid grid = measure_image(padded.image, phi);
    const GrayImage blocky =
        crop(reconstruct_grid(grid, recon_model, threads), img.height,
             img.width);
    PatchGrid degraded = extract_patches(blocky, n, stride);
    PatchGrid clean = extract_patches(img, n, stride);
    for (std::size_t p = 0; p < degraded.patches.size(); ++p) {
      ds.map_inputs.push_back(std::move(degraded.patches[p]));
      ds.targets.push_back(std::move(clean.patches[p]));
    }
  }
  return ds;
}

PatchDataset build_pair_dataset(const std::vector<GrayImage>& degraded,
                                const std::vector<GrayImage>& clean, int size,
                                int stride) {
  if (degraded.size() != clean.size())
    throw UsageError("build_pair_dataset: image lists differ in length");
  PatchDataset ds;
  ds.kind = DatasetKind::JpegDeblock;
  ds.patch_size = size;
  for (std::size_t i = 0; i < degraded.size(); ++i) {
    if (degraded[i].height != clean[i].height ||
        degraded[i].width != clean[i].width)
      throw UsageError("build_pair_dataset: pair " + std::to_string(i) +
                       " has mismatched shapes");
    if (clean[i].height < size || clean[i].width < size) {
      std::cerr << "warning: pair " << i << " smaller than patch size "
                << size << ", skipped\n";
      continue;
    }
    PatchGrid din = extract_patches(degraded[i], size, stride);
    PatchGrid tgt = extract_patches(clean[i], size, stride);
    for (std::size_t p = 0; p < din.patches.size(); ++p) {
      ds.map_inputs.push_back(std::move(din.patches[p]));
      ds.targets.push_back(std::move(tgt.patches[p]));
    }
  }
  return ds;
}

}  // namespace csr
