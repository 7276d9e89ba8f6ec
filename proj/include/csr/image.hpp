#pragma once

#include <string>
#include <vector>

#include "csr/common.hpp"
#include "csr/feature_map.hpp"

namespace csr {

// Grayscale image with samples on [0,1], row-major.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int h, int w);

  double& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

// Binary PGM (P5) or PPM (P6), maxval 255. PPM is converted to luminance
// Y = 0.299 R + 0.587 G + 0.114 B, then scaled to [0,1]. Malformed input
// raises FormatError naming the byte offset.
GrayImage load_image(const std::string& path);

// Writes "P5\n<w> <h>\n255\n" + rows of bytes; samples are quantized with
// round(v*255) clamped to [0,255].
void save_image(const GrayImage& image, const std::string& path);

std::vector<unsigned char> quantize8(const GrayImage& image);

struct PatchGrid {
  int rows = 0;
  int cols = 0;
  int patch_size = 0;
  std::vector<FeatureMap> patches;  // row-major grid order
};

// Patches with top-left corners at multiples of `stride`, as many as fit:
// count per axis = floor((dim - size)/stride) + 1.
PatchGrid extract_patches(const GrayImage& image, int size, int stride);

// Inverse of extract_patches with stride == size.
GrayImage assemble_nonoverlapping(const PatchGrid& grid);

struct PaddedImage {
  GrayImage image;
  int orig_height = 0;
  int orig_width = 0;
};

// Reflect-pads (mirror including the edge pixel, folding when the pad exceeds
// the image) on the right/bottom up to the next multiple of n.
PaddedImage pad_to_multiple(const GrayImage& image, int n);

// Top-left crop; crop(pad_to_multiple(x, n).image, x.h, x.w) == x.
GrayImage crop(const GrayImage& image, int height, int width);

// Both images are quantized to 8-bit levels first; peak is the 8-bit maximum.
// Identical images return +infinity.
double psnr(const GrayImage& a, const GrayImage& b);

FeatureMap to_feature_map(const GrayImage& image);
GrayImage to_image(const FeatureMap& map);  // single-channel maps only
GrayImage clamp_image(GrayImage image);

}  // namespace csr
