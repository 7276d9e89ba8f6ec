#pragma once

#include <cstddef>
#include <vector>

#include "csr/common.hpp"

namespace csr {

// H x W x C tensor carrying images, activations and gradients.
// Layout is (channel, row, col) row-major: data[(c*H + y)*W + x].
struct FeatureMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int c) : height(h), width(w), channels(c) {
    if (h < 1 || w < 1 || c < 1)
      throw ConfigError("FeatureMap dimensions must be >= 1");
    data.assign(static_cast<std::size_t>(h) * w * c, 0.0);
  }

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  double* plane(int c) {
    return data.data() + static_cast<std::size_t>(c) * height * width;
  }
  const double* plane(int c) const {
    return data.data() + static_cast<std::size_t>(c) * height * width;
  }

  std::size_t size() const { return data.size(); }

  bool same_shape(const FeatureMap& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Elementwise sum. The backward of this op passes gradients through to both
// branches unchanged, which callers exploit directly.
FeatureMap residual_add(const FeatureMap& a, const FeatureMap& b);

}  // namespace csr
