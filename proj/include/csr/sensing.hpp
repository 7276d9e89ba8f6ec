#pragma once

#include <cstdint>
#include <vector>

#include "csr/common.hpp"
#include "csr/feature_map.hpp"

namespace csr {

// Number of measurements for a patch of size n x n at measurement rate mr.
int measurement_count(int patch_size, double mr);

// Row-orthonormalized Gaussian sensing matrix, m x n^2, row-major.
struct MeasurementMatrix {
  int m = 0;
  int n2 = 0;          // n * n, length of a vectorized patch
  int patch_size = 0;  // n
  double mr = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> entries;  // m rows of n2 entries

  double* row(int r) { return entries.data() + static_cast<std::size_t>(r) * n2; }
  const double* row(int r) const {
    return entries.data() + static_cast<std::size_t>(r) * n2;
  }

  // max |(phi phi^T - I)_{ij}| over all i, j.
  double max_orthonormality_residual() const;

  // FNV-1a over the raw little-endian bytes of the entries.
  std::uint64_t content_hash() const;
};

struct Measurement {
  std::vector<double> values;  // length m
};

// Draw m rows of i.i.d. N(0,1) entries from `seed`, then orthonormalize the
// rows with modified Gram-Schmidt (two passes). Throws NumericError if a row
// degenerates, ConfigError on invalid patch_size/mr.
MeasurementMatrix gen_measurement_matrix(int patch_size, double mr,
                                         std::uint64_t seed);

// y = phi * vec(x). The patch must be single-channel patch_size x patch_size;
// vectorization is row-major (matching FeatureMap storage).
Measurement sense_patch(const MeasurementMatrix& phi, const FeatureMap& patch);

// x0 = phi^T * y, reshaped to a patch. The transpose-based starting point the
// reconstruction networks are trained to improve on.
FeatureMap adjoint_reconstruct(const MeasurementMatrix& phi,
                               const Measurement& y);

}  // namespace csr
