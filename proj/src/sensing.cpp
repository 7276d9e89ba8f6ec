#include "csr/sensing.hpp"

#include <cmath>
#include <cstring>

namespace csr {

int measurement_count(int patch_size, double mr) {
  if (patch_size < 1) throw ConfigError("patch size must be >= 1");
  if (!(mr > 0.0) || mr > 1.0)
    throw ConfigError("measurement rate must be in (0, 1]");
  const double n2 = static_cast<double>(patch_size) * patch_size;
  int m = static_cast<int>(std::floor(mr * n2));
  if (m < 1) throw ConfigError("measurement rate yields zero measurements");
  return m;
}

double MeasurementMatrix::max_orthonormality_residual() const {
  double worst = 0.0;
  for (int i = 0; i < m; ++i) {
    const double* ri = row(i);
    for (int j = i; j < m; ++j) {
      const double* rj = row(j);
      double dot = 0.0;
      for (int k = 0; k < n2; ++k) dot += ri[k] * rj[k];
      const double resid = std::fabs(dot - (i == j ? 1.0 : 0.0));
      if (resid > worst) worst = resid;
    }
  }
  return worst;
}

std::uint64_t MeasurementMatrix::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (double v : entries) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b)
      bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
    h = fnv1a64(bytes, sizeof bytes, h);
  }
  return h;
}

MeasurementMatrix gen_measurement_matrix(int patch_size, double mr,
                                         std::uint64_t seed) {
  MeasurementMatrix phi;
  phi.patch_size = patch_size;
  phi.mr = mr;
  phi.seed = seed;
  phi.m = measurement_count(patch_size, mr);
  phi.n2 = patch_size * patch_size;
  phi.entries.resize(static_cast<std::size_t>(phi.m) * phi.n2);

  GaussianSampler gauss(seed);
  for (double& v : phi.entries) v = gauss.next(1.0);

  // Modified Gram-Schmidt with a second orthogonalization pass per row;
  // one pass alone leaves ~1e-7 cross terms at m = n2 = 1024.
  for (int i = 0; i < phi.m; ++i) {
    double* ri = phi.row(i);
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < i; ++j) {
        const double* rj = phi.row(j);
        double dot = 0.0;
        for (int k = 0; k < phi.n2; ++k) dot += ri[k] * rj[k];
        for (int k = 0; k < phi.n2; ++k) ri[k] -= dot * rj[k];
      }
    }
    double norm2 = 0.0;
    for (int k = 0; k < phi.n2; ++k) norm2 += ri[k] * ri[k];
    if (!(norm2 > 1e-20))
      throw NumericError("sensing matrix row degenerated during "
                         "orthonormalization");
    const double inv = 1.0 / std::sqrt(norm2);
    for (int k = 0; k < phi.n2; ++k) ri[k] *= inv;
  }
  return phi;
}

Measurement sense_patch(const MeasurementMatrix& phi, const FeatureMap& patch) {
  if (patch.channels != 1 || patch.height != phi.patch_size ||
      patch.width != phi.patch_size)
    throw ConfigError("sense_patch: patch shape does not match matrix");
  Measurement y;
  y.values.resize(static_cast<std::size_t>(phi.m));
  for (int r = 0; r < phi.m; ++r) {
    const double* row = phi.row(r);
    double acc = 0.0;
    for (int k = 0; k < phi.n2; ++k) acc += row[k] * patch.data[k];
    y.values[r] = acc;
  }
  return y;
}

FeatureMap adjoint_reconstruct(const MeasurementMatrix& phi,
                               const Measurement& y) {
  if (y.values.size() != static_cast<std::size_t>(phi.m))
    throw ConfigError("adjoint_reconstruct: measurement length mismatch");
  FeatureMap x(phi.patch_size, phi.patch_size, 1);
  for (int r = 0; r < phi.m; ++r) {
    const double* row = phi.row(r);
    const double v = y.values[r];
    for (int k = 0; k < phi.n2; ++k) x.data[k] += row[k] * v;
  }
  return x;
}

}  // namespace csr
