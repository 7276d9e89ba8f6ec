#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace csr {

// Error taxonomy. The CLI maps these to exit codes:
// ConfigError/UsageError -> 2, NumericError -> 3, FormatError -> 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t state = 1469598103934665603ull);

// Seeded Gaussian sampler: mt19937_64 plus Box-Muller, so the byte stream
// does not depend on the standard library's normal_distribution.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

  double next(double stddev = 1.0);
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Splits [0, count) into at most `threads` contiguous chunks and runs them on
// worker threads. Callers must write only to per-index slots; with that rule
// results do not depend on the thread count.
void parallel_chunks(std::size_t count, int threads,
                     const std::function<void(std::size_t, std::size_t)>& fn);
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace csr
