#pragma once

#include <string>

#include "csr/network.hpp"
#include "csr/sensing.hpp"

namespace csr {

// Standalone measurement-matrix file ("CSPHIBIN"). The manifest is a
// free-form reproducibility record the CLI fills with flags and seeds.
void save_phi(const MeasurementMatrix& phi, const std::string& path,
              const std::string& manifest);
struct PhiFile {
  MeasurementMatrix phi;
  std::string manifest;
};
PhiFile load_phi(const std::string& path);

// Model file ("CSNETBIN"): descriptor, parameters, training history,
// manifest, and the paired measurement matrix for reconstruction models.
void save_model(const Network& net, const std::string& path,
                const std::string& manifest);
struct ModelFile {
  Network net;
  std::string manifest;
};
ModelFile load_model(const std::string& path);

}  // namespace csr
