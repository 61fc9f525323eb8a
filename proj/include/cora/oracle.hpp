#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cora/device_model.hpp"

namespace cora {

struct OracleConfig {
  double noise_cv = 0.02;      // coefficient of variation of service capacity
  double duration_s = 1.0;
  double epoch_s = 0.01;
  uint64_t queue_bound = 4096; // packets per lock queue
  uint64_t seed = 1;
};

struct OracleResult {
  double throughput = 0;       // processed pps
  uint64_t offered = 0;
  uint64_t processed = 0;
  uint64_t dropped = 0;
  uint64_t max_queue = 0;
};

// Synthetic measurement source standing in for hardware micro-benchmarks.
// Service capacities come from the profile's curves; per-epoch multiplicative
// noise is seeded and deterministic.
OracleResult synth_profile_oracle(const DeviceProfile& profile,
                                  const ProgramIR& ir,
                                  const std::vector<OffloadedBlock>& offloaded,
                                  double offered_pps,
                                  const OracleConfig& cfg);

// Noisy single-curve measurement at a given intensity, for fit tests.
double synth_curve_sample(const RooflineParams& truth, double intensity,
                          double noise_cv, uint64_t seed);

struct TransparentModel {
  std::map<std::string, RooflineParams> curves;  // keyed "tier/op"
  double mean_rel_error = 0;
};

// Harmonic-mean model for transparent-memory devices: per-class fits composed
// with the all-shared rule. Intensities are user-supplied per class; a
// "locality" key is rejected as unsupported.
TransparentModel fit_transparent_model(
    const std::map<std::string, std::vector<std::pair<double, double>>>& samples);

double transparent_eval(const TransparentModel& model,
                        const std::map<std::string, double>& intensity_per_class);

}  // namespace cora
