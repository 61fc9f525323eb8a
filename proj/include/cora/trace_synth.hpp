#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cora/trace.hpp"

namespace cora {

struct BranchSpec {
  std::string name;
  double ratio = 0;  // share of total volume, ratios sum to 1
  std::map<std::string, uint64_t> fields;  // fixed field values tagging the branch
  uint64_t max_flow_volume = 0;            // 0 = uncapped
};

struct TraceSynthSpec {
  uint64_t flow_count = 0;
  std::vector<BranchSpec> branches;
  std::string distribution = "pareto";  // pareto|exponential|lognormal|bimodal|trimodal|empirical
  double pareto_shape = 1.5;
  double mean_volume = 100;   // mean flow volume in packets/s
  std::vector<double> modes;          // bimodal/trimodal mode means
  std::vector<double> mode_weights;
  std::string empirical_cdf_file;     // rows "volume,cum_prob"
  uint32_t packet_size_bytes = 256;
  uint64_t total_volume = 0;          // 0 = keep sampled scale

  static TraceSynthSpec load_json(const std::string& path);
};

TrafficTrace synthesize_trace(const TraceSynthSpec& spec, uint64_t seed);

}  // namespace cora
