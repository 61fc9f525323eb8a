#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cora/device_model.hpp"
#include "cora/trace.hpp"

namespace cora {

inline constexpr const char* kCpuPlacement = "cpu";

struct PerformanceTarget {
  double target_rate = 0;  // packets/s
};

struct DistributorTable {
  std::string state;
  std::string key;  // flow group domain
  std::map<std::string, std::string> entries;  // aggregate id -> device
};

struct HeaderTag {
  std::string value;       // carried value id
  std::string from_block;  // producer (on NIC)
  std::string to_block;    // consumer (on CPU)
};

struct GeneratedArtifacts {
  std::vector<LockSpec> locks;
  std::vector<DistributorTable> distributors;
  std::vector<HeaderTag> header_tags;
};

struct ResourceUsage {
  std::map<std::string, uint64_t> tier_bytes;
  double pcie_bytes_per_s = 0;  // each direction
  uint64_t accel_entries = 0;
};

struct ResourceViolation {
  std::string resource;
  double used = 0;
  double limit = 0;
};

struct Assignment {
  BlockAggregate pair;
  std::string placement;  // tier name or kCpuPlacement
};

struct AllocationPlan {
  std::vector<Assignment> assignments;
  double cpu_objective = 0;  // sum of V_f * |I_s| over CPU pairs
  GeneratedArtifacts generated;
  ResourceUsage resource_usage;
  double predicted_nic_pps = 0;
  bool meets_target = true;       // false = best-effort plan with shortfall
  double shortfall_pps = 0;
  size_t candidates_evaluated = 0;

  std::string to_json() const;
};

struct PlanEvaluation {
  bool feasible = false;
  double nic_throughput = 0;
  ResourceUsage usage;
  std::vector<ResourceViolation> violations;
  bool drop_risk = false;
};

// Feasibility of a complete assignment at the target rate. Shared by the
// heuristic planner and the brute-force oracle; the oracle checks the search,
// not the model.
PlanEvaluation evaluate_plan(const ProgramIR& ir, const TrafficTrace& trace,
                             const DeviceProfile& profile,
                             const PerformanceTarget& target,
                             const std::vector<Assignment>& assignments);

std::vector<ResourceViolation> check_resources(const ResourceUsage& usage,
                                               const DeviceProfile& profile);

double cpu_objective_of(const ProgramIR& ir, const std::vector<Assignment>& assignments);

AllocationPlan plan(const ProgramIR& ir, const TrafficTrace& trace,
                    const DeviceProfile& profile, const PerformanceTarget& target);

// Exhaustive oracle over every placement combination; instances capped.
AllocationPlan brute_force_plan(const ProgramIR& ir, const TrafficTrace& trace,
                                const DeviceProfile& profile,
                                const PerformanceTarget& target,
                                size_t max_decision_vars = 10);

// Baseline that places whole flows (all their blocks together) by volume.
AllocationPlan flow_partition_plan(const ProgramIR& ir, const TrafficTrace& trace,
                                   const DeviceProfile& profile,
                                   const PerformanceTarget& target);

GeneratedArtifacts generate_artifacts(const ProgramIR& ir, const DeviceProfile& profile,
                                      const std::vector<Assignment>& assignments);

// Fraction of total volume*instructions executed on the NIC.
double offloading_ratio(const ProgramIR& ir, const AllocationPlan& plan);

}  // namespace cora
