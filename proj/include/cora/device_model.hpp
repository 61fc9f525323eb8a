#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cora/nf_ir.hpp"

namespace cora {

struct RooflineParams {
  double t_max = 0;  // peak operation throughput (ops/s)
  double a = 1;      // ratio of non-memory to memory time per op
  double b = 0;      // queuing-penalty coefficient
};

// Attainable operation throughput at intensity i:
//   M(i) = t_max * i / (a + exp(-b/i) * i),  M(0) = 0.
double roofline_eval(const RooflineParams& p, double intensity);

struct FitResult {
  RooflineParams params;
  double mean_rel_error = 0;
};

// Nonlinear least squares on relative error, multi-start Nelder-Mead.
FitResult fit_roofline(const std::vector<std::pair<double, double>>& samples);

// How groups of accesses combine once the same-(tier,mode) harmonic mean
// has been taken. "slower_op" -> min, "shared" -> weighted harmonic mean.
enum class CombineRule { SlowerOp, Shared };

struct AccessClass {
  std::string tier;
  bool is_write = false;
  bool atomic = true;
  uint32_t size_bytes = 4;

  std::string key() const;  // "tier/op/mode/size"
  bool operator<(const AccessClass& o) const { return key() < o.key(); }
};

struct TableAccel {
  uint64_t capacity_entries = 0;
  double lookup_rate = 0;  // lookups/s; 0 = not the bottleneck
};

struct DeviceProfile {
  std::string name;
  std::map<std::string, RooflineParams> curves;  // keyed AccessClass::key()
  std::map<std::string, CombineRule> cross_mode;  // per tier
  CombineRule cross_tier = CombineRule::SlowerOp;
  std::map<std::string, uint64_t> tier_capacity_bytes;
  std::vector<std::string> tier_order;  // fastest first
  uint32_t n_threads = 1;
  double base_forward_rate = 0;  // pps with empty program
  double pcie_budget = 0;        // bytes/s, bidirectional
  std::optional<TableAccel> table_accel;

  const RooflineParams& curve(const AccessClass& ac) const;  // throws ModelError
  static DeviceProfile load_json(const std::string& path);
  static DeviceProfile from_json_text(const std::string& text);
  std::string to_json() const;
};

struct PlacedAccess {
  AccessClass cls;
  double intensity = 0;  // per packet, already traffic-weighted
};

struct HybridResult {
  double m_h = 0;          // ops/s
  double t_h = 0;          // packets/s
  double total_intensity = 0;
};

// The four-step composition: same-(tier,mode) harmonic mean, per-tier
// cross-mode rule, then the cross-tier rule; T_h = M_h / I.
HybridResult hybrid_throughput(const std::vector<PlacedAccess>& accesses,
                               const DeviceProfile& profile);

struct LockSpec {
  std::string state_block;
  uint64_t element_count = 1;
  double per_lock_throughput = 0;  // T_lock_i = T_lockfree_i / n_threads
};

struct LockLoad {
  std::string block;
  std::string element;
  double volume = 0;
};

struct LockReport {
  std::string block;
  std::string element;
  double t_lock = 0;
  double volume = 0;
  bool drop_risk = false;
};

struct LockModelResult {
  double throughput = 0;
  std::vector<LockReport> locks;
};

// Eq. T = min(sum of unsaturated lock volumes + unlocked volume, lockfree_T).
LockModelResult lock_model(const std::map<std::string, double>& t_lock_per_block,
                           const std::vector<LockLoad>& loads,
                           double unlocked_volume,
                           double lockfree_t);

// One state block placed on a tier with its traversing traffic.
struct OffloadedBlock {
  std::string block;
  std::string tier;
  double traffic_fraction = 1.0;  // share of NIC traffic traversing this block
  std::vector<LockLoad> element_volumes;  // write blocks only
};

struct AccessTableRow {
  std::string block;
  AccessClass cls;
  double intensity = 0;  // per-packet intensity of the block itself
};

struct ThroughputReport {
  double t_lockfree = 0;   // packets/s (capped by base forward rate)
  double t_program = 0;    // after the lock model
  std::vector<AccessTableRow> access_table;
  std::map<std::string, double> t_lock_per_block;
  std::vector<LockReport> locks;
  bool any_drop_risk = false;
};

// nic_offered_pps: total traffic traversing the device; 0 = assume every
// packet touches every offloaded write block.
ThroughputReport estimate_program(const DeviceProfile& profile,
                                  const ProgramIR& ir,
                                  const std::vector<OffloadedBlock>& offloaded,
                                  double nic_offered_pps = 0);

}  // namespace cora
