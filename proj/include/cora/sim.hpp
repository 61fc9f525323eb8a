#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cora/device_model.hpp"
#include "cora/planner.hpp"
#include "cora/trace.hpp"

namespace cora {

enum class MigrationDirection { CpuToNic, NicToCpu };
enum class VictimPolicy { HeavyFirst, Random };

struct MigrationRecord {
  MigrationDirection direction;
  std::string block;
  std::string aggregate;
  double t_install_blocked = 0;
  double t_value_transferred = 0;
  double t_marked_valid = 0;
  uint64_t packets_spun = 0;
  uint32_t retries = 0;
  bool failed = false;  // device-malfunction flag after bounded retries
};

struct FaultInjection {
  size_t migration_index = 0;  // global sequence number
  int phase = 2;               // 1..3
  uint32_t failures = 1;       // attempts that fail before success
};

struct ScheduleEntry {
  double time_s = 0;
  double scale_factor = 1.0;
  // state name -> capacity override (element slots); simulates table resizing
  std::map<std::string, uint64_t> table_size_override;
};

struct SimConfig {
  double epoch_len = 0.1;
  double idle_threshold = 0;   // seconds; the calibrated T
  double idle_percentile = 0.10;
  uint64_t seed = 1;
  double cpu_core_rate = 1e6;  // instruction-weighted pps per core
  double headroom = 0.10;      // NIC load margin for underload offloads
  VictimPolicy policy = VictimPolicy::HeavyFirst;
  uint32_t max_concurrent_migrations = 8;
  uint32_t max_retries = 5;
  uint64_t queue_bound = 100000;  // packets
  size_t topk = 64;
  double min_elephant_share = 0.001;
  double idle_noise_cv = 0.02;
  std::vector<FaultInjection> faults;
};

// Per-pair ownership interval, for the shadow consistency oracle.
struct OwnershipInterval {
  std::string device;  // tier name or "cpu"
  double t_begin = 0;
  double t_end = 0;
  uint64_t packets = 0;
};

struct FlowEpochLog {
  uint64_t arrived = 0;
  uint64_t to_nic = 0;
  uint64_t to_cpu = 0;
  uint64_t dropped = 0;
  int64_t queued_delta = 0;
};

struct EpochRecord {
  double t_begin = 0;
  double nic_rate = 0;       // offered pps at the NIC
  double nic_processed_pps = 0;
  double cpu_processed_pps = 0;
  double cpu_cores = 0;
  uint64_t drops = 0;
  double idle_p10 = 0;
  bool overloaded = false;
  std::vector<MigrationRecord> migrations;
  std::map<std::string, uint64_t> state_occupancy;
  std::map<std::string, FlowEpochLog> flow_log;
};

struct SimTimeline {
  std::vector<EpochRecord> epochs;
  std::map<std::pair<std::string, std::string>, uint64_t> final_counters;  // (block, aggregate)
  std::map<std::pair<std::string, std::string>, std::vector<OwnershipInterval>> ownership;
  uint64_t total_arrived = 0;
  uint64_t total_processed_nic = 0;
  uint64_t total_processed_cpu = 0;
  uint64_t total_dropped = 0;
  uint64_t final_queued = 0;
  bool device_malfunction = false;

  void save_csv(const std::string& timeline_path, const std::string& migration_path) const;
};

struct EpochStats {
  double idle_stat = 0;          // the configured percentile of per-core idle time
  double nic_rate = 0;
  std::map<std::string, uint64_t> occupancy;
  std::map<std::string, uint64_t> capacity;
  std::vector<std::pair<uint64_t, uint64_t>> cpu_elephants;  // (fingerprint, count)
};

bool detect_overload(const EpochStats& stats, double idle_threshold);

struct UnderloadOpportunity {
  std::string state;
  uint64_t free_slots = 0;
  bool swap = false;  // elephant swap rather than free-slot fill
};

class Simulator {
 public:
  Simulator(const ProgramIR& ir, const TrafficTrace& trace,
            const DeviceProfile& profile, const AllocationPlan& plan,
            const SimConfig& cfg);

  SimTimeline run(const std::vector<ScheduleEntry>& schedule, double duration_s);

  // Offline threshold calibration: idle-time percentile observed at the given
  // load fraction of modeled capacity.
  static double calibrate_threshold(const ProgramIR& ir, const TrafficTrace& trace,
                                    const DeviceProfile& profile,
                                    const AllocationPlan& plan, const SimConfig& cfg,
                                    double load_fraction = 0.9);

 private:
  struct Impl;
  const ProgramIR& ir_;
  const TrafficTrace& trace_;
  const DeviceProfile& profile_;
  const AllocationPlan& plan_;
  SimConfig cfg_;
};

}  // namespace cora
