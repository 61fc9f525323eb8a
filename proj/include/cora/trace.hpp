#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cora/nf_ir.hpp"

namespace cora {

struct Flow {
  std::string id;
  std::map<std::string, uint64_t> fields;
  uint64_t volume_pps = 0;
};

struct TrafficTrace {
  std::vector<Flow> flows;
  uint32_t packet_size_bytes = 256;

  uint64_t total_volume() const;
  static TrafficTrace load_csv(const std::string& path);
  void save_csv(const std::string& path) const;
};

// Evaluate a FlowGroupID key expression against one flow's packet fields.
// one_to_one states use the raw key value; element indices for them are
// assigned densely in first-seen flow order by map_flows_to_elements.
uint64_t eval_key_expr(const KeyExpr& key, const Flow& flow, uint64_t element_count);

struct ElementTraffic {
  std::vector<std::string> flow_ids;
  uint64_t volume_pps = 0;
};

// (state name, element index) -> aggregated flows + volume.
using ElementMap = std::map<std::pair<std::string, uint64_t>, ElementTraffic>;

ElementMap map_flows_to_elements(const ProgramIR& ir, const TrafficTrace& trace);

// Per-block aggregation used by the planner: flows sharing the same element
// tuple across all states of a block form one aggregate.
struct BlockAggregate {
  std::string block;
  std::string aggregate_id;               // canonical element-tuple key
  std::vector<uint64_t> element_indices;  // one per state of the block, states order
  std::vector<std::string> flow_ids;
  uint64_t volume_pps = 0;
};

std::vector<BlockAggregate> aggregate_flows(const ProgramIR& ir, const TrafficTrace& trace);

}  // namespace cora
