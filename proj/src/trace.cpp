#include "cora/trace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace cora {

uint64_t TrafficTrace::total_volume() const {
  uint64_t total = 0;
  for (const auto& f : flows) total += f.volume_pps;
  return total;
}

TrafficTrace TrafficTrace::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open trace file: " + path);
  TrafficTrace trace;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.starts_with("flow_id")) continue;  // header
    std::stringstream ss(line);
    std::string cell;
    Flow f;
    bool first = true;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2)
      throw ParseError("trace row needs flow_id and volume", lineno, 1);
    f.id = cells.front();
    (void)first;
    try {
      f.volume_pps = std::stoull(cells.back());
    } catch (const std::exception&) {
      throw ParseError("bad volume '" + cells.back() + "'", lineno, 1);
    }
    for (size_t i = 1; i + 1 < cells.size(); ++i) {
      auto colon = cells[i].find(':');
      if (colon == std::string::npos)
        throw ParseError("expected field:value, got '" + cells[i] + "'", lineno, 1);
      std::string field = cells[i].substr(0, colon);
      std::string value = cells[i].substr(colon + 1);
      try {
        f.fields[field] = value.starts_with("0x") ? std::stoull(value.substr(2), nullptr, 16)
                                                  : std::stoull(value);
      } catch (const std::exception&) {
        throw ParseError("bad field value '" + cells[i] + "'", lineno, 1);
      }
    }
    trace.flows.push_back(std::move(f));
  }
  return trace;
}

void TrafficTrace::save_csv(const std::string& path) const {
  std::ofstream out(path);
  out << "flow_id,fields...,volume_pps\n";
  for (const auto& f : flows) {
    out << f.id;
    for (const auto& [k, v] : f.fields) out << "," << k << ":" << v;
    out << "," << f.volume_pps << "\n";
  }
}

uint64_t eval_key_expr(const KeyExpr& key, const Flow& flow, uint64_t element_count) {
  auto field_value = [&](const std::string& name) {
    auto it = flow.fields.find(name);
    if (it == flow.fields.end())
      throw ModelError("flow '" + flow.id + "' is missing field '" + name + "'");
    return it->second;
  };
  switch (key.kind) {
    case KeyExpr::Kind::Constant:
      return 0;
    case KeyExpr::Kind::Field:
      return field_value(key.fields.front());
    case KeyExpr::Kind::Mask:
      return field_value(key.fields.front()) & key.mask;
    case KeyExpr::Kind::Hash: {
      uint64_t h = 0xcbf29ce484222325ull;
      for (const auto& f : key.fields) {
        uint64_t v = field_value(f);
        h = fnv1a64(&v, sizeof(v), h);
      }
      return key.modulo ? mix64(h) % key.modulo : h;
    }
    case KeyExpr::Kind::Lookup: {
      // Table contents are not part of the description; the lookup is
      // evaluated statically as a deterministic map salted by the table name.
      uint64_t h = fnv1a64(key.table);
      uint64_t v = field_value(key.fields.front());
      h = fnv1a64(&v, sizeof(v), h);
      uint64_t range = key.modulo ? key.modulo : element_count;
      return range ? mix64(h) % range : h;
    }
  }
  throw ModelError("unreachable key expression kind");
}

ElementMap map_flows_to_elements(const ProgramIR& ir, const TrafficTrace& trace) {
  ElementMap out;
  for (const auto& [name, state] : ir.states) {
    const FlowGroupDecl& fg = ir.flow_groups.at(state.flow_group);
    if (fg.mode == MapMode::RandomOneToMany) {
      // Non-partitionable: the whole state is one element carrying all traffic.
      ElementTraffic agg;
      for (const auto& f : trace.flows) {
        agg.flow_ids.push_back(f.id);
        agg.volume_pps += f.volume_pps;
      }
      if (!agg.flow_ids.empty()) out[{name, 0}] = std::move(agg);
      continue;
    }
    std::map<uint64_t, uint64_t> dense;  // raw key -> dense index (one_to_one)
    for (const auto& f : trace.flows) {
      uint64_t raw = eval_key_expr(fg.key, f, state.element_count);
      uint64_t idx = raw;
      if (fg.mode == MapMode::OneToOne) {
        auto [it, inserted] = dense.emplace(raw, dense.size());
        idx = it->second;
        (void)inserted;
      }
      auto& slot = out[{name, idx}];
      slot.flow_ids.push_back(f.id);
      slot.volume_pps += f.volume_pps;
    }
  }
  return out;
}

std::vector<BlockAggregate> aggregate_flows(const ProgramIR& ir, const TrafficTrace& trace) {
  std::vector<BlockAggregate> out;
  for (const auto& block : ir.blocks) {
    // Key each flow by its element tuple across the block's states.
    std::map<std::string, BlockAggregate> aggs;
    std::map<std::string, std::map<uint64_t, uint64_t>> dense_per_state;
    for (const auto& f : trace.flows) {
      std::vector<uint64_t> tuple;
      for (const auto& sname : block.states) {
        const StateDecl& state = ir.states.at(sname);
        const FlowGroupDecl& fg = ir.flow_groups.at(state.flow_group);
        if (fg.mode == MapMode::RandomOneToMany) {
          tuple.push_back(0);
          continue;
        }
        uint64_t raw = eval_key_expr(fg.key, f, state.element_count);
        if (fg.mode == MapMode::OneToOne) {
          auto& dense = dense_per_state[sname];
          auto [it, _] = dense.emplace(raw, dense.size());
          raw = it->second;
        }
        tuple.push_back(raw);
      }
      std::string key;
      for (uint64_t v : tuple) key += std::to_string(v) + "/";
      auto& agg = aggs[key];
      if (agg.flow_ids.empty()) {
        agg.block = block.id;
        agg.aggregate_id = key.substr(0, key.size() - 1);
        agg.element_indices = tuple;
      }
      agg.flow_ids.push_back(f.id);
      agg.volume_pps += f.volume_pps;
    }
    for (auto& [_, agg] : aggs) out.push_back(std::move(agg));
  }
  return out;
}

}  // namespace cora
