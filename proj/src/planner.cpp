#include "cora/planner.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace cora {
namespace {

uint64_t pair_bytes(const ProgramIR& ir, const BlockAggregate& pair) {
  const StateBlock& block = ir.block(pair.block);
  uint64_t bytes = 0;
  for (const auto& sname : block.states) {
    const StateDecl& s = ir.states.at(sname);
    const FlowGroupDecl& fg = ir.flow_groups.at(s.flow_group);
    if (fg.mode == MapMode::RandomOneToMany)
      bytes += s.element_count * (s.element_width_bits / 8);  // non-partitionable
    else
      bytes += s.element_width_bits / 8;
  }
  return bytes;
}

}  // namespace

std::vector<ResourceViolation> check_resources(const ResourceUsage& usage,
                                               const DeviceProfile& profile) {
  std::vector<ResourceViolation> v;
  for (const auto& [tier, bytes] : usage.tier_bytes) {
    auto it = profile.tier_capacity_bytes.find(tier);
    uint64_t cap = it == profile.tier_capacity_bytes.end() ? 0 : it->second;
    if (bytes > cap)
      v.push_back({"tier capacity " + tier, double(bytes), double(cap)});
  }
  if (profile.pcie_budget > 0 && usage.pcie_bytes_per_s * 2 > profile.pcie_budget)
    v.push_back({"pcie", usage.pcie_bytes_per_s * 2, profile.pcie_budget});
  if (profile.table_accel && usage.accel_entries > profile.table_accel->capacity_entries)
    v.push_back({"accelerator entries", double(usage.accel_entries),
                 double(profile.table_accel->capacity_entries)});
  return v;
}

double cpu_objective_of(const ProgramIR& ir, const std::vector<Assignment>& assignments) {
  double obj = 0;
  for (const auto& a : assignments)
    if (a.placement == kCpuPlacement)
      obj += double(a.pair.volume_pps) * double(ir.block(a.pair.block).instructions.size());
  return obj;
}

PlanEvaluation evaluate_plan(const ProgramIR& ir, const TrafficTrace& trace,
                             const DeviceProfile& profile,
                             const PerformanceTarget& target,
                             const std::vector<Assignment>& assignments) {
  PlanEvaluation ev;
  uint64_t total_volume = trace.total_volume();
  double scale = total_volume > 0 ? target.target_rate / double(total_volume) : 0.0;

  std::map<std::pair<std::string, std::string>, OffloadedBlock> offload;  // (block, tier)
  std::set<std::string> cpu_flows;
  for (const auto& a : assignments) {
    if (a.placement == kCpuPlacement) {
      for (const auto& fid : a.pair.flow_ids) cpu_flows.insert(fid);
      continue;
    }
    auto [obit, fresh] = offload.try_emplace({a.pair.block, a.placement});
    OffloadedBlock& ob = obit->second;
    if (fresh) {
      ob.block = a.pair.block;
      ob.tier = a.placement;
      ob.traffic_fraction = 0;
    }
    ob.traffic_fraction += total_volume > 0 ? a.pair.volume_pps / double(total_volume) : 0;
    ob.element_volumes.push_back({a.pair.block, a.pair.aggregate_id,
                                  a.pair.volume_pps * scale});
    ev.usage.tier_bytes[a.placement] += pair_bytes(ir, a.pair);
  }

  // PCIe: every packet of a flow with any CPU-resident state crosses the
  // NIC-host boundary once each direction.
  double cpu_pps = 0;
  for (const auto& f : trace.flows)
    if (cpu_flows.count(f.id)) cpu_pps += f.volume_pps * scale;
  ev.usage.pcie_bytes_per_s = cpu_pps * trace.packet_size_bytes;

  // Distributor lookups for states split between devices.
  std::map<std::string, std::pair<bool, bool>> sides;  // block -> (nic, cpu)
  std::map<std::string, uint64_t> block_pairs;
  for (const auto& a : assignments) {
    auto& s = sides[a.pair.block];
    (a.placement == kCpuPlacement ? s.second : s.first) = true;
    block_pairs[a.pair.block]++;
  }
  for (const auto& [blk, s] : sides)
    if (s.first && s.second) ev.usage.accel_entries += block_pairs[blk];

  ev.violations = check_resources(ev.usage, profile);

  std::vector<OffloadedBlock> offloaded;
  for (auto& [_, ob] : offload) offloaded.push_back(ob);
  ThroughputReport report = estimate_program(profile, ir, offloaded, target.target_rate);
  ev.nic_throughput = report.t_program;
  ev.drop_risk = report.any_drop_risk;

  ev.feasible = ev.violations.empty() && !ev.drop_risk &&
                profile.base_forward_rate >= target.target_rate &&
                report.t_program >= target.target_rate * (1.0 - 1e-9);
  return ev;
}

namespace {

AllocationPlan finish_plan(const ProgramIR& ir, const TrafficTrace& trace,
                           const DeviceProfile& profile, const PerformanceTarget& target,
                           std::vector<Assignment> assignments, size_t candidates) {
  AllocationPlan plan;
  PlanEvaluation ev = evaluate_plan(ir, trace, profile, target, assignments);
  plan.assignments = std::move(assignments);
  plan.cpu_objective = cpu_objective_of(ir, plan.assignments);
  plan.resource_usage = ev.usage;
  plan.predicted_nic_pps = ev.nic_throughput;
  plan.meets_target = ev.feasible;
  if (!ev.feasible)
    plan.shortfall_pps = std::max(0.0, target.target_rate -
                                           std::min(ev.nic_throughput,
                                                    profile.base_forward_rate));
  plan.candidates_evaluated = candidates;
  plan.generated = generate_artifacts(ir, profile, plan.assignments);
  return plan;
}

double global_order_key(const ProgramIR& ir, const BlockAggregate& pair) {
  const StateBlock& block = ir.block(pair.block);
  double size = double(pair_bytes(ir, pair));
  return double(pair.volume_pps) * double(block.instructions.size()) / std::max(1.0, size);
}

// Per-aggregate offload cap: for write blocks the lock throughput of one
// element, otherwise the block's lock-free throughput, on the fastest tier.
std::map<std::string, double> max_offloadable(const ProgramIR& ir,
                                              const DeviceProfile& profile) {
  std::map<std::string, double> vmax;
  std::string tier = profile.tier_order.empty() ? "" : profile.tier_order.front();
  for (const auto& block : ir.blocks) {
    std::vector<PlacedAccess> own;
    for (const auto& a : block.accesses)
      own.push_back({{tier, a.is_write, a.atomic, a.size_bytes}, a.intensity});
    double t = own.empty() ? profile.base_forward_rate
                           : std::min(profile.base_forward_rate,
                                      hybrid_throughput(own, profile).t_h);
    if (block.has_write) t /= profile.n_threads;
    vmax[block.id] = t;
  }
  return vmax;
}

}  // namespace

AllocationPlan plan(const ProgramIR& ir, const TrafficTrace& trace,
                    const DeviceProfile& profile, const PerformanceTarget& target) {
  std::vector<BlockAggregate> pairs = aggregate_flows(ir, trace);
  uint64_t total_volume = trace.total_volume();
  double scale = total_volume > 0 ? target.target_rate / double(total_volume) : 0.0;

  size_t candidates = 0;
  std::map<std::string, double> vmax = max_offloadable(ir, profile);
  candidates += ir.blocks.size();

  // Local ordering happens implicitly: the global sort is stable on
  // (key desc, block asc, aggregate asc), so within one block pairs appear
  // by descending volume.
  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t x, size_t y) {
    double kx = global_order_key(ir, pairs[x]);
    double ky = global_order_key(ir, pairs[y]);
    if (kx != ky) return kx > ky;
    if (pairs[x].block != pairs[y].block) return pairs[x].block < pairs[y].block;
    return pairs[x].aggregate_id < pairs[y].aggregate_id;
  });

  std::vector<Assignment> assignments;
  assignments.reserve(pairs.size());
  for (const auto& p : pairs) assignments.push_back({p, kCpuPlacement});

  if (profile.base_forward_rate < target.target_rate || total_volume == 0)
    return finish_plan(ir, trace, profile, target, std::move(assignments), candidates);

  std::map<std::string, uint64_t> tier_used;
  for (size_t idx : order) {
    const BlockAggregate& pair = pairs[idx];
    // Skip rule: a single aggregate hotter than the block can ever sustain
    // stays on the CPU.
    if (pair.volume_pps * scale > vmax[pair.block]) continue;

    uint64_t bytes = pair_bytes(ir, pair);
    std::string tier;
    for (const auto& t : profile.tier_order) {
      if (tier_used[t] + bytes <= profile.tier_capacity_bytes.at(t)) {
        tier = t;
        break;
      }
    }
    if (tier.empty()) continue;  // no tier has room; pair stays on CPU

    assignments[idx].placement = tier;
    ++candidates;
    PlanEvaluation ev = evaluate_plan(ir, trace, profile, target, assignments);
    if (!ev.feasible) {
      assignments[idx].placement = kCpuPlacement;  // skip and continue
    } else {
      tier_used[tier] += bytes;
    }
  }
  return finish_plan(ir, trace, profile, target, std::move(assignments), candidates);
}

AllocationPlan brute_force_plan(const ProgramIR& ir, const TrafficTrace& trace,
                                const DeviceProfile& profile,
                                const PerformanceTarget& target,
                                size_t max_decision_vars) {
  std::vector<BlockAggregate> pairs = aggregate_flows(ir, trace);
  if (pairs.size() > max_decision_vars)
    throw PlanError("instance too large for brute force: " + std::to_string(pairs.size()) +
                    " decision variables");
  std::vector<std::string> choices(profile.tier_order.begin(), profile.tier_order.end());
  choices.push_back(kCpuPlacement);

  std::vector<Assignment> current, best;
  current.reserve(pairs.size());
  for (const auto& p : pairs) current.push_back({p, kCpuPlacement});
  double best_obj = std::numeric_limits<double>::infinity();
  bool found = false;
  size_t evaluated = 0;

  std::vector<size_t> digits(pairs.size(), 0);
  bool done = pairs.empty();
  while (!done) {
    for (size_t i = 0; i < pairs.size(); ++i) current[i].placement = choices[digits[i]];
    ++evaluated;
    PlanEvaluation ev = evaluate_plan(ir, trace, profile, target, current);
    if (ev.feasible) {
      double obj = cpu_objective_of(ir, current);
      if (obj < best_obj - 1e-9) {
        best_obj = obj;
        best = current;
        found = true;
      }
    }
    // odometer increment
    size_t d = 0;
    while (d < digits.size()) {
      if (++digits[d] < choices.size()) break;
      digits[d] = 0;
      ++d;
    }
    done = d == digits.size();
  }

  if (!found) {
    for (auto& a : current) a.placement = kCpuPlacement;
    best = current;
  }
  return finish_plan(ir, trace, profile, target, std::move(best), evaluated);
}

AllocationPlan flow_partition_plan(const ProgramIR& ir, const TrafficTrace& trace,
                                   const DeviceProfile& profile,
                                   const PerformanceTarget& target) {
  std::vector<BlockAggregate> pairs = aggregate_flows(ir, trace);
  std::vector<Assignment> assignments;
  for (const auto& p : pairs) assignments.push_back({p, kCpuPlacement});

  // Flow-level decisions: a flow moves to the NIC only with every aggregate
  // it touches; shared aggregates move when first needed.
  std::map<std::string, std::vector<size_t>> pairs_of_flow;
  for (size_t i = 0; i < pairs.size(); ++i)
    for (const auto& fid : pairs[i].flow_ids) pairs_of_flow[fid].push_back(i);

  std::vector<const Flow*> flows;
  for (const auto& f : trace.flows) flows.push_back(&f);
  std::sort(flows.begin(), flows.end(), [](const Flow* a, const Flow* b) {
    if (a->volume_pps != b->volume_pps) return a->volume_pps > b->volume_pps;
    return a->id < b->id;
  });

  std::string tier = profile.tier_order.empty() ? kCpuPlacement : profile.tier_order.front();
  size_t candidates = 0;
  std::map<std::string, uint64_t> tier_used;
  for (const Flow* f : flows) {
    std::vector<std::pair<size_t, std::string>> touched;  // previous placements
    bool fits = true;
    for (size_t idx : pairs_of_flow[f->id]) {
      if (assignments[idx].placement != kCpuPlacement) continue;
      uint64_t bytes = pair_bytes(ir, pairs[idx]);
      std::string chosen;
      for (const auto& t : profile.tier_order)
        if (tier_used[t] + bytes <= profile.tier_capacity_bytes.at(t)) {
          chosen = t;
          break;
        }
      if (chosen.empty()) {
        fits = false;
        break;
      }
      touched.push_back({idx, assignments[idx].placement});
      assignments[idx].placement = chosen;
      tier_used[chosen] += bytes;
    }
    if (fits && !touched.empty()) {
      ++candidates;
      PlanEvaluation ev = evaluate_plan(ir, trace, profile, target, assignments);
      if (ev.feasible) continue;
    }
    for (auto& [idx, prev] : touched) {
      tier_used[assignments[idx].placement] -= pair_bytes(ir, pairs[idx]);
      assignments[idx].placement = prev;
    }
  }
  (void)tier;
  return finish_plan(ir, trace, profile, target, std::move(assignments), candidates);
}

GeneratedArtifacts generate_artifacts(const ProgramIR& ir, const DeviceProfile& profile,
                                      const std::vector<Assignment>& assignments) {
  GeneratedArtifacts out;

  std::map<std::string, std::vector<const Assignment*>> nic_pairs, cpu_pairs;
  for (const auto& a : assignments)
    (a.placement == kCpuPlacement ? cpu_pairs : nic_pairs)[a.pair.block].push_back(&a);

  for (const auto& [blk, list] : nic_pairs) {
    const StateBlock& block = ir.block(blk);
    if (!block.has_write) continue;
    LockSpec lock;
    lock.state_block = blk;
    lock.element_count = list.size();
    std::vector<PlacedAccess> own;
    const std::string& tier = list.front()->placement;
    for (const auto& a : block.accesses)
      own.push_back({{tier, a.is_write, a.atomic, a.size_bytes}, a.intensity});
    lock.per_lock_throughput = hybrid_throughput(own, profile).t_h / profile.n_threads;
    out.locks.push_back(lock);
  }

  for (const auto& [blk, list] : nic_pairs) {
    if (!cpu_pairs.count(blk)) continue;  // not split
    const StateBlock& block = ir.block(blk);
    for (const auto& sname : block.states) {
      DistributorTable d;
      d.state = sname;
      d.key = ir.states.at(sname).flow_group;
      for (const auto* a : list) d.entries[a->pair.aggregate_id] = a->placement;
      for (const auto* a : cpu_pairs.at(blk)) d.entries[a->pair.aggregate_id] = kCpuPlacement;
      out.distributors.push_back(d);
    }
  }

  // Cross-device data dependencies: a value computed in a NIC-resident block
  // and read by a CPU-resident consumer is carried in the packet header.
  std::map<std::string, std::string> block_of_instr;
  for (const auto& b : ir.blocks)
    for (const auto& i : b.instructions) block_of_instr[i] = b.id;
  std::map<std::string, const Instruction*> by_id;
  for (const auto& ins : ir.instructions) by_id[ins.id] = &ins;
  for (const auto& ins : ir.instructions) {
    auto itc = block_of_instr.find(ins.id);
    if (itc == block_of_instr.end() || !cpu_pairs.count(itc->second) ||
        nic_pairs.count(itc->second))
      continue;  // consumer must be fully CPU-resident
    for (const auto& v : ins.reads) {
      auto itp = block_of_instr.find(v);
      if (itp == block_of_instr.end() || itp->second == itc->second) continue;
      if (!nic_pairs.count(itp->second)) continue;
      HeaderTag tag{v, itp->second, itc->second};
      bool dup = false;
      for (const auto& t : out.header_tags)
        dup |= t.value == tag.value && t.to_block == tag.to_block;
      if (!dup) out.header_tags.push_back(tag);
    }
  }
  return out;
}

double offloading_ratio(const ProgramIR& ir, const AllocationPlan& p) {
  double nic = 0, total = 0;
  for (const auto& a : p.assignments) {
    double work = double(a.pair.volume_pps) * double(ir.block(a.pair.block).instructions.size());
    total += work;
    if (a.placement != kCpuPlacement) nic += work;
  }
  return total > 0 ? nic / total : 0.0;
}

std::string AllocationPlan::to_json() const {
  nlohmann::json j;
  nlohmann::json ja = nlohmann::json::array();
  std::vector<const Assignment*> sorted;
  for (const auto& a : assignments) sorted.push_back(&a);
  std::sort(sorted.begin(), sorted.end(), [](const Assignment* x, const Assignment* y) {
    if (x->pair.block != y->pair.block) return x->pair.block < y->pair.block;
    return x->pair.aggregate_id < y->pair.aggregate_id;
  });
  for (const auto* a : sorted)
    ja.push_back({{"block", a->pair.block},
                  {"aggregate", a->pair.aggregate_id},
                  {"volume_pps", a->pair.volume_pps},
                  {"flows", a->pair.flow_ids.size()},
                  {"placement", a->placement}});
  j["assignments"] = ja;
  j["cpu_objective"] = cpu_objective;
  j["predicted_nic_pps"] = predicted_nic_pps;
  j["meets_target"] = meets_target;
  j["shortfall_pps"] = shortfall_pps;
  j["candidates_evaluated"] = candidates_evaluated;
  j["resources"] = {{"tier_bytes", resource_usage.tier_bytes},
                    {"pcie_bytes_per_s_each_dir", resource_usage.pcie_bytes_per_s},
                    {"accel_entries", resource_usage.accel_entries}};
  nlohmann::json jl = nlohmann::json::array();
  for (const auto& l : generated.locks)
    jl.push_back({{"block", l.state_block},
                  {"elements", l.element_count},
                  {"per_lock_pps", l.per_lock_throughput}});
  j["locks"] = jl;
  nlohmann::json jd = nlohmann::json::array();
  for (const auto& d : generated.distributors)
    jd.push_back({{"state", d.state}, {"key", d.key}, {"entries", d.entries}});
  j["distributors"] = jd;
  nlohmann::json jt = nlohmann::json::array();
  for (const auto& t : generated.header_tags)
    jt.push_back({{"value", t.value}, {"from", t.from_block}, {"to", t.to_block}});
  j["header_tags"] = jt;
  return j.dump(2);
}

}  // namespace cora
