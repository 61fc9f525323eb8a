#include "cora/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "cora/heavykeeper.hpp"
#include "cora/manifest.hpp"

namespace cora {

bool detect_overload(const EpochStats& stats, double idle_threshold) {
  return stats.idle_stat < idle_threshold;
}

namespace {

using PairKey = std::pair<std::string, std::string>;  // (block, aggregate)

struct PairState {
  std::string owner;  // tier name or "cpu"
  uint64_t counter = 0;
  uint64_t volume_pps = 0;
  std::vector<size_t> flow_idx;
  // active migration window within the current epoch, fractions of epoch
  double win_begin = -1, win_end = -1;
  std::string next_owner;
  int active_record = -1;  // index into the launching epoch's migrations
};

struct Command {
  MigrationDirection direction;
  PairKey pair;
};

struct Engine {
  const ProgramIR& ir;
  const TrafficTrace& trace;
  const DeviceProfile& profile;
  const SimConfig& cfg;

  std::map<PairKey, PairState> pairs;
  std::vector<std::vector<PairKey>> flow_pairs;  // per flow index
  std::vector<uint64_t> flow_fp;
  std::vector<uint64_t> global_queue;  // per flow
  std::map<std::string, uint64_t> state_capacity;  // element slots per state
  std::map<std::string, double> block_max_throughput;
  SimTimeline timeline;
  std::mt19937_64 rng;
  size_t migration_seq = 0;
  std::vector<Command> pending;

  Engine(const ProgramIR& ir_, const TrafficTrace& trace_, const DeviceProfile& profile_,
         const AllocationPlan& plan, const SimConfig& cfg_)
      : ir(ir_), trace(trace_), profile(profile_), cfg(cfg_), rng(mix64(cfg_.seed)) {
    std::map<std::string, size_t> flow_index;
    for (size_t i = 0; i < trace.flows.size(); ++i) flow_index[trace.flows[i].id] = i;
    flow_pairs.resize(trace.flows.size());
    flow_fp.resize(trace.flows.size());
    global_queue.assign(trace.flows.size(), 0);
    for (size_t i = 0; i < trace.flows.size(); ++i)
      flow_fp[i] = fnv1a64(trace.flows[i].id);

    for (const auto& a : plan.assignments) {
      PairKey key{a.pair.block, a.pair.aggregate_id};
      PairState ps;
      ps.owner = a.placement;
      ps.volume_pps = a.pair.volume_pps;
      for (const auto& fid : a.pair.flow_ids) {
        size_t fi = flow_index.at(fid);
        ps.flow_idx.push_back(fi);
        flow_pairs[fi].push_back(key);
      }
      pairs[key] = std::move(ps);
    }
    for (const auto& [name, s] : ir.states) state_capacity[name] = s.element_count;
    for (const auto& b : ir.blocks) {
      std::string tier = profile.tier_order.empty() ? "" : profile.tier_order.front();
      std::vector<PlacedAccess> own;
      for (const auto& acc : b.accesses)
        own.push_back({{tier, acc.is_write, acc.atomic, acc.size_bytes}, acc.intensity});
      double t = profile.base_forward_rate;
      try {
        if (!own.empty())
          t = std::min(t, hybrid_throughput(own, profile).t_h);
      } catch (const ModelError&) {
      }
      block_max_throughput[b.id] = t;
    }
    for (const auto& [key, ps] : pairs)
      record_ownership(key, ps.owner, 0.0);
  }

  void record_ownership(const PairKey& key, const std::string& device, double t) {
    auto& iv = timeline.ownership[key];
    if (!iv.empty()) iv.back().t_end = t;
    iv.push_back({device, t, t, 0});
  }

  // Model throughput of the current NIC-resident set at the given scale.
  double nic_capacity(double scale, const std::map<PairKey, std::string>* overrides = nullptr) {
    std::map<std::pair<std::string, std::string>, OffloadedBlock> offload;
    uint64_t total = trace.total_volume();
    for (const auto& [key, ps] : pairs) {
      std::string owner = ps.owner;
      if (overrides) {
        auto it = overrides->find(key);
        if (it != overrides->end()) owner = it->second;
      }
      if (owner == kCpuPlacement) continue;
      auto [it2, fresh] = offload.try_emplace({key.first, owner});
      OffloadedBlock& ob = it2->second;
      if (fresh) {
        ob.block = key.first;
        ob.tier = owner;
        ob.traffic_fraction = 0;
      }
      ob.traffic_fraction += total > 0 ? ps.volume_pps / double(total) : 0;
      if (ir.block(key.first).has_write)
        ob.element_volumes.push_back({key.first, key.second, ps.volume_pps * scale});
    }
    std::vector<OffloadedBlock> blocks;
    for (auto& [_, ob] : offload) blocks.push_back(ob);
    double offered = trace.total_volume() * scale;
    ThroughputReport rep = estimate_program(profile, ir, blocks, offered);
    // Throughput at the offered load follows the load; capacity is the rate
    // at which the mix saturates: the lock-free bound, or the first lock to
    // hit its serialization limit under proportional scaling.
    double cap = std::min(profile.base_forward_rate, rep.t_lockfree);
    if (offered > 0) {
      for (const auto& ob : blocks) {
        auto it = rep.t_lock_per_block.find(ob.block);
        if (it == rep.t_lock_per_block.end()) continue;
        for (const auto& ev : ob.element_volumes)
          if (ev.volume > 0) cap = std::min(cap, it->second * offered / ev.volume);
      }
    }
    return cap;
  }

  double predicted_idle(double offered_pps, double capacity_pps) const {
    if (offered_pps <= 0) return cfg.epoch_len;
    double n = double(profile.n_threads);
    return std::max(0.0, n / offered_pps - n / capacity_pps);
  }

  std::map<std::string, uint64_t> occupancy() const {
    std::map<std::string, uint64_t> occ;
    for (const auto& [name, _] : ir.states) occ[name] = 0;
    for (const auto& [key, ps] : pairs) {
      if (ps.owner == kCpuPlacement) continue;
      const StateBlock& b = ir.block(key.first);
      for (const auto& s : b.states) occ[s]++;
    }
    return occ;
  }

  // --- migration execution -------------------------------------------------

  void start_migration(const Command& cmd, double t0, EpochRecord& rec) {
    auto it = pairs.find(cmd.pair);
    if (it == pairs.end()) return;
    PairState& ps = it->second;
    if (ps.win_begin >= 0) return;  // already mid-migration
    bool to_nic = cmd.direction == MigrationDirection::CpuToNic;
    if (to_nic && ps.owner != kCpuPlacement) return;
    if (!to_nic && ps.owner == kCpuPlacement) return;

    MigrationRecord r;
    r.direction = cmd.direction;
    r.block = cmd.pair.first;
    r.aggregate = cmd.pair.second;

    const double phase = 1e-4;  // control-channel latency per step
    uint64_t bytes = ir.block(cmd.pair.first).element_bytes(ir.states);
    double transfer = phase + (profile.pcie_budget > 0 ? bytes / profile.pcie_budget : 0);

    uint32_t retries = 0;
    bool failed = false;
    for (const auto& f : cfg.faults) {
      if (f.migration_index == migration_seq) {
        retries += std::min(f.failures, cfg.max_retries);
        if (f.failures > cfg.max_retries) failed = true;
      }
    }
    ++migration_seq;

    r.t_install_blocked = t0 + phase;
    r.t_value_transferred = r.t_install_blocked + transfer * (1 + retries);
    r.t_marked_valid = r.t_value_transferred + phase;
    r.retries = retries;
    r.failed = failed;
    double span = std::max(1e-9, r.t_marked_valid - t0);
    if (span > cfg.epoch_len * 0.9) {
      double k = cfg.epoch_len * 0.9 / span;
      r.t_install_blocked = t0 + (r.t_install_blocked - t0) * k;
      r.t_value_transferred = t0 + (r.t_value_transferred - t0) * k;
      r.t_marked_valid = t0 + (r.t_marked_valid - t0) * k;
    }

    ps.win_begin = (r.t_install_blocked - t0) / cfg.epoch_len;
    ps.win_end = (r.t_marked_valid - t0) / cfg.epoch_len;
    std::string target_tier = profile.tier_order.empty() ? kCpuPlacement
                                                         : profile.tier_order.front();
    ps.next_owner = failed ? ps.owner
                           : (to_nic ? target_tier : std::string(kCpuPlacement));
    rec.migrations.push_back(r);
    ps.active_record = int(rec.migrations.size()) - 1;
    if (failed) timeline.device_malfunction = true;
  }

  void finish_migrations(double t0) {
    for (auto& [key, ps] : pairs) {
      if (ps.win_begin < 0) continue;
      double t_valid = t0 + ps.win_end * cfg.epoch_len;
      if (ps.next_owner != ps.owner) {
        ps.owner = ps.next_owner;
        record_ownership(key, ps.owner, t_valid);
      }
      ps.win_begin = ps.win_end = -1;
      ps.next_owner.clear();
      ps.active_record = -1;
    }
  }

  // --- per-epoch processing ------------------------------------------------

  void add_processed(size_t fi, uint64_t count, EpochRecord& rec, double t0) {
    if (count == 0) return;
    bool touches_cpu = false;
    for (const auto& key : flow_pairs[fi]) {
      PairState& ps = pairs.at(key);
      std::string final_owner = ps.win_begin >= 0 && !ps.next_owner.empty()
                                    ? ps.next_owner
                                    : ps.owner;
      if (final_owner == kCpuPlacement) touches_cpu = true;
      uint64_t pre = count, post = 0;
      if (ps.win_begin >= 0) {
        pre = uint64_t(std::floor(count * ps.win_begin));
        uint64_t spun = uint64_t(std::floor(count * (ps.win_end - ps.win_begin)));
        post = count - pre;  // spun packets resume on the new owner
        if (ps.active_record >= 0)
          rec.migrations[ps.active_record].packets_spun += spun;
        ps.counter += pre + post;
        auto& iv = timeline.ownership[key];
        // pre-window packets belong to the old (current) owner interval,
        // post-window ones to the next owner's interval recorded at finish
        iv.back().packets += pre;
        iv.back().t_end = t0 + ps.win_begin * cfg.epoch_len;
        pending_post_[key] += post;
      } else {
        ps.counter += count;
        timeline.ownership[key].back().packets += count;
        timeline.ownership[key].back().t_end = t0 + cfg.epoch_len;
      }
      (void)pre;
    }
    auto& fl = rec.flow_log[trace.flows[fi].id];
    if (touches_cpu)
      fl.to_cpu += count;
    else
      fl.to_nic += count;
  }

  std::map<PairKey, uint64_t> pending_post_;  // packets owed to the new owner

  void flush_pending_post() {
    for (auto& [key, n] : pending_post_) {
      if (n == 0) continue;
      auto& iv = timeline.ownership[key];
      iv.back().packets += n;
      n = 0;
    }
    pending_post_.clear();
  }

  EpochRecord run_epoch(double t0, double scale,
                        const std::map<std::string, uint64_t>& overrides,
                        HeavyKeeper& nic_hk, HeavyKeeper& cpu_hk, bool controller_on) {
    EpochRecord rec;
    rec.t_begin = t0;

    for (const auto& [state, cap] : overrides) state_capacity[state] = cap;

    // Launch migrations decided last epoch.
    size_t launched = 0;
    for (const auto& cmd : pending) {
      if (launched >= cfg.max_concurrent_migrations) break;
      size_t before = rec.migrations.size();
      start_migration(cmd, t0, rec);
      if (rec.migrations.size() > before) ++launched;
    }
    pending.clear();

    // Arrivals.
    std::vector<uint64_t> arrivals(trace.flows.size(), 0);
    uint64_t arrived = 0;
    for (size_t i = 0; i < trace.flows.size(); ++i) {
      arrivals[i] =
          uint64_t(std::llround(trace.flows[i].volume_pps * scale * cfg.epoch_len));
      arrived += arrivals[i];
      rec.flow_log[trace.flows[i].id].arrived = arrivals[i];
    }
    timeline.total_arrived += arrived;

    double offered_pps = arrived / cfg.epoch_len;
    double capacity = nic_capacity(scale);
    rec.nic_rate = offered_pps;
    auto budget = uint64_t(std::llround(capacity * cfg.epoch_len));

    // Serve carryover queue first, then fresh arrivals; excess queues up to
    // the bound and then drops.
    uint64_t served_total = 0;
    for (size_t i = 0; i < trace.flows.size(); ++i) {
      uint64_t take = std::min(global_queue[i], budget - std::min(budget, served_total));
      take = std::min(take, budget > served_total ? budget - served_total : 0);
      if (take > 0) {
        global_queue[i] -= take;
        served_total += take;
        add_processed(i, take, rec, t0);
        rec.flow_log[trace.flows[i].id].queued_delta -= int64_t(take);
      }
    }
    for (size_t i = 0; i < trace.flows.size(); ++i) {
      uint64_t room = budget > served_total ? budget - served_total : 0;
      uint64_t take = std::min(arrivals[i], room);
      served_total += take;
      add_processed(i, take, rec, t0);
      uint64_t rest = arrivals[i] - take;
      if (rest > 0) {
        uint64_t q_room = cfg.queue_bound > global_queue[i]
                              ? cfg.queue_bound - global_queue[i]
                              : 0;
        uint64_t queued = std::min(rest, q_room);
        global_queue[i] += queued;
        auto& fl = rec.flow_log[trace.flows[i].id];
        fl.queued_delta += int64_t(queued);
        fl.dropped += rest - queued;
        rec.drops += rest - queued;
      }
    }
    timeline.total_dropped += rec.drops;

    // Aggregate rates and CPU core usage.
    uint64_t nic_cnt = 0, cpu_cnt = 0;
    double cpu_cores = 0;
    for (const auto& [fid, fl] : rec.flow_log) {
      nic_cnt += fl.to_nic;
      cpu_cnt += fl.to_cpu;
    }
    for (const auto& [key, ps] : pairs) {
      std::string owner = ps.win_begin >= 0 && !ps.next_owner.empty() ? ps.next_owner
                                                                      : ps.owner;
      if (owner != kCpuPlacement) continue;
      double pps = 0;
      for (size_t fi : ps.flow_idx) {
        auto it = rec.flow_log.find(trace.flows[fi].id);
        if (it != rec.flow_log.end()) pps += it->second.to_cpu / cfg.epoch_len;
      }
      cpu_cores += pps * double(ir.block(key.first).instructions.size()) / cfg.cpu_core_rate;
    }
    rec.nic_processed_pps = nic_cnt / cfg.epoch_len;
    rec.cpu_processed_pps = cpu_cnt / cfg.epoch_len;
    rec.cpu_cores = cpu_cores;
    timeline.total_processed_nic += nic_cnt;
    timeline.total_processed_cpu += cpu_cnt;

    // Per-core idle-time samples.
    double idle_base = predicted_idle(offered_pps, capacity);
    std::vector<double> samples(profile.n_threads);
    std::normal_distribution<double> noise(0.0, cfg.idle_noise_cv);
    for (auto& s : samples) s = std::max(0.0, idle_base * (1.0 + noise(rng)));
    std::sort(samples.begin(), samples.end());
    size_t pidx = std::min(samples.size() - 1,
                           size_t(cfg.idle_percentile * samples.size()));
    rec.idle_p10 = samples[pidx];

    // Close out migrations and flush counts owed to new owners.
    finish_migrations(t0);
    flush_pending_post();

    rec.state_occupancy = occupancy();

    // Controller.
    EpochStats stats;
    stats.idle_stat = rec.idle_p10;
    stats.nic_rate = offered_pps;
    stats.occupancy = rec.state_occupancy;
    stats.capacity = state_capacity;

    nic_hk.clear();
    cpu_hk.clear();
    for (size_t i = 0; i < trace.flows.size(); ++i) {
      const auto& fl = rec.flow_log[trace.flows[i].id];
      uint64_t served = fl.to_nic + fl.to_cpu;
      if (served == 0) continue;
      // A flow is a candidate on the side where it holds state: NIC-resident
      // pairs make it evictable, CPU-resident ones promotable.
      bool on_nic = false, on_cpu = false;
      for (const auto& key : flow_pairs[i]) {
        if (pairs.at(key).owner == kCpuPlacement)
          on_cpu = true;
        else
          on_nic = true;
      }
      if (on_nic) nic_hk.update(flow_fp[i], served);
      if (on_cpu) cpu_hk.update(flow_fp[i], served);
    }
    stats.cpu_elephants = cpu_hk.topk(cfg.topk);

    if (controller_on) {
      // Forced evictions when a table shrank below its occupancy: smallest
      // flows leave first.
      plan_capacity_evictions(stats);
      rec.overloaded = detect_overload(stats, cfg.idle_threshold);
      if (rec.overloaded)
        plan_overload(stats, scale, nic_hk, offered_pps);
      else
        plan_underload(stats, scale, offered_pps, capacity);
    }
    return rec;
  }

  void plan_capacity_evictions(const EpochStats& stats) {
    for (const auto& [state, occ] : stats.occupancy) {
      uint64_t cap = state_capacity.at(state);
      if (occ <= cap) continue;
      std::vector<std::pair<uint64_t, PairKey>> nic_pairs;
      for (const auto& [key, ps] : pairs) {
        if (ps.owner == kCpuPlacement) continue;
        const StateBlock& b = ir.block(key.first);
        if (std::find(b.states.begin(), b.states.end(), state) != b.states.end())
          nic_pairs.push_back({ps.volume_pps, key});
      }
      std::sort(nic_pairs.begin(), nic_pairs.end());
      uint64_t need = occ - cap;
      for (const auto& [_, key] : nic_pairs) {
        if (need == 0) break;
        pending.push_back({MigrationDirection::NicToCpu, key});
        --need;
      }
    }
  }

  void plan_overload(const EpochStats& stats, double scale, HeavyKeeper& nic_hk,
                     double offered_pps) {
    auto elephants = nic_hk.topk(cfg.topk);
    uint64_t epoch_volume = uint64_t(offered_pps * cfg.epoch_len);
    std::map<uint64_t, size_t> by_fp;
    for (size_t i = 0; i < trace.flows.size(); ++i) by_fp[flow_fp[i]] = i;

    std::vector<PairKey> candidates;
    for (const auto& [fp, count] : elephants) {
      if (count < uint64_t(cfg.min_elephant_share * double(epoch_volume))) continue;
      auto it = by_fp.find(fp);
      if (it == by_fp.end()) continue;
      for (const auto& key : flow_pairs[it->second]) {
        if (pairs.at(key).owner == kCpuPlacement) continue;
        if (std::find(candidates.begin(), candidates.end(), key) == candidates.end())
          candidates.push_back(key);
      }
    }
    if (cfg.policy == VictimPolicy::HeavyFirst) {
      std::sort(candidates.begin(), candidates.end(), [&](const PairKey& a, const PairKey& b) {
        double ra = pairs.at(a).volume_pps * scale / block_max_throughput.at(a.first);
        double rb = pairs.at(b).volume_pps * scale / block_max_throughput.at(b.first);
        if (ra != rb) return ra > rb;
        return a < b;
      });
    } else {
      std::shuffle(candidates.begin(), candidates.end(), rng);
    }

    std::map<PairKey, std::string> hypo;
    for (const auto& key : candidates) {
      if (pending.size() >= cfg.max_concurrent_migrations) break;
      hypo[key] = kCpuPlacement;
      pending.push_back({MigrationDirection::NicToCpu, key});
      double cap = nic_capacity(scale, &hypo);
      if (predicted_idle(stats.nic_rate, cap) > cfg.idle_threshold) break;
    }
  }

  void plan_underload(const EpochStats& stats, double scale, double offered_pps,
                      double capacity) {
    std::map<uint64_t, size_t> by_fp;
    for (size_t i = 0; i < trace.flows.size(); ++i) by_fp[flow_fp[i]] = i;

    // Heaviest CPU flows first.
    std::vector<size_t> cpu_flows;
    for (const auto& [fp, count] : stats.cpu_elephants) {
      auto it = by_fp.find(fp);
      if (it != by_fp.end()) cpu_flows.push_back(it->second);
    }

    std::map<PairKey, std::string> hypo;
    bool filled_any = false;
    for (size_t fi : cpu_flows) {
      if (pending.size() >= cfg.max_concurrent_migrations) break;
      for (const auto& key : flow_pairs[fi]) {
        if (pending.size() >= cfg.max_concurrent_migrations) break;
        const PairState& ps = pairs.at(key);
        if (ps.owner != kCpuPlacement || hypo.count(key)) continue;
        const StateBlock& b = ir.block(key.first);
        bool has_slot = true;
        for (const auto& s : b.states)
          has_slot &= stats.occupancy.at(s) + 1 <= state_capacity.at(s);
        if (!has_slot) continue;
        std::string tier = profile.tier_order.empty() ? kCpuPlacement
                                                      : profile.tier_order.front();
        hypo[key] = tier;
        double cap = nic_capacity(scale, &hypo);
        if (offered_pps > (1.0 - cfg.headroom) * cap ||
            predicted_idle(offered_pps, cap) <= cfg.idle_threshold) {
          hypo.erase(key);
          continue;
        }
        pending.push_back({MigrationDirection::CpuToNic, key});
        filled_any = true;
      }
    }
    if (filled_any || cpu_flows.empty()) return;

    // No free slot: swap a CPU elephant against the lightest NIC aggregate
    // when its rate beats the per-flow average on the NIC.
    double min_avg = std::numeric_limits<double>::infinity();
    for (const auto& [state, occ] : stats.occupancy)
      if (occ > 0) min_avg = std::min(min_avg, offered_pps / double(occ));
    size_t fi = cpu_flows.front();
    double elephant_rate = trace.flows[fi].volume_pps * scale;
    if (elephant_rate <= min_avg) return;
    for (const auto& key : flow_pairs[fi]) {
      const PairState& ps = pairs.at(key);
      if (ps.owner != kCpuPlacement) continue;
      PairKey lightest;
      uint64_t best_vol = UINT64_MAX;
      for (const auto& [k2, ps2] : pairs) {
        if (ps2.owner == kCpuPlacement || k2.first != key.first) continue;
        if (ps2.volume_pps < best_vol) {
          best_vol = ps2.volume_pps;
          lightest = k2;
        }
      }
      if (best_vol == UINT64_MAX || best_vol >= ps.volume_pps) continue;
      if (pending.size() + 2 > cfg.max_concurrent_migrations) break;
      pending.push_back({MigrationDirection::NicToCpu, lightest});
      pending.push_back({MigrationDirection::CpuToNic, key});
      break;
    }
    (void)capacity;
  }
};

}  // namespace

Simulator::Simulator(const ProgramIR& ir, const TrafficTrace& trace,
                     const DeviceProfile& profile, const AllocationPlan& plan,
                     const SimConfig& cfg)
    : ir_(ir), trace_(trace), profile_(profile), plan_(plan), cfg_(cfg) {}

SimTimeline Simulator::run(const std::vector<ScheduleEntry>& schedule, double duration_s) {
  Engine eng(ir_, trace_, profile_, plan_, cfg_);
  HeavyKeeper nic_hk(1024, 4, 1.08, cfg_.seed ^ 0x1);
  HeavyKeeper cpu_hk(1024, 4, 1.08, cfg_.seed ^ 0x2);

  int epochs = std::max(1, int(std::llround(duration_s / cfg_.epoch_len)));
  for (int e = 0; e < epochs; ++e) {
    double t0 = e * cfg_.epoch_len;
    double scale = 1.0;
    std::map<std::string, uint64_t> overrides;
    for (const auto& s : schedule) {
      if (s.time_s <= t0 + 1e-12) {
        scale = s.scale_factor;
        for (const auto& [k, v] : s.table_size_override) overrides[k] = v;
      }
    }
    eng.timeline.epochs.push_back(
        eng.run_epoch(t0, scale, overrides, nic_hk, cpu_hk, cfg_.idle_threshold >= 0));
  }
  for (const auto& [key, ps] : eng.pairs)
    eng.timeline.final_counters[key] = ps.counter;
  for (uint64_t q : eng.global_queue) eng.timeline.final_queued += q;
  return eng.timeline;
}

double Simulator::calibrate_threshold(const ProgramIR& ir, const TrafficTrace& trace,
                                      const DeviceProfile& profile,
                                      const AllocationPlan& plan, const SimConfig& cfg,
                                      double load_fraction) {
  SimConfig quiet = cfg;
  quiet.idle_threshold = -1;  // controller off
  Simulator sim(ir, trace, profile, plan, quiet);

  Engine probe(ir, trace, profile, plan, quiet);
  double capacity = probe.nic_capacity(1.0);
  uint64_t total = trace.total_volume();
  if (total == 0 || capacity <= 0) return 0;
  double scale = load_fraction * capacity / double(total);

  SimTimeline t = sim.run({{0.0, scale, {}}}, quiet.epoch_len * 10);
  double acc = 0;
  for (const auto& e : t.epochs) acc += e.idle_p10;
  return acc / double(t.epochs.size());
}

void SimTimeline::save_csv(const std::string& timeline_path,
                           const std::string& migration_path) const {
  std::ofstream out(timeline_path);
  out << "epoch,t_begin,nic_pps,cpu_pps,cpu_cores,drops,migrations,idle_p10,overloaded\n";
  for (size_t i = 0; i < epochs.size(); ++i) {
    const auto& e = epochs[i];
    out << i << "," << format_double(e.t_begin) << "," << format_double(e.nic_processed_pps)
        << "," << format_double(e.cpu_processed_pps) << "," << format_double(e.cpu_cores)
        << "," << e.drops << "," << e.migrations.size() << ","
        << format_double(e.idle_p10) << "," << (e.overloaded ? 1 : 0) << "\n";
  }
  std::ofstream mig(migration_path);
  mig << "epoch,direction,block,aggregate,t_blocked,t_transferred,t_valid,"
         "packets_spun,retries,failed\n";
  for (size_t i = 0; i < epochs.size(); ++i) {
    for (const auto& m : epochs[i].migrations) {
      mig << i << ","
          << (m.direction == MigrationDirection::CpuToNic ? "cpu_to_nic" : "nic_to_cpu")
          << "," << m.block << "," << m.aggregate << ","
          << format_double(m.t_install_blocked) << ","
          << format_double(m.t_value_transferred) << "," << format_double(m.t_marked_valid)
          << "," << m.packets_spun << "," << m.retries << "," << (m.failed ? 1 : 0)
          << "\n";
    }
  }
}

}  // namespace cora
