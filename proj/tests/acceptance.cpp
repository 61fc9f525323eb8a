// Acceptance gate: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Heavier end-to-end checks than the unit suites; expected
// runtime well under the ctest timeout.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cora/common.hpp"
#include "cora/device_model.hpp"
#include "cora/heavykeeper.hpp"
#include "cora/nf_ir.hpp"
#include "cora/oracle.hpp"
#include "cora/planner.hpp"
#include "cora/sim.hpp"
#include "cora/trace.hpp"
#include "cora/trace_synth.hpp"

namespace fs = std::filesystem;
using namespace cora;

namespace {

int g_failed = 0;

void report(int n, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", n, name,
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

std::string env_or_die(const char* key) {
  const char* v = std::getenv(key);
  if (!v) {
    std::fprintf(stderr, "missing env %s\n", key);
    std::exit(2);
  }
  return v;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Corpus {
  std::string assets = env_or_die("CORA_ASSETS");
  std::string cli = env_or_die("CORA_CLI");
  ProgramIR ir;
  TrafficTrace trace;
  DeviceProfile profile;
  AllocationPlan alloc;

  Corpus() {
    ir = parse_program(slurp(assets + "/l4lb.nf"));
    trace = TrafficTrace::load_csv(assets + "/l4lb_trace.csv");
    profile = DeviceProfile::load_json(assets + "/profile_nfp.json");
    alloc = plan(ir, trace, profile, {double(trace.total_volume())});
  }
};

// Saturation throughput of a placed program: the lock-free bound, or the
// first lock to hit its serialization limit under proportional load growth.
double modeled_capacity(const Corpus& c, const AllocationPlan& alloc,
                        const TrafficTrace& trace) {
  std::map<std::pair<std::string, std::string>, OffloadedBlock> offload;
  uint64_t total = trace.total_volume();
  for (const auto& a : alloc.assignments) {
    if (a.placement == kCpuPlacement) continue;
    auto [it, fresh] = offload.try_emplace({a.pair.block, a.placement});
    OffloadedBlock& ob = it->second;
    if (fresh) {
      ob.block = a.pair.block;
      ob.tier = a.placement;
      ob.traffic_fraction = 0;
    }
    ob.traffic_fraction += total > 0 ? a.pair.volume_pps / double(total) : 0;
    if (c.ir.block(a.pair.block).has_write)
      ob.element_volumes.push_back(
          {a.pair.block, a.pair.aggregate_id, double(a.pair.volume_pps)});
  }
  std::vector<OffloadedBlock> blocks;
  for (auto& [_, ob] : offload) blocks.push_back(ob);
  double offered = double(total);
  ThroughputReport rep = estimate_program(c.profile, c.ir, blocks, offered);
  double cap = std::min(c.profile.base_forward_rate, rep.t_lockfree);
  for (const auto& ob : blocks) {
    auto it = rep.t_lock_per_block.find(ob.block);
    if (it == rep.t_lock_per_block.end()) continue;
    for (const auto& ev : ob.element_volumes)
      if (ev.volume > 0) cap = std::min(cap, it->second * offered / ev.volume);
  }
  return cap;
}

// ---------------------------------------------------------------------------

void criterion_1_roofline_roundtrip() {
  auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20260826);
  std::uniform_real_distribution<double> log_t(6.0, 9.0), da(0.5, 4.0), db(0.2, 2.0);

  const int n_curves = 50;
  double err_sum = 0;
  int noisy_fits_bad = 0, exact_bad = 0;
  for (int cidx = 0; cidx < n_curves; ++cidx) {
    RooflineParams truth{std::pow(10.0, log_t(rng)), da(rng), db(rng)};
    std::vector<std::pair<double, double>> noisy, exact;
    for (int j = 0; j < 19; ++j) {
      double i = 0.25 * std::pow(2.0, 0.5 * j);  // 0.25 .. 128
      noisy.push_back({i, synth_curve_sample(truth, i, 0.02, cidx * 131 + j)});
      exact.push_back({i, roofline_eval(truth, i)});
    }
    FitResult f = fit_roofline(noisy);
    err_sum += f.mean_rel_error;
    if (f.mean_rel_error > 0.10) ++noisy_fits_bad;

    FitResult g = fit_roofline(exact);
    auto rel = [](double got, double want) { return std::abs(got - want) / want; };
    if (rel(g.params.t_max, truth.t_max) > 0.05 || rel(g.params.a, truth.a) > 0.05 ||
        rel(g.params.b, truth.b) > 0.05)
      ++exact_bad;
  }
  double mean_err = err_sum / n_curves;
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "mean fit error %.4f (<=0.03), %d/%d zero-noise fits off by >5%%, %.1fs",
                mean_err, exact_bad, n_curves, secs);
  report(1, "roofline round-trip", mean_err <= 0.03 && exact_bad == 0 && secs < 30.0, buf);
}

void criterion_2_model_vs_oracle() {
  auto start = std::chrono::steady_clock::now();
  Corpus& c = *new Corpus();  // fresh profile; leaked intentionally, short program
  std::mt19937_64 rng(424242);
  std::uniform_int_distribution<int> d_blocks(1, 3), d_acc(1, 2), d_int(1, 20);
  std::uniform_real_distribution<double> d01(0.0, 1.0);
  const std::vector<uint32_t> sizes = {4, 8, 128};
  const std::vector<std::string> tiers = {"imem", "emem"};

  double rel_sum = 0;
  int n = 100;
  for (int t = 0; t < n; ++t) {
    ProgramIR pir;
    std::vector<OffloadedBlock> off;
    int nb = d_blocks(rng);
    for (int b = 0; b < nb; ++b) {
      StateBlock blk;
      blk.id = "b" + std::to_string(b);
      blk.has_write = d01(rng) < 0.5;
      uint32_t sz = sizes[rng() % sizes.size()];
      if (blk.has_write) {
        blk.accesses.push_back({false, true, sz, double(d_int(rng))});
        blk.accesses.push_back({true, true, sz, double(d_int(rng))});
      } else {
        int na = d_acc(rng);
        for (int a = 0; a < na; ++a)
          blk.accesses.push_back({false, d01(rng) < 0.5, sizes[rng() % sizes.size()],
                                  double(d_int(rng))});
      }
      pir.blocks.push_back(blk);

      OffloadedBlock ob;
      ob.block = blk.id;
      ob.tier = tiers[rng() % tiers.size()];
      ob.traffic_fraction = 1.0;
      if (blk.has_write) {
        int ne = 1 + int(rng() % 4);
        for (int e = 0; e < ne; ++e)
          ob.element_volumes.push_back({blk.id, "e" + std::to_string(e),
                                        1e4 + d01(rng) * 1e6});
      }
      off.push_back(ob);
    }
    double offered = 1e8;
    ThroughputReport model = estimate_program(c.profile, pir, off, offered);
    OracleConfig cfg;
    cfg.noise_cv = 0.02;
    cfg.duration_s = 1.0;
    cfg.epoch_s = 0.01;
    cfg.queue_bound = 1000;
    cfg.seed = 900 + t;
    OracleResult sim = synth_profile_oracle(c.profile, pir, off, offered, cfg);
    rel_sum += std::abs(sim.throughput - model.t_program) / model.t_program;
  }
  double mean_rel = rel_sum / n;
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char buf[120];
  std::snprintf(buf, sizeof(buf), "mean relative error %.4f (<0.10), %.1fs", mean_rel, secs);
  report(2, "hybrid model vs synthetic oracle", mean_rel < 0.10 && secs < 120.0, buf);
}

void criterion_3_access_table(const Corpus& c) {
  std::string dir = "/tmp/cora_acc_c3";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string cmd = c.cli + " predict --program " + c.assets + "/l4lb.nf --trace " +
                    c.assets + "/l4lb_trace.csv --profile " + c.assets +
                    "/profile_nfp.json --plan " + c.assets +
                    "/l4lb_table3_plan.json --out report --format csv --out-dir " + dir +
                    " > /dev/null 2>&1";
  if (std::system(cmd.c_str()) != 0) {
    report(3, "access-parameter table via CLI", false, "predict command failed");
    return;
  }
  std::multiset<std::string> got, want = {
      "conn_tbl,emem,read,bulk,4,1",
      "dip_cntr,imem,read,atomic,4,1",
      "dip_cntr,imem,write,atomic,4,1",
      "min_dip+min_load,imem,read,atomic,4,2",
      "min_dip+min_load,imem,write,atomic,4,2",
  };
  std::ifstream in(dir + "/report.csv");
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line) && !line.empty() && line[0] != '#') got.insert(line);
  report(3, "access-parameter table via CLI", got == want,
         got == want ? "5 rows exact" : "row mismatch");
}

void criterion_4_lock_linearity() {
  DeviceProfile p;
  p.name = "lockbench";
  p.curves["mem/read/atomic/4"] = {3.2e7, 1.0, 0.0};
  p.curves["mem/write/atomic/4"] = {3.2e7, 1.0, 0.0};
  p.cross_mode["mem"] = CombineRule::Shared;
  p.cross_tier = CombineRule::SlowerOp;
  p.tier_order = {"mem"};
  p.tier_capacity_bytes["mem"] = 1 << 20;
  p.n_threads = 16;
  p.base_forward_rate = 1e9;

  ProgramIR pir;
  StateBlock blk;
  blk.id = "cnt";
  blk.has_write = true;
  blk.accesses.push_back({false, true, 4, 1.0});
  blk.accesses.push_back({true, true, 4, 1.0});
  pir.blocks.push_back(blk);

  const double t_lockfree = 8e6, t_lock = t_lockfree / 16;
  const double v = 0.998 * t_lock;
  std::vector<double> model_t, oracle_t;
  for (int n = 1; n <= 32; ++n) {
    OffloadedBlock ob{"cnt", "mem", 1.0, {}};
    for (int e = 0; e < n; ++e)
      ob.element_volumes.push_back({"cnt", "e" + std::to_string(e), v});
    double offered = n * v;
    ThroughputReport rep = estimate_program(p, pir, {ob}, offered);
    model_t.push_back(rep.t_program);
    OracleConfig cfg;
    cfg.noise_cv = 0.0;
    cfg.duration_s = 1.0;
    cfg.epoch_s = 0.01;
    cfg.queue_bound = 1000;
    OracleResult sim = synth_profile_oracle(p, pir, {ob}, offered, cfg);
    oracle_t.push_back(sim.throughput);
  }

  auto r2_linear = [](const std::vector<double>& y, int lo, int hi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = hi - lo + 1;
    for (int i = lo; i <= hi; ++i) {
      double x = i + 1;
      sx += x; sy += y[i]; sxx += x * x; sxy += x * y[i];
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double icpt = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0, mean = sy / n;
    for (int i = lo; i <= hi; ++i) {
      double x = i + 1;
      ss_res += std::pow(y[i] - (slope * x + icpt), 2);
      ss_tot += std::pow(y[i] - mean, 2);
    }
    return 1.0 - ss_res / ss_tot;
  };
  auto flat = [&](const std::vector<double>& y) {
    for (int i = 17; i < 32; ++i)
      if (std::abs(y[i] - t_lockfree) / t_lockfree > 0.01) return false;
    return true;
  };
  double r2m = r2_linear(model_t, 0, 13), r2o = r2_linear(oracle_t, 0, 13);
  bool ok = r2m > 0.999 && r2o > 0.999 && flat(model_t) && flat(oracle_t);
  char buf[120];
  std::snprintf(buf, sizeof(buf), "R2 model %.6f, oracle %.6f, plateau at lock-free bound %s",
                r2m, r2o, flat(model_t) && flat(oracle_t) ? "yes" : "no");
  report(4, "lock-throughput linearity then plateau", ok, buf);
}

void criterion_5_planner_optimality() {
  auto start = std::chrono::steady_clock::now();
  const char* prog = R"(
states {
  register cnt size 1024 width 32 group flows;
  table lut size 64 width 32 group coarse;
}
flowgroups {
  fields ip;
  flows one_to_one key field(ip);
  coarse many_to_one key hash(ip, 4);
}
pipeline {
  c = read cnt;
  c2 = alu c;
  w = write cnt c2;
  l = read lut;
  o = emit l c2;
}
)";
  ProgramIR ir = parse_program(prog);
  DeviceProfile p;
  p.name = "tiny";
  for (const char* op : {"read", "write"})
    for (const char* mode : {"atomic", "bulk"})
      p.curves[std::string("mem/") + op + "/" + mode + "/4"] = {5e6, 1.0, 0.0};
  p.cross_mode["mem"] = CombineRule::SlowerOp;
  p.cross_tier = CombineRule::SlowerOp;
  p.tier_order = {"mem"};
  p.tier_capacity_bytes["mem"] = 1 << 16;
  p.n_threads = 4;
  p.base_forward_rate = 5e6;
  p.pcie_budget = 1e10;

  std::mt19937_64 rng(1234);
  int optimal = 0, bound_ok = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    TrafficTrace trace;
    trace.packet_size_bytes = 128;
    int nf = std::uniform_int_distribution<int>(2, 4)(rng);
    for (int i = 0; i < nf; ++i) {
      Flow f;
      f.id = "f" + std::to_string(i);
      f.fields["ip"] = 100 + i;
      f.volume_pps = std::uniform_int_distribution<uint64_t>(1000, 300000)(rng);
      trace.flows.push_back(f);
    }
    double target =
        std::uniform_real_distribution<double>(0.5, 1.5)(rng) * trace.total_volume();
    AllocationPlan greedy = plan(ir, trace, p, {target});
    AllocationPlan exact = brute_force_plan(ir, trace, p, {target});
    if (std::abs(greedy.cpu_objective - exact.cpu_objective) <= 1e-9 &&
        greedy.meets_target == exact.meets_target)
      ++optimal;
    if (greedy.candidates_evaluated <= greedy.assignments.size() + ir.blocks.size())
      ++bound_ok;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char buf[120];
  std::snprintf(buf, sizeof(buf), "%d/%d optimal, %d/%d within candidate bound, %.1fs",
                optimal, trials, bound_ok, trials, secs);
  report(5, "greedy planner matches brute-force optimum",
         optimal == trials && bound_ok == trials && secs < 60.0, buf);
}

void criterion_6_offload_ratio_invariance(const Corpus& c) {
  // Constrained memory so the plan must leave some aggregates on the CPU.
  DeviceProfile prof = c.profile;
  prof.tier_capacity_bytes["imem"] = 256;
  prof.tier_capacity_bytes["emem"] = 512;

  TraceSynthSpec base = TraceSynthSpec::load_json(c.assets + "/l4lb_synth_spec.json");
  bool flat_ok = true, beats_baseline = true;
  std::string detail;
  for (double r : {0.1, 0.5, 0.9}) {
    double lo = 2, hi = -1;
    for (double mean : {10.0, 100.0, 1000.0}) {
      TraceSynthSpec spec = base;
      spec.mean_volume = mean;
      spec.branches[0].ratio = r;
      spec.branches[1].ratio = 1.0 - r;
      TrafficTrace trace = synthesize_trace(spec, 3);
      PerformanceTarget tgt{double(trace.total_volume())};
      AllocationPlan p = plan(c.ir, trace, prof, tgt);
      AllocationPlan q = flow_partition_plan(c.ir, trace, prof, tgt);
      double ratio = offloading_ratio(c.ir, p);
      double baseline = offloading_ratio(c.ir, q);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      if (ratio < baseline - 1e-12) beats_baseline = false;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), " r=%.1f spread %.4f", r, hi - lo);
    detail += buf;
    if (hi - lo > 0.02) flat_ok = false;
  }
  report(6, "offloading ratio invariant to flow-size mean", flat_ok && beats_baseline,
         detail + (beats_baseline ? "" : "; fell below flow-partition baseline"));
}

void criterion_7_migration_consistency(const Corpus& c) {
  SimConfig cfg;
  cfg.cpu_core_rate = 1e6;
  cfg.seed = 1;
  cfg.idle_threshold =
      Simulator::calibrate_threshold(c.ir, c.trace, c.profile, c.alloc, cfg);
  std::vector<ScheduleEntry> sched = {
      {0.0, 80.0, {}}, {1.0, 80.0, {{"conn_tbl", 40}}}, {2.0, 80.0, {{"conn_tbl", 65536}}}};

  int bad_seeds = 0;
  uint64_t min_pkts = UINT64_MAX, min_migs = UINT64_MAX;
  for (int s = 0; s < 50; ++s) {
    SimConfig sc = cfg;
    sc.seed = 1000 + s;
    Simulator sim(c.ir, c.trace, c.profile, c.alloc, sc);
    SimTimeline tl = sim.run(sched, 3.0);

    bool ok = !tl.device_malfunction;
    uint64_t migs = 0;
    std::map<std::string, uint64_t> done;
    for (const auto& ep : tl.epochs) {
      migs += ep.migrations.size();
      for (const auto& [fid, log] : ep.flow_log) {
        if (log.arrived !=
            log.to_nic + log.to_cpu + log.dropped + uint64_t(log.queued_delta))
          ok = false;
        done[fid] += log.to_nic + log.to_cpu;
      }
    }
    // counter conservation: every processed packet updated each state pair of
    // its flow exactly once
    for (const auto& a : c.alloc.assignments) {
      uint64_t expect = 0;
      for (const auto& fid : a.pair.flow_ids) expect += done[fid];
      auto it = tl.final_counters.find({a.pair.block, a.pair.aggregate_id});
      if (it == tl.final_counters.end() || it->second != expect) ok = false;
    }
    // shadow oracle: ownership intervals are ordered and account for every
    // counter update
    for (const auto& [key, ivs] : tl.ownership) {
      uint64_t sum = 0;
      double prev = 0;
      for (const auto& iv : ivs) {
        if (iv.t_begin < prev - 1e-12 || iv.t_end < iv.t_begin) ok = false;
        prev = iv.t_end;
        sum += iv.packets;
      }
      if (sum != tl.final_counters.at(key)) ok = false;
    }
    min_pkts = std::min(min_pkts, tl.total_arrived);
    min_migs = std::min(min_migs, migs);
    if (!ok || tl.total_arrived < 100000 || migs < 20) ++bad_seeds;
  }
  char buf[140];
  std::snprintf(buf, sizeof(buf),
                "%d/50 seeds violated; min packets %llu, min migrations %llu",
                bad_seeds, (unsigned long long)min_pkts, (unsigned long long)min_migs);
  report(7, "migration consistency over 50 seeds", bad_seeds == 0, buf);
}

void criterion_8_overload_separation(const Corpus& c) {
  double cap = modeled_capacity(c, c.alloc, c.trace);
  double total = double(c.trace.total_volume());
  SimConfig cfg;
  cfg.cpu_core_rate = 1e6;
  cfg.seed = 11;
  cfg.idle_threshold =
      Simulator::calibrate_threshold(c.ir, c.trace, c.profile, c.alloc, cfg);

  int drop_runs = 0, missed = 0, false_pos = 0;
  for (int i = 1; i <= 15; ++i) {
    double x = 0.1 * i;  // load as a fraction of modeled capacity
    Simulator sim(c.ir, c.trace, c.profile, c.alloc, cfg);
    SimTimeline tl = sim.run({{0.0, x * cap / total, {}}}, 1.5);
    bool flagged = false;
    for (const auto& ep : tl.epochs) flagged |= ep.overloaded;
    if (tl.total_dropped > 0) {
      ++drop_runs;
      if (!flagged) ++missed;
    }
    if (x <= 0.801 && flagged) ++false_pos;
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf),
                "%d drop runs, %d unflagged, %d false positives at <=80%% load",
                drop_runs, missed, false_pos);
  report(8, "overload-indicator separation", drop_runs > 0 && missed == 0 && false_pos == 0,
         buf);
}

void criterion_9_eviction_policies(const Corpus& c) {
  // Long-tail traffic: a few elephants, many mice.
  TraceSynthSpec spec = TraceSynthSpec::load_json(c.assets + "/l4lb_synth_spec.json");
  spec.flow_count = 256;
  spec.pareto_shape = 1.2;
  TrafficTrace trace = synthesize_trace(spec, 17);
  AllocationPlan alloc = plan(c.ir, trace, c.profile, {double(trace.total_volume())});

  SimConfig cfg;
  cfg.cpu_core_rate = 1e6;
  cfg.seed = 5;
  cfg.idle_threshold = Simulator::calibrate_threshold(c.ir, trace, c.profile, alloc, cfg);
  double cap = modeled_capacity(c, alloc, trace);
  double total = double(trace.total_volume());
  std::vector<ScheduleEntry> sched = {{0.0, 0.6 * cap / total, {}},
                                      {0.5, 1.3 * cap / total, {}}};

  auto evictions = [&](VictimPolicy policy, uint64_t seed) {
    SimConfig sc = cfg;
    sc.policy = policy;
    sc.seed = seed;
    Simulator sim(c.ir, trace, c.profile, alloc, sc);
    SimTimeline tl = sim.run(sched, 1.5);
    uint64_t n = 0;
    for (const auto& ep : tl.epochs)
      for (const auto& m : ep.migrations)
        n += m.direction == MigrationDirection::NicToCpu;
    return n;
  };
  uint64_t heavy = evictions(VictimPolicy::HeavyFirst, 5);
  double random_mean = 0;
  for (uint64_t s = 5; s < 10; ++s) random_mean += double(evictions(VictimPolicy::Random, s));
  random_mean /= 5;
  char buf[120];
  std::snprintf(buf, sizeof(buf), "heavy-first evicted %llu, random mean %.1f",
                (unsigned long long)heavy, random_mean);
  report(9, "random eviction migrates >=2x heavy-first", heavy > 0 && random_mean >= 2.0 * heavy,
         buf);
}

void criterion_10_heavykeeper_precision() {
  const int flows = 10000, k = 50;
  const uint64_t packets = 100000;
  std::vector<double> w(flows);
  for (int i = 0; i < flows; ++i) w[i] = 1.0 / std::pow(i + 1, 0.99);
  std::discrete_distribution<int> zipf(w.begin(), w.end());
  std::mt19937_64 rng(99);

  HeavyKeeper hk(8192, 4, 1.08, 7);
  std::map<int, uint64_t> exact;
  for (uint64_t p = 0; p < packets; ++p) {
    int f = zipf(rng);
    ++exact[f];
    hk.update(mix64(uint64_t(f) + 1));
  }
  std::vector<std::pair<uint64_t, int>> by_count;
  for (const auto& [f, n] : exact) by_count.push_back({n, f});
  std::sort(by_count.rbegin(), by_count.rend());
  uint64_t kth = by_count[k - 1].first;
  std::set<uint64_t> heavy_fp;  // fingerprints whose exact count passes the k-th
  for (const auto& [n, f] : by_count) {
    if (n < kth) break;
    heavy_fp.insert(mix64(uint64_t(f) + 1));
  }
  int hits = 0;
  for (const auto& [fp, _] : hk.topk(k)) hits += heavy_fp.count(fp);
  double precision = double(hits) / k;
  char buf[80];
  std::snprintf(buf, sizeof(buf), "precision %.3f (>=0.9)", precision);
  report(10, "top-k sketch precision on Zipf traffic", precision >= 0.9, buf);
}

bool dirs_identical(const fs::path& a, const fs::path& b) {
  std::map<std::string, std::string> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa[fs::relative(e.path(), a).string()] = slurp(e.path().string());
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb[fs::relative(e.path(), b).string()] = slurp(e.path().string());
  return fa == fb;
}

void criterion_11_cli_determinism(const Corpus& c) {
  fs::path dir = "/tmp/cora_acc_det";
  fs::path saved = "/tmp/cora_acc_det_saved";
  auto run_all = [&]() {
    fs::remove_all(dir);
    fs::create_directories(dir / "plan");
    fs::create_directories(dir / "pred");
    fs::create_directories(dir / "sim");
    std::string a = c.assets;
    std::vector<std::string> cmds = {
        c.cli + " synth-trace --spec " + a + "/l4lb_synth_spec.json --seed 9 --out " +
            (dir / "trace.csv").string(),
        c.cli + " plan --program " + a + "/l4lb.nf --trace " + a +
            "/l4lb_trace.csv --profile " + a +
            "/profile_nfp.json --target-pps 83009 --seed 9 --out-dir " +
            (dir / "plan").string(),
        c.cli + " predict --program " + a + "/l4lb.nf --trace " + a +
            "/l4lb_trace.csv --profile " + a + "/profile_nfp.json --plan " + a +
            "/l4lb_table3_plan.json --out report --format json --seed 9 --out-dir " +
            (dir / "pred").string(),
        c.cli + " simulate --program " + a + "/l4lb.nf --trace " + a +
            "/l4lb_trace.csv --profile " + a + "/profile_nfp.json --plan " +
            (dir / "plan" / "plan.json").string() + " --schedule " + a +
            "/overload_schedule.json --duration 1.0 --threshold 1.4e-7 --seed 9 --out-dir " +
            (dir / "sim").string(),
    };
    for (const auto& cmd : cmds)
      if (std::system((cmd + " > /dev/null 2>&1").c_str()) != 0) return false;
    return true;
  };

  if (!run_all()) {
    report(11, "CLI outputs are byte-identical across reruns", false, "a command failed");
    return;
  }
  fs::remove_all(saved);
  fs::rename(dir, saved);
  if (!run_all()) {
    report(11, "CLI outputs are byte-identical across reruns", false, "rerun failed");
    return;
  }
  bool same = dirs_identical(dir, saved);
  report(11, "CLI outputs are byte-identical across reruns", same,
         same ? "synth-trace, plan, predict, simulate" : "digest mismatch");
}

}  // namespace

int main() {
  Corpus corpus;
  criterion_1_roofline_roundtrip();
  criterion_2_model_vs_oracle();
  criterion_3_access_table(corpus);
  criterion_4_lock_linearity();
  criterion_5_planner_optimality();
  criterion_6_offload_ratio_invariance(corpus);
  criterion_7_migration_consistency(corpus);
  criterion_8_overload_separation(corpus);
  criterion_9_eviction_policies(corpus);
  criterion_10_heavykeeper_precision();
  criterion_11_cli_determinism(corpus);
  std::printf("%d of 11 criteria failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
