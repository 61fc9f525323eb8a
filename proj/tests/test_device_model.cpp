#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <random>

#include "cora/device_model.hpp"
#include "cora/nf_ir.hpp"
#include "cora/oracle.hpp"

using namespace cora;

namespace {

std::string assets() {
  const char* p = std::getenv("CORA_ASSETS");
  REQUIRE(p != nullptr);
  return p;
}

std::string slurp_file(const std::string& path) {
  FILE* f = fopen(path.c_str(), "rb");
  REQUIRE(f != nullptr);
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, n);
  fclose(f);
  return out;
}

// Minimal profile with b=0 curves M(i) = t_max * i / (a + i).
DeviceProfile simple_profile() {
  DeviceProfile p;
  p.name = "simple";
  p.curves["x/read/atomic/4"] = {100.0, 1.0, 0.0};
  p.curves["x/write/atomic/4"] = {60.0, 2.0, 0.0};
  p.curves["x/read/bulk/4"] = {150.0, 1.5, 0.0};
  p.curves["y/read/atomic/4"] = {40.0, 1.0, 0.0};
  p.cross_mode["x"] = CombineRule::SlowerOp;
  p.cross_mode["y"] = CombineRule::SlowerOp;
  p.cross_tier = CombineRule::SlowerOp;
  p.tier_order = {"x", "y"};
  p.tier_capacity_bytes["x"] = 1 << 20;
  p.tier_capacity_bytes["y"] = 1 << 24;
  p.n_threads = 4;
  p.base_forward_rate = 1000.0;
  p.pcie_budget = 1e9;
  return p;
}

}  // namespace

TEST_CASE("roofline evaluates the closed form") {
  RooflineParams p{30e6, 2.0, 0.5};
  CHECK(roofline_eval(p, 10.0) == doctest::Approx(26059097.658150062).epsilon(1e-12));
  CHECK(roofline_eval(p, 0.0) == 0.0);
  RooflineParams q{100.0, 1.0, 0.0};
  CHECK(roofline_eval(q, 4.0) == doctest::Approx(80.0).epsilon(1e-12));  // b=0 reduction
}

TEST_CASE("roofline limits: linear ramp at low intensity, t_max at high") {
  RooflineParams p{5e8, 1.7, 3.2};
  // i -> 0: denominator -> a, so M ~ t_max * i / a
  CHECK(roofline_eval(p, 1e-4) == doctest::Approx(p.t_max * 1e-4 / p.a).epsilon(1e-3));
  // i -> inf: the queuing term vanishes and M -> t_max
  CHECK(roofline_eval(p, 1e7) == doctest::Approx(p.t_max).epsilon(1e-5));
}

TEST_CASE("fit recovers known parameters") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    RooflineParams truth;
    truth.t_max = std::uniform_real_distribution<double>(1e6, 1e9)(rng);
    truth.a = std::uniform_real_distribution<double>(0.5, 5.0)(rng);
    truth.b = std::uniform_real_distribution<double>(0.0, 8.0)(rng);
    std::vector<std::pair<double, double>> samples;
    for (double i = 0.5; i <= 32; i *= 1.4142)
      samples.push_back({i, roofline_eval(truth, i)});
    FitResult r = fit_roofline(samples);
    CHECK(r.mean_rel_error < 1e-4);
    for (const auto& [i, m] : samples)
      CHECK(roofline_eval(r.params, i) == doctest::Approx(m).epsilon(1e-3));
  }
}

TEST_CASE("fit with noise stays within tolerance") {
  RooflineParams truth{3e8, 2.2, 4.0};
  std::vector<std::pair<double, double>> samples;
  for (double i = 0.5; i <= 32; i *= 1.3)
    samples.push_back({i, synth_curve_sample(truth, i, 0.02, 7)});
  FitResult r = fit_roofline(samples);
  CHECK(r.mean_rel_error < 0.03);
}

TEST_CASE("fit rejects underdetermined input") {
  CHECK_THROWS_AS(fit_roofline({{1.0, 5.0}}), ModelError);
  CHECK_THROWS_AS(fit_roofline({{1, 5}, {1, 5}, {1, 5}, {1, 5}}), ModelError);
  CHECK_THROWS_AS(fit_roofline({{1, -5}, {2, 3}, {3, 4}, {4, 5}}), ModelError);
}

TEST_CASE("hybrid composition matches the hand-computed four-step case") {
  DeviceProfile p = simple_profile();
  std::vector<PlacedAccess> acc = {
      {{"x", false, true, 4}, 2.0},   // M=66.67 at i=2
      {{"x", true, true, 4}, 1.0},    // M=20 at i=1; group harmonic = 37.5
      {{"x", false, false, 4}, 3.0},  // M=100; cross-mode min -> 37.5
      {{"y", false, true, 4}, 2.0},   // M=26.67; cross-tier min -> 26.67
  };
  HybridResult h = hybrid_throughput(acc, p);
  CHECK(h.m_h == doctest::Approx(26.666666666666668).epsilon(1e-12));
  CHECK(h.total_intensity == doctest::Approx(8.0));
  CHECK(h.t_h == doctest::Approx(3.3333333333333335).epsilon(1e-12));
}

TEST_CASE("hybrid shared rule uses the weighted harmonic mean") {
  DeviceProfile p = simple_profile();
  p.cross_mode["x"] = CombineRule::Shared;
  std::vector<PlacedAccess> acc = {
      {{"x", false, true, 4}, 2.0},
      {{"x", false, false, 4}, 3.0},
  };
  double m1 = roofline_eval(p.curves.at("x/read/atomic/4"), 2.0);
  double m2 = roofline_eval(p.curves.at("x/read/bulk/4"), 3.0);
  double expect = (2.0 + 3.0) / (2.0 / m1 + 3.0 / m2);
  CHECK(hybrid_throughput(acc, p).m_h == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("hybrid result is invariant under access permutation") {
  DeviceProfile p = simple_profile();
  std::vector<PlacedAccess> acc = {
      {{"x", false, true, 4}, 2.0},
      {{"x", true, true, 4}, 1.0},
      {{"y", false, true, 4}, 1.5},
      {{"x", false, false, 4}, 0.5},
  };
  double base = hybrid_throughput(acc, p).t_h;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(acc.begin(), acc.end(), rng);
    CHECK(hybrid_throughput(acc, p).t_h == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("hybrid throughput stays between the member-rate extremes") {
  DeviceProfile p = simple_profile();
  std::vector<PlacedAccess> acc = {
      {{"x", false, true, 4}, 2.0},
      {{"x", true, true, 4}, 1.0},
      {{"y", false, true, 4}, 2.0},
  };
  HybridResult h = hybrid_throughput(acc, p);
  double lo = 1e300, hi = 0;
  for (const auto& a : acc) {
    double m = roofline_eval(p.curve(a.cls), a.intensity);
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  // harmonic means and min-combines both land inside [min, max] member rate
  CHECK(h.m_h >= lo - 1e-9);
  CHECK(h.m_h <= hi + 1e-9);
}

TEST_CASE("lock model: per-lock rate divides by thread count") {
  std::map<std::string, double> tl{{"b", 100.0}};
  std::vector<LockLoad> loads;
  for (int i = 0; i < 5; ++i) loads.push_back({"b", "e" + std::to_string(i), 40.0});
  LockModelResult r = lock_model(tl, loads, 10.0, 1e9);
  CHECK(r.throughput == doctest::Approx(5 * 40.0 + 10.0));
  for (const auto& l : r.locks) CHECK_FALSE(l.drop_risk);
}

TEST_CASE("lock model flags saturated elements and drops their volume") {
  std::map<std::string, double> tl{{"b", 50.0}};
  std::vector<LockLoad> loads{{"b", "hot", 80.0}, {"b", "cold", 20.0}};
  LockModelResult r = lock_model(tl, loads, 0.0, 1e9);
  CHECK(r.throughput == doctest::Approx(20.0));
  CHECK(r.locks[0].drop_risk);
  CHECK_FALSE(r.locks[1].drop_risk);
}

TEST_CASE("lock model is capped by the lock-free bound") {
  std::map<std::string, double> tl{{"b", 100.0}};
  std::vector<LockLoad> loads{{"b", "e", 90.0}};
  CHECK(lock_model(tl, loads, 500.0, 200.0).throughput == doctest::Approx(200.0));
}

TEST_CASE("profile JSON round-trips") {
  DeviceProfile p = simple_profile();
  DeviceProfile q = DeviceProfile::from_json_text(p.to_json());
  CHECK(q.to_json() == p.to_json());
  CHECK(q.n_threads == p.n_threads);
  CHECK(q.curves.size() == p.curves.size());
}

TEST_CASE("bundled program yields the expected access-parameter table") {
  ProgramIR ir = parse_program(slurp_file(assets() + "/l4lb.nf"));
  REQUIRE(ir.blocks.size() == 3);
  CHECK(ir.blocks[0].id == "conn_tbl");
  CHECK(ir.blocks[1].id == "dip_cntr");
  CHECK(ir.blocks[2].id == "min_dip+min_load");

  DeviceProfile p = DeviceProfile::load_json(assets() + "/profile_nfp.json");
  std::vector<OffloadedBlock> off = {
      {"conn_tbl", "emem", 1.0, {}},
      {"dip_cntr", "imem", 1.0, {{"dip_cntr", "0", 100.0}}},
      {"min_dip+min_load", "imem", 1.0, {{"min_dip+min_load", "0", 100.0}}},
  };
  ThroughputReport rep = estimate_program(p, ir, off, 100.0);
  REQUIRE(rep.access_table.size() == 5);
  auto row = [&](size_t i) { return rep.access_table[i]; };
  CHECK(row(0).block == "conn_tbl");
  CHECK(row(0).cls.tier == "emem");
  CHECK_FALSE(row(0).cls.is_write);
  CHECK_FALSE(row(0).cls.atomic);
  CHECK(row(0).cls.size_bytes == 4);
  CHECK(row(0).intensity == doctest::Approx(1.0));
  // dip_cntr: one read and one write, atomic 4B, intensity 1 each
  for (size_t i : {size_t{1}, size_t{2}}) {
    CHECK(row(i).block == "dip_cntr");
    CHECK(row(i).cls.tier == "imem");
    CHECK(row(i).cls.atomic);
    CHECK(row(i).intensity == doctest::Approx(1.0));
  }
  CHECK(row(1).cls.is_write != row(2).cls.is_write);
  // merged min pair: read and write at intensity 2
  for (size_t i : {size_t{3}, size_t{4}}) {
    CHECK(row(i).block == "min_dip+min_load");
    CHECK(row(i).cls.tier == "imem");
    CHECK(row(i).cls.atomic);
    CHECK(row(i).intensity == doctest::Approx(2.0));
  }
  CHECK(row(3).cls.is_write != row(4).cls.is_write);
}

TEST_CASE("estimate with nothing offloaded returns the base forward rate") {
  ProgramIR ir = parse_program(slurp_file(assets() + "/l4lb.nf"));
  DeviceProfile p = simple_profile();
  ThroughputReport rep = estimate_program(p, ir, {});
  CHECK(rep.t_program == doctest::Approx(p.base_forward_rate));
}

TEST_CASE("oracle matches the model exactly at zero noise under saturation") {
  ProgramIR ir = parse_program(slurp_file(assets() + "/l4lb.nf"));
  DeviceProfile p = DeviceProfile::load_json(assets() + "/profile_nfp.json");
  double offered = 1e8;  // far beyond the lock-free bound
  std::vector<OffloadedBlock> off = {
      {"conn_tbl", "emem", 1.0, {}},
      {"dip_cntr", "imem", 1.0, {{"dip_cntr", "0", 1e6}}},
      {"min_dip+min_load", "imem", 1.0, {{"min_dip+min_load", "0", 1e6}}},
  };
  ThroughputReport model = estimate_program(p, ir, off, offered);
  OracleConfig cfg;
  cfg.noise_cv = 0.0;
  cfg.duration_s = 10.0;
  cfg.epoch_s = 0.1;
  cfg.queue_bound = 1000;
  OracleResult sim = synth_profile_oracle(p, ir, off, offered, cfg);
  CHECK(sim.throughput == doctest::Approx(model.t_program).epsilon(1e-6));
}

TEST_CASE("oracle tracks the model within tolerance under noise") {
  ProgramIR ir = parse_program(slurp_file(assets() + "/l4lb.nf"));
  DeviceProfile p = DeviceProfile::load_json(assets() + "/profile_nfp.json");
  std::vector<OffloadedBlock> off = {
      {"dip_cntr", "imem", 1.0, {{"dip_cntr", "0", 2e6}}},
  };
  double offered = 5e7;
  ThroughputReport model = estimate_program(p, ir, off, offered);
  OracleConfig cfg;
  cfg.noise_cv = 0.02;
  cfg.duration_s = 10.0;
  cfg.seed = 11;
  OracleResult sim = synth_profile_oracle(p, ir, off, offered, cfg);
  CHECK(std::abs(sim.throughput - model.t_program) / model.t_program < 0.05);
}

TEST_CASE("transparent model refuses locality modeling") {
  std::map<std::string, std::vector<std::pair<double, double>>> s;
  s["locality"] = {{1, 1}, {2, 2}, {3, 3}, {4, 4}};
  CHECK_THROWS_AS(fit_transparent_model(s), ModelError);
  TransparentModel m;
  m.curves["mem"] = {100.0, 1.0, 0.0};
  CHECK_THROWS_AS(transparent_eval(m, {{"locality", 1.0}}), ModelError);
}

TEST_CASE("transparent model collapses everything to one shared pool") {
  std::map<std::string, std::vector<std::pair<double, double>>> s;
  RooflineParams truth{200.0, 1.0, 0.0};
  for (double i = 0.5; i <= 16; i *= 2) s["mem"].push_back({i, roofline_eval(truth, i)});
  TransparentModel m = fit_transparent_model(s);
  double t = transparent_eval(m, {{"mem", 4.0}});
  // one class: T = M(4)/4
  CHECK(t == doctest::Approx(roofline_eval(truth, 4.0) / 4.0).epsilon(1e-3));
}
