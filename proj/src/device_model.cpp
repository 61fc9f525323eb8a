#include "cora/device_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cora {

double roofline_eval(const RooflineParams& p, double intensity) {
  if (intensity <= 0) return 0.0;
  return p.t_max * intensity / (p.a + std::exp(-p.b / intensity) * intensity);
}

namespace {

double rel_sq_error(const RooflineParams& p,
                    const std::vector<std::pair<double, double>>& samples) {
  double acc = 0;
  for (const auto& [i, m] : samples) {
    double pred = roofline_eval(p, i);
    double e = (pred - m) / m;
    acc += e * e;
  }
  return acc / samples.size();
}

// Nelder-Mead over x = (log t_max, log a, b), b clamped at 0.
RooflineParams from_x(const std::array<double, 3>& x) {
  return {std::exp(x[0]), std::exp(x[1]), std::max(0.0, x[2])};
}

std::array<double, 3> nelder_mead(
    std::array<double, 3> x0,
    const std::vector<std::pair<double, double>>& samples, int iters) {
  constexpr int n = 3;
  std::array<std::array<double, 3>, n + 1> simplex;
  std::array<double, n + 1> fv;
  auto eval = [&](const std::array<double, 3>& x) { return rel_sq_error(from_x(x), samples); };
  simplex[0] = x0;
  for (int i = 0; i < n; ++i) {
    simplex[i + 1] = x0;
    simplex[i + 1][i] += (i == 2) ? 1.0 : 0.25;
  }
  for (int i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

  for (int it = 0; it < iters; ++it) {
    std::array<int, n + 1> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    std::array<std::array<double, 3>, n + 1> s2;
    std::array<double, n + 1> f2;
    for (int i = 0; i <= n; ++i) {
      s2[i] = simplex[order[i]];
      f2[i] = fv[order[i]];
    }
    simplex = s2;
    fv = f2;
    if (fv[n] - fv[0] < 1e-16) break;

    std::array<double, 3> centroid{};
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < 3; ++d) centroid[d] += simplex[i][d] / n;

    auto blend = [&](double t) {
      std::array<double, 3> x;
      for (int d = 0; d < 3; ++d) x[d] = centroid[d] + t * (simplex[n][d] - centroid[d]);
      return x;
    };
    auto xr = blend(-1.0);
    double fr = eval(xr);
    if (fr < fv[0]) {
      auto xe = blend(-2.0);
      double fe = eval(xe);
      if (fe < fr) {
        simplex[n] = xe;
        fv[n] = fe;
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
    } else {
      auto xc = blend(0.5);
      double fc = eval(xc);
      if (fc < fv[n]) {
        simplex[n] = xc;
        fv[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          for (int d = 0; d < 3; ++d)
            simplex[i][d] = simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]);
          fv[i] = eval(simplex[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  return simplex[best];
}

}  // namespace

FitResult fit_roofline(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 4) throw ModelError("fit underdetermined: need at least 4 samples");
  double i_min = samples.front().first, i_max = i_min;
  for (const auto& [i, m] : samples) {
    if (m <= 0 || i <= 0) throw ModelError("fit samples must be positive");
    i_min = std::min(i_min, i);
    i_max = std::max(i_max, i);
  }
  if (i_max / i_min < 1.0 + 1e-9)
    throw ModelError("fit underdetermined: samples share one intensity");

  double m_max = 0, m_at_imin = 0;
  for (const auto& [i, m] : samples) {
    m_max = std::max(m_max, m);
    if (i == i_min) m_at_imin = m;
  }
  double t0 = m_max * 1.05;
  // Low-intensity regime: M ~ t_max * i / (a + i), so a ~ t_max*i/M - i.
  double a0 = std::max(1e-3, t0 * i_min / m_at_imin - i_min);

  FitResult best;
  best.mean_rel_error = std::numeric_limits<double>::infinity();
  for (double b0 : {0.0, 1.0, 10.0}) {
    std::array<double, 3> x0{std::log(t0), std::log(a0), b0};
    auto x = nelder_mead(x0, samples, 400);
    x = nelder_mead(x, samples, 400);  // restart around the found point
    RooflineParams p = from_x(x);
    double err = 0;
    for (const auto& [i, m] : samples) err += std::abs(roofline_eval(p, i) - m) / m;
    err /= samples.size();
    if (err < best.mean_rel_error) {
      best.params = p;
      best.mean_rel_error = err;
    }
  }
  return best;
}

std::string AccessClass::key() const {
  return tier + "/" + (is_write ? "write" : "read") + "/" + (atomic ? "atomic" : "bulk") +
         "/" + std::to_string(size_bytes);
}

const RooflineParams& DeviceProfile::curve(const AccessClass& ac) const {
  auto it = curves.find(ac.key());
  if (it == curves.end())
    throw ModelError("profile '" + name + "' has no curve for access class " + ac.key());
  return it->second;
}

namespace {

CombineRule rule_from_string(const std::string& s) {
  if (s == "slower_op" || s == "min") return CombineRule::SlowerOp;
  if (s == "shared" || s == "shared_bandwidth" || s == "harmonic") return CombineRule::Shared;
  throw ModelError("unknown bottleneck rule: " + s);
}

std::string rule_to_string(CombineRule r) {
  return r == CombineRule::SlowerOp ? "slower_op" : "shared";
}

}  // namespace

DeviceProfile DeviceProfile::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  DeviceProfile p;
  p.name = j.value("name", "device");
  for (const auto& [key, val] : j.at("curves").items()) {
    RooflineParams rp;
    rp.t_max = val.at("t_max").get<double>();
    rp.a = val.at("a").get<double>();
    rp.b = val.value("b", 0.0);
    if (rp.t_max <= 0 || rp.a <= 0 || rp.b < 0)
      throw ModelError("invalid roofline parameters for curve " + key);
    p.curves[key] = rp;
  }
  if (j.contains("bottleneck_rule")) {
    const auto& br = j["bottleneck_rule"];
    if (br.contains("cross_mode"))
      for (const auto& [tier, rule] : br["cross_mode"].items())
        p.cross_mode[tier] = rule_from_string(rule.get<std::string>());
    if (br.contains("cross_tier"))
      p.cross_tier = rule_from_string(br["cross_tier"].get<std::string>());
  }
  if (j.contains("capacities"))
    for (const auto& [tier, cap] : j["capacities"].items())
      p.tier_capacity_bytes[tier] = cap.get<uint64_t>();
  if (j.contains("tier_order"))
    p.tier_order = j["tier_order"].get<std::vector<std::string>>();
  else
    for (const auto& [tier, _] : p.tier_capacity_bytes) p.tier_order.push_back(tier);
  p.n_threads = j.value("n_threads", 1u);
  p.base_forward_rate = j.value("base_forward_rate", 0.0);
  p.pcie_budget = j.value("pcie_budget", 0.0);
  if (j.contains("table_accel")) {
    TableAccel ta;
    ta.capacity_entries = j["table_accel"].value("capacity_entries", uint64_t{0});
    ta.lookup_rate = j["table_accel"].value("lookup_rate", 0.0);
    p.table_accel = ta;
  }
  for (const auto& tier : p.tier_order)
    if (!p.tier_capacity_bytes.count(tier))
      throw ModelError("tier '" + tier + "' in tier_order has no capacity");
  return p;
}

DeviceProfile DeviceProfile::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open profile file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string DeviceProfile::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  for (const auto& [key, rp] : curves)
    j["curves"][key] = {{"t_max", rp.t_max}, {"a", rp.a}, {"b", rp.b}};
  for (const auto& [tier, rule] : cross_mode)
    j["bottleneck_rule"]["cross_mode"][tier] = rule_to_string(rule);
  j["bottleneck_rule"]["cross_tier"] = rule_to_string(cross_tier);
  j["capacities"] = tier_capacity_bytes;
  j["tier_order"] = tier_order;
  j["n_threads"] = n_threads;
  j["base_forward_rate"] = base_forward_rate;
  j["pcie_budget"] = pcie_budget;
  if (table_accel)
    j["table_accel"] = {{"capacity_entries", table_accel->capacity_entries},
                        {"lookup_rate", table_accel->lookup_rate}};
  return j.dump(2);
}

HybridResult hybrid_throughput(const std::vector<PlacedAccess>& accesses,
                               const DeviceProfile& profile) {
  if (accesses.empty()) throw ModelError("hybrid_throughput: empty access list");

  // Step 1: same (tier, mode) accesses share a memory engine; weighted
  // harmonic mean within the group.
  struct Group {
    double intensity = 0;
    double inv_sum = 0;  // sum of i_k / M_k
  };
  std::map<std::pair<std::string, bool>, Group> groups;
  double total_intensity = 0;
  for (const auto& a : accesses) {
    if (a.intensity <= 0) continue;
    double m = roofline_eval(profile.curve(a.cls), a.intensity);
    if (m <= 0) throw ModelError("zero curve throughput for " + a.cls.key());
    auto& g = groups[{a.cls.tier, a.cls.atomic}];
    g.intensity += a.intensity;
    g.inv_sum += a.intensity / m;
    total_intensity += a.intensity;
  }
  if (groups.empty() || total_intensity <= 0)
    return {0.0, 0.0, 0.0};

  // Step 2/3: combine the mode groups of each tier under that tier's rule.
  std::map<std::string, std::pair<double, double>> per_tier;  // tier -> (M, I)
  for (const auto& [key, g] : groups) {
    const auto& tier = key.first;
    double m_group = g.intensity / g.inv_sum;
    auto it = per_tier.find(tier);
    if (it == per_tier.end()) {
      per_tier[tier] = {m_group, g.intensity};
      continue;
    }
    CombineRule rule = CombineRule::SlowerOp;
    auto rit = profile.cross_mode.find(tier);
    if (rit != profile.cross_mode.end()) rule = rit->second;
    auto& [m, i] = it->second;
    if (rule == CombineRule::SlowerOp) {
      m = std::min(m, m_group);
    } else {
      m = (i + g.intensity) / (i / m + g.intensity / m_group);
    }
    i += g.intensity;
  }

  // Step 4: combine tiers.
  double m_h = 0, i_acc = 0;
  bool first = true;
  for (const auto& [tier, mi] : per_tier) {
    if (first) {
      m_h = mi.first;
      i_acc = mi.second;
      first = false;
      continue;
    }
    if (profile.cross_tier == CombineRule::SlowerOp)
      m_h = std::min(m_h, mi.first);
    else
      m_h = (i_acc + mi.second) / (i_acc / m_h + mi.second / mi.first);
    i_acc += mi.second;
  }

  HybridResult r;
  r.m_h = m_h;
  r.total_intensity = total_intensity;
  r.t_h = m_h / total_intensity;
  return r;
}

LockModelResult lock_model(const std::map<std::string, double>& t_lock_per_block,
                           const std::vector<LockLoad>& loads,
                           double unlocked_volume,
                           double lockfree_t) {
  LockModelResult r;
  double sum = unlocked_volume;
  for (const auto& l : loads) {
    LockReport rep;
    rep.block = l.block;
    rep.element = l.element;
    rep.t_lock = t_lock_per_block.at(l.block);
    rep.volume = l.volume;
    if (l.volume >= rep.t_lock) {
      rep.drop_risk = true;
    } else {
      sum += l.volume;
    }
    r.locks.push_back(rep);
  }
  r.throughput = std::min(sum, lockfree_t);
  return r;
}

ThroughputReport estimate_program(const DeviceProfile& profile,
                                  const ProgramIR& ir,
                                  const std::vector<OffloadedBlock>& offloaded,
                                  double nic_offered_pps) {
  ThroughputReport report;
  if (offloaded.empty()) {
    report.t_lockfree = profile.base_forward_rate;
    report.t_program = profile.base_forward_rate;
    return report;
  }

  std::vector<PlacedAccess> all;
  for (const auto& ob : offloaded) {
    const StateBlock& block = ir.block(ob.block);
    for (const auto& a : block.accesses) {
      PlacedAccess pa;
      pa.cls = {ob.tier, a.is_write, a.atomic, a.size_bytes};
      pa.intensity = a.intensity * ob.traffic_fraction;
      if (pa.intensity > 0) all.push_back(pa);
      AccessTableRow row;
      row.block = ob.block;
      row.cls = pa.cls;
      row.intensity = a.intensity;
      report.access_table.push_back(row);
    }
  }

  double t_lockfree = profile.base_forward_rate;
  if (!all.empty()) {
    HybridResult h = hybrid_throughput(all, profile);
    if (h.t_h > 0) t_lockfree = std::min(t_lockfree, h.t_h);
  }
  report.t_lockfree = t_lockfree;

  // The lock model applies per write block: a block's locks partition the
  // traffic traversing it, and traffic that bypasses the block is unlocked.
  // Across blocks every packet is serialized through each one it touches, so
  // the program rate is the minimum over blocks.
  double nic_total = nic_offered_pps;
  if (nic_total <= 0) {
    for (const auto& ob : offloaded) {
      double offered = 0;
      for (const auto& ev : ob.element_volumes) offered += ev.volume;
      nic_total = std::max(nic_total, offered);
    }
  }

  report.t_program = t_lockfree;
  for (const auto& ob : offloaded) {
    const StateBlock& block = ir.block(ob.block);
    if (!block.has_write || ob.element_volumes.empty()) continue;
    // Single-thread lock-free throughput of the block alone on its tier.
    std::vector<PlacedAccess> own;
    for (const auto& a : block.accesses)
      own.push_back({{ob.tier, a.is_write, a.atomic, a.size_bytes}, a.intensity});
    double t_lockfree_i = hybrid_throughput(own, profile).t_h;
    report.t_lock_per_block[ob.block] = t_lockfree_i / profile.n_threads;

    double offered = 0;
    for (const auto& ev : ob.element_volumes) offered += ev.volume;
    double unlocked = std::max(0.0, nic_total - offered);
    LockModelResult lm = lock_model(report.t_lock_per_block, ob.element_volumes,
                                    unlocked, t_lockfree);
    for (const auto& l : lm.locks) {
      report.locks.push_back(l);
      report.any_drop_risk |= l.drop_risk;
    }
    report.t_program = std::min(report.t_program, lm.throughput);
  }
  return report;
}

}  // namespace cora
