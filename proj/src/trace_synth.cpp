#include "cora/trace_synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace cora {

TraceSynthSpec TraceSynthSpec::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open trace spec: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  TraceSynthSpec s;
  s.flow_count = j.at("flows").get<uint64_t>();
  for (const auto& jb : j.at("branches")) {
    BranchSpec b;
    b.name = jb.at("name").get<std::string>();
    b.ratio = jb.at("ratio").get<double>();
    if (jb.contains("fields"))
      for (const auto& [k, v] : jb["fields"].items()) b.fields[k] = v.get<uint64_t>();
    b.max_flow_volume = jb.value("max_flow_volume", uint64_t{0});
    s.branches.push_back(b);
  }
  s.distribution = j.value("distribution", "pareto");
  s.pareto_shape = j.value("pareto_shape", 1.5);
  s.mean_volume = j.value("mean_volume", 100.0);
  if (j.contains("modes")) s.modes = j["modes"].get<std::vector<double>>();
  if (j.contains("mode_weights"))
    s.mode_weights = j["mode_weights"].get<std::vector<double>>();
  s.empirical_cdf_file = j.value("empirical_cdf_file", "");
  s.packet_size_bytes = j.value("packet_size_bytes", 256u);
  s.total_volume = j.value("total_volume", uint64_t{0});
  return s;
}

namespace {

std::vector<std::pair<double, double>> load_cdf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open empirical CDF file: " + path);
  std::vector<std::pair<double, double>> cdf;  // (volume, cum_prob)
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    double v, p;
    char comma;
    if (!(ss >> v >> comma >> p)) throw ModelError("bad CDF row: " + line);
    cdf.push_back({v, p});
  }
  if (cdf.size() < 2) throw ModelError("empirical CDF needs at least 2 rows");
  std::sort(cdf.begin(), cdf.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  return cdf;
}

double sample_empirical(const std::vector<std::pair<double, double>>& cdf, double u) {
  auto it = std::lower_bound(cdf.begin(), cdf.end(), u,
                             [](const auto& row, double x) { return row.second < x; });
  if (it == cdf.begin()) return cdf.front().first;
  if (it == cdf.end()) return cdf.back().first;
  auto prev = std::prev(it);
  double span = it->second - prev->second;
  double t = span > 0 ? (u - prev->second) / span : 0.0;
  return prev->first + t * (it->first - prev->first);
}

}  // namespace

TrafficTrace synthesize_trace(const TraceSynthSpec& spec, uint64_t seed) {
  if (spec.branches.empty()) throw ModelError("trace spec has no branches");
  double ratio_sum = 0;
  for (const auto& b : spec.branches) ratio_sum += b.ratio;
  if (std::abs(ratio_sum - 1.0) > 1e-6)
    throw ModelError("branch ratios must sum to 1");

  std::mt19937_64 rng(mix64(seed));
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  auto sample_volume = [&]() -> double {
    if (spec.distribution == "pareto") {
      // scale fixed at 1, volume = (1-u)^(-1/shape)
      double u = uni(rng);
      double v = std::pow(1.0 - u, -1.0 / spec.pareto_shape);
      // rescale to the requested mean when the mean exists
      if (spec.pareto_shape > 1.0) {
        double natural_mean = spec.pareto_shape / (spec.pareto_shape - 1.0);
        v *= spec.mean_volume / natural_mean;
      } else {
        v *= spec.mean_volume;
      }
      return v;
    }
    if (spec.distribution == "exponential") {
      std::exponential_distribution<double> d(1.0 / spec.mean_volume);
      return d(rng);
    }
    if (spec.distribution == "lognormal") {
      double sigma = 1.0;
      double mu = std::log(spec.mean_volume) - sigma * sigma / 2;
      std::lognormal_distribution<double> d(mu, sigma);
      return d(rng);
    }
    if (spec.distribution == "bimodal" || spec.distribution == "trimodal") {
      size_t n = spec.distribution == "bimodal" ? 2 : 3;
      std::vector<double> modes = spec.modes;
      if (modes.empty()) {
        modes.resize(n);
        for (size_t i = 0; i < n; ++i)
          modes[i] = spec.mean_volume * std::pow(10.0, double(i) - double(n - 1) / 2);
      }
      std::vector<double> w = spec.mode_weights;
      if (w.size() != modes.size()) w.assign(modes.size(), 1.0 / modes.size());
      double u = uni(rng), acc = 0;
      size_t pick = 0;
      for (size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (u <= acc) {
          pick = i;
          break;
        }
      }
      std::lognormal_distribution<double> d(std::log(modes[pick]), 0.25);
      return d(rng);
    }
    throw ModelError("unknown distribution: " + spec.distribution);
  };
  std::vector<std::pair<double, double>> cdf;
  if (spec.distribution == "empirical") cdf = load_cdf(spec.empirical_cdf_file);
  auto draw = [&]() {
    return cdf.empty() ? sample_volume() : sample_empirical(cdf, uni(rng));
  };

  // Deal flows round-robin over branches so every branch gets the same
  // rank-volume shape, then rescale branch totals to the requested ratios.
  TrafficTrace trace;
  trace.packet_size_bytes = spec.packet_size_bytes;
  std::vector<std::vector<size_t>> branch_flows(spec.branches.size());
  for (uint64_t i = 0; i < spec.flow_count; ++i) {
    size_t b = i % spec.branches.size();
    Flow f;
    f.id = spec.branches[b].name + "_" + std::to_string(i);
    f.fields = spec.branches[b].fields;
    f.fields["flow_id"] = i;
    // Per-flow identifiers for any field the branch does not pin.
    f.fields.try_emplace("src_ip", mix64(seed ^ (i * 2654435761ull)) & 0xffffffffull);
    f.fields.try_emplace("dst_ip",
                         mix64(seed ^ (i * 40503ull) ^ 0x5bd1e995ull) & 0xffffffffull);
    f.fields.try_emplace("src_port", 1024 + i % 60000);
    f.fields.try_emplace("dst_port", 80);
    f.fields.try_emplace("proto", 6);
    f.fields.try_emplace("key_hash", mix64(seed ^ (i * 0x9e3779b97f4a7c15ull)));
    double v = draw();
    f.volume_pps = std::max<uint64_t>(1, uint64_t(std::llround(v)));
    branch_flows[b].push_back(trace.flows.size());
    trace.flows.push_back(std::move(f));
  }

  double grand_total = 0;
  for (const auto& f : trace.flows) grand_total += double(f.volume_pps);
  if (spec.total_volume > 0) grand_total = double(spec.total_volume);

  for (size_t b = 0; b < spec.branches.size(); ++b) {
    double want = grand_total * spec.branches[b].ratio;
    double have = 0;
    for (size_t i : branch_flows[b]) have += double(trace.flows[i].volume_pps);
    if (have <= 0) continue;
    double k = want / have;
    for (size_t i : branch_flows[b]) {
      auto v = std::max<uint64_t>(1, uint64_t(std::llround(trace.flows[i].volume_pps * k)));
      if (spec.branches[b].max_flow_volume > 0)
        v = std::min(v, spec.branches[b].max_flow_volume);
      trace.flows[i].volume_pps = v;
    }
  }
  return trace;
}

}  // namespace cora
