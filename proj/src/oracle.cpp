#include "cora/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cora {

double synth_curve_sample(const RooflineParams& truth, double intensity,
                          double noise_cv, uint64_t seed) {
  double m = roofline_eval(truth, intensity);
  if (noise_cv <= 0) return m;
  std::mt19937_64 rng(mix64(seed ^ fnv1a64(&intensity, sizeof(intensity))));
  std::normal_distribution<double> noise(0.0, noise_cv);
  return m * (1.0 + noise(rng));
}

OracleResult synth_profile_oracle(const DeviceProfile& profile,
                                  const ProgramIR& ir,
                                  const std::vector<OffloadedBlock>& offloaded,
                                  double offered_pps,
                                  const OracleConfig& cfg) {
  ThroughputReport model = estimate_program(profile, ir, offloaded, offered_pps);
  std::mt19937_64 rng(mix64(cfg.seed));
  std::normal_distribution<double> noise(0.0, cfg.noise_cv);

  // Queue network in series: one stage per offloaded write block (its locks
  // serialize their elements; traffic bypassing the block passes freely),
  // then one shared stage capped by the lock-free program throughput.
  // Packets are integer counts.
  struct LockQueue {
    double rate = 0;
    double share = 0;  // fraction of offered traffic hitting this element
    uint64_t queued = 0;
  };
  struct BlockStage {
    std::vector<LockQueue> locks;
    double locked_share = 0;
  };
  std::vector<BlockStage> stages;
  for (const auto& ob : offloaded) {
    auto it = model.t_lock_per_block.find(ob.block);
    if (it == model.t_lock_per_block.end()) continue;
    BlockStage st;
    for (const auto& ev : ob.element_volumes) {
      LockQueue q;
      q.rate = it->second;
      q.share = offered_pps > 0 ? ev.volume / offered_pps : 0;
      st.locked_share += q.share;
      st.locks.push_back(q);
    }
    if (!st.locks.empty()) stages.push_back(std::move(st));
  }

  OracleResult res;
  uint64_t shared_queue = 0;
  int epochs = std::max(1, static_cast<int>(cfg.duration_s / cfg.epoch_s));
  for (int e = 0; e < epochs; ++e) {
    double jitter = cfg.noise_cv > 0 ? 1.0 + noise(rng) : 1.0;
    double cap_shared = std::max(0.0, model.t_lockfree * jitter) * cfg.epoch_s;
    auto arrivals_total = static_cast<uint64_t>(std::llround(offered_pps * cfg.epoch_s));
    res.offered += arrivals_total;

    // Each stage sees the full packet stream; its output is its bypass
    // traffic plus whatever its locks manage to serve. Serial composition:
    // the slowest stage gates the epoch.
    uint64_t admitted = arrivals_total;
    for (auto& st : stages) {
      uint64_t locked_arrivals = 0, served_locked = 0;
      for (auto& q : st.locks) {
        auto arr = static_cast<uint64_t>(std::llround(arrivals_total * q.share));
        locked_arrivals += arr;
        uint64_t backlog = q.queued + arr;
        auto cap = static_cast<uint64_t>(std::max(0.0, q.rate * jitter) * cfg.epoch_s);
        uint64_t served = std::min(backlog, cap);
        uint64_t rest = backlog - served;
        uint64_t kept = std::min(rest, cfg.queue_bound);
        res.dropped += rest - kept;
        q.queued = kept;
        res.max_queue = std::max(res.max_queue, kept);
        served_locked += served;
      }
      uint64_t bypass =
          arrivals_total > locked_arrivals ? arrivals_total - locked_arrivals : 0;
      admitted = std::min(admitted, served_locked + bypass);
    }

    // Shared stage bounded by the lock-free program throughput.
    uint64_t backlog = shared_queue + admitted;
    uint64_t served = std::min(backlog, static_cast<uint64_t>(cap_shared));
    uint64_t rest = backlog - served;
    uint64_t kept = std::min(rest, cfg.queue_bound);
    res.dropped += rest - kept;
    shared_queue = kept;
    res.max_queue = std::max(res.max_queue, kept);
    res.processed += served;
  }
  res.throughput = res.processed / (epochs * cfg.epoch_s);
  return res;
}

TransparentModel fit_transparent_model(
    const std::map<std::string, std::vector<std::pair<double, double>>>& samples) {
  if (samples.empty()) throw ModelError("transparent model: no tier samples");
  TransparentModel model;
  double err_acc = 0;
  for (const auto& [cls, s] : samples) {
    if (cls == "locality")
      throw ModelError("transparent model: locality modeling is unsupported");
    FitResult fit = fit_roofline(s);
    model.curves[cls] = fit.params;
    err_acc += fit.mean_rel_error;
  }
  model.mean_rel_error = err_acc / samples.size();
  return model;
}

double transparent_eval(const TransparentModel& model,
                        const std::map<std::string, double>& intensity_per_class) {
  double total_i = 0, inv = 0;
  for (const auto& [cls, intensity] : intensity_per_class) {
    if (cls == "locality")
      throw ModelError("transparent model: locality parameter is unsupported");
    if (intensity <= 0) continue;
    auto it = model.curves.find(cls);
    if (it == model.curves.end())
      throw ModelError("transparent model: no curve for class " + cls);
    double m = roofline_eval(it->second, intensity);
    total_i += intensity;
    inv += intensity / m;
  }
  if (total_i <= 0) return 0;
  // All accesses share the same hardware path: one harmonic mean.
  double m_h = total_i / inv;
  return m_h / total_i;
}

}  // namespace cora
