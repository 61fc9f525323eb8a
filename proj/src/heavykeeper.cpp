#include "cora/heavykeeper.hpp"

#include <algorithm>
#include <cmath>

#include "cora/common.hpp"

namespace cora {

HeavyKeeper::HeavyKeeper(uint32_t width, uint32_t depth, double decay_base, uint64_t seed)
    : width_(width), depth_(depth), decay_base_(decay_base),
      cells_(size_t(width) * depth), rng_(mix64(seed)) {
  if (width == 0 || depth == 0) throw ModelError("heavykeeper: width/depth must be > 0");
  if (decay_base <= 1.0) throw ModelError("heavykeeper: decay base must exceed 1");
}

size_t HeavyKeeper::index(uint32_t row, uint64_t fp) const {
  uint64_t h = mix64(fp ^ (uint64_t(row) * 0x9e3779b97f4a7c15ull));
  return size_t(row) * width_ + h % width_;
}

void HeavyKeeper::update(uint64_t fingerprint, uint64_t count) {
  for (uint32_t row = 0; row < depth_; ++row) {
    Cell& c = cells_[index(row, fingerprint)];
    uint64_t n = count;
    while (n > 0) {
      if (c.count == 0) {
        c.fingerprint = fingerprint;
        c.count = n;
        break;
      }
      if (c.fingerprint == fingerprint) {
        c.count += n;
        break;
      }
      // Exponential decay of the guarded count. Each arriving packet
      // decrements with probability decay_base^-count; geometric skip-ahead
      // gives the same distribution without a per-packet loop.
      double p = std::pow(decay_base_, -double(c.count));
      if (p < 1e-12) break;  // guarded count effectively immovable
      std::geometric_distribution<uint64_t> skip(p);
      uint64_t tries = skip(rng_) + 1;  // packets consumed for one decrement
      if (tries > n) break;
      n -= tries;
      c.count -= 1;
    }
  }
}

uint64_t HeavyKeeper::query(uint64_t fingerprint) const {
  uint64_t best = 0;
  for (uint32_t row = 0; row < depth_; ++row) {
    const Cell& c = cells_[index(row, fingerprint)];
    if (c.fingerprint == fingerprint) best = std::max(best, c.count);
  }
  return best;
}

std::vector<std::pair<uint64_t, uint64_t>> HeavyKeeper::topk(size_t k) const {
  std::vector<std::pair<uint64_t, uint64_t>> entries;  // (fp, count)
  for (const auto& c : cells_)
    if (c.count > 0) entries.push_back({c.fingerprint, c.count});
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  // The same flow may guard several rows; keep its largest estimate.
  std::vector<std::pair<uint64_t, uint64_t>> out;
  for (const auto& e : entries) {
    bool seen = false;
    for (const auto& o : out) seen |= o.first == e.first;
    if (!seen) out.push_back(e);
    if (out.size() == k) break;
  }
  return out;
}

void HeavyKeeper::clear() {
  std::fill(cells_.begin(), cells_.end(), Cell{});
}

}  // namespace cora
