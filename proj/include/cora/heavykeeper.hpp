#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cora {

// Count-with-exponential-decay sketch for elephant tracking. A colliding
// smaller count decays with probability decay_base^-count; the guarded cell
// is replaced when its count reaches zero. query() never overestimates.
class HeavyKeeper {
 public:
  HeavyKeeper(uint32_t width, uint32_t depth, double decay_base, uint64_t seed);

  void update(uint64_t fingerprint) { update(fingerprint, 1); }
  // Batch update: skips ahead with geometric sampling instead of looping
  // per packet, identical in distribution to n single updates.
  void update(uint64_t fingerprint, uint64_t count);

  uint64_t query(uint64_t fingerprint) const;
  std::vector<std::pair<uint64_t, uint64_t>> topk(size_t k) const;  // (fp, count), desc
  void clear();

 private:
  struct Cell {
    uint64_t fingerprint = 0;
    uint64_t count = 0;
  };
  uint32_t width_;
  uint32_t depth_;
  double decay_base_;
  std::vector<Cell> cells_;
  std::mt19937_64 rng_;

  size_t index(uint32_t row, uint64_t fp) const;
};

}  // namespace cora
