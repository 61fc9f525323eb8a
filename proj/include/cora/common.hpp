#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cora {

struct ParseError : std::runtime_error {
  int line = 0;
  int column = 0;
  ParseError(const std::string& msg, int line_, int column_)
      : std::runtime_error("line " + std::to_string(line_) + ":" +
                           std::to_string(column_) + ": " + msg),
        line(line_),
        column(column_) {}
};

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PlanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Stable 64-bit hash, used wherever a deterministic mapping is needed.
// std::hash is implementation-defined and must not leak into any output.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t seed = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), seed);
}

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace cora
