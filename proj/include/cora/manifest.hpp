#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cora {

inline constexpr const char* kToolVersion = "0.1.0";

// Every CLI output is accompanied by a manifest; equal manifests imply
// byte-identical outputs.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> input_digests;  // path -> fnv64 hex
  uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::vector<std::string> outputs;

  void write(const std::string& path) const;
};

std::string file_digest_hex(const std::string& path);
std::string format_double(double v);  // locale-free, stable formatting

}  // namespace cora
