#include "cora/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cora/common.hpp"
#include "json.hpp"

namespace cora {

std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                (unsigned long long)fnv1a64(ss.str()));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void RunManifest::write(const std::string& path) const {
  nlohmann::json j;
  j["command"] = command;
  j["inputs"] = input_digests;
  j["seed"] = seed;
  j["tool_version"] = tool_version;
  j["outputs"] = outputs;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

}  // namespace cora
