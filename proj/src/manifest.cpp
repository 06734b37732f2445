#include "deid/manifest.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "deid/numerics.hpp"

namespace deid {

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file for checksum: " + path);
  uint64_t hash = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ull;
    }
    if (got < static_cast<std::streamsize>(sizeof buf)) break;
  }
  char hex[17];
  snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  return hex;
}

void write_manifest(const std::string& manifest_path, const std::string& subcommand,
                    uint64_t seed,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    const std::vector<std::pair<std::string, std::string>>& outputs,
                    const std::map<std::string, std::string>& config) {
  nlohmann::json j;
  j["subcommand"] = subcommand;
  j["seed"] = seed;
  j["inputs"] = nlohmann::json::object();
  for (const auto& [name, path] : inputs) j["inputs"][name] = path;
  j["outputs"] = nlohmann::json::object();
  for (const auto& [name, path] : outputs)
    j["outputs"][name] = {{"path", path}, {"fnv1a64", fnv1a64_file(path)}};
  j["config"] = config;

  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw Error("cannot write manifest " + manifest_path);
  out << j.dump(2) << '\n';
}

}  // namespace deid
