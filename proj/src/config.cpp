#include "deid/config.hpp"

#include <cstdlib>
#include <fstream>

#include "deid/numerics.hpp"

namespace deid {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  ConfigMap cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw Error(path + ":" + std::to_string(lineno) + ": empty key");
    cfg[key] = value;
  }
  return cfg;
}

std::string config_string(const ConfigMap& cfg, const std::string& key,
                          const std::string& fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

double config_double(const ConfigMap& cfg, const std::string& key, double fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  char* end = nullptr;
  double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0')
    throw Error("config: bad number for " + key + ": " + it->second);
  return v;
}

int config_int(const ConfigMap& cfg, const std::string& key, int fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    size_t used = 0;
    int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error("config: bad integer for " + key + ": " + it->second);
  }
}

uint64_t config_uint64(const ConfigMap& cfg, const std::string& key, uint64_t fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw Error("config: bad integer for " + key + ": " + it->second);
  }
}

bool config_bool(const ConfigMap& cfg, const std::string& key, bool fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  if (it->second == "1" || it->second == "true") return true;
  if (it->second == "0" || it->second == "false") return false;
  throw Error("config: bad boolean for " + key + ": " + it->second);
}

}  // namespace deid
