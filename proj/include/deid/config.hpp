#pragma once

#include <map>
#include <string>

namespace deid {

// Line-oriented "key = value" configuration files; '#' starts a comment.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap read_config_file(const std::string& path);

std::string config_string(const ConfigMap& cfg, const std::string& key,
                          const std::string& fallback);
double config_double(const ConfigMap& cfg, const std::string& key, double fallback);
int config_int(const ConfigMap& cfg, const std::string& key, int fallback);
uint64_t config_uint64(const ConfigMap& cfg, const std::string& key, uint64_t fallback);
bool config_bool(const ConfigMap& cfg, const std::string& key, bool fallback);

}  // namespace deid
