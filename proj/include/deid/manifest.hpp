#pragma once

#include <map>
#include <string>
#include <vector>

namespace deid {

// FNV-1a 64-bit digest of a file's bytes, as lowercase hex.
std::string fnv1a64_file(const std::string& path);

// Every CLI run writes one manifest next to its outputs: the subcommand, the
// resolved configuration, input/output paths, the seed, and per-output
// checksums.
void write_manifest(const std::string& manifest_path, const std::string& subcommand,
                    uint64_t seed,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    const std::vector<std::pair<std::string, std::string>>& outputs,
                    const std::map<std::string, std::string>& config);

}  // namespace deid
