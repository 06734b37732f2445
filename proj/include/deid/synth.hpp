#pragma once

#include <map>
#include <string>
#include <vector>

#include "deid/corpus.hpp"

namespace deid {

// Deterministic generator of clinical-note-like sequences with gold PHI
// labels across the seven PHI categories. Stands in for the
// access-restricted corpora at desk scale.
struct GenConfig {
  int notes = 100;
  int min_tokens = 25;
  int max_tokens = 60;
  // Per-category probability that a given emission slot starts a PHI
  // instance (instances may span several tokens). Sum must stay <= 0.5.
  std::map<std::string, double> density = default_densities();
  std::string first_names_path;
  std::string surnames_path;
  std::string cities_path;
  std::string states_path;
  std::string professions_path;
  // Disjoint name pools across generated splits: first_half and second_half
  // partition the name lexicons.
  enum class NamePool { all, first_half, second_half };
  NamePool name_pool = NamePool::all;
  uint64_t seed = 1;
  std::string note_prefix = "note";

  static std::map<std::string, double> default_densities();
  void validate() const;
};

Dataset generate(const GenConfig& config, const LabelSet& label_set);

struct CorpusStats {
  long long notes = 0;
  long long tokens = 0;
  long long phi_instances = 0;  // maximal runs of one non-O label
  long long phi_tokens = 0;
  long long vocabulary = 0;  // distinct lowercased token texts
};

CorpusStats corpus_stats(const Dataset& ds);
std::string stats_kv(const CorpusStats& stats);

std::vector<std::string> load_lexicon(const std::string& path);

}  // namespace deid
