#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "deid/chain_crf.hpp"
#include "deid/corpus.hpp"

namespace deid {

// Declared feature inventory: which template kinds are enabled and at which
// window offsets (all within [-4, +4]). Out-of-bounds window slots emit
// boundary features instead.
struct FeatureTemplates {
  std::vector<int> token_offsets{-2, -1, 0, 1, 2};
  std::vector<int> shape_offsets{-2, -1, 0, 1, 2};
  std::vector<int> ngram_offsets{0};   // lowercased char 2-/3-grams
  std::vector<int> affix_offsets{0};   // prefixes/suffixes, lengths 1-4
  std::vector<int> gazetteer_offsets{0};
  std::vector<int> regex_offsets{-1, 0, 1};

  void validate() const;
};

// Template configuration file: "kind<TAB>comma-separated-offsets" lines,
// kinds token/shape/ngram/affix/gazetteer/regex. Missing kinds are disabled.
FeatureTemplates load_templates(const std::string& path);

struct Gazetteers {
  std::vector<std::string> names;
  std::vector<std::set<std::string>> entries;  // lowercased single tokens

  bool member(size_t gaz, const std::string& lowercased) const {
    return entries[gaz].count(lowercased) != 0;
  }
};

// Each file holds one entry per line; multi-token lines contribute each of
// their tokens. Matching is case-insensitive on full tokens.
Gazetteers load_gazetteers(const std::vector<std::pair<std::string, std::string>>& name_path);

// The four declared token classes: year-like (4 digits starting 1/2),
// zip-like (5 digits), phone-like (3-4 digits), id-like (6+ digits).
std::vector<std::string> regex_classes(const std::string& token_text);
std::string token_shape(const std::string& token_text);

// Sorted, deduplicated feature ids for position i.
std::vector<std::string> extract_features(const std::vector<Token>& tokens, int i,
                                          const FeatureTemplates& templates,
                                          const Gazetteers& gazetteers);

struct SparseWeights {
  std::unordered_map<std::string, Vec64> w;  // feature -> per-label weights
  Mat64 transitions;

  // Emission scores: sum of the fired features' weight vectors.
  Vec64 emissions(const std::vector<std::string>& features, int num_labels) const;
};

struct BaselineConfig {
  double lr = 0.1;
  double l2 = 1e-4;
  int max_epochs = 50;
  int patience = 10;
  uint64_t seed = 42;

  void validate() const;
};

struct BaselineModel {
  BaselineConfig config;
  LabelSet labels;
  FeatureTemplates templates;
  Gazetteers gazetteers;
  SparseWeights weights;
  double best_dev_f1 = 0.0;
  int best_epoch = 0;
};

// L2-regularized conditional log-likelihood by SGD over sequences, sharing
// the chain machinery (marginals for the gradient, Viterbi for decoding).
// Regularization decays the weights of the features active in each update.
// Keeps the best dev binary-HIPAA F1 epoch. Log lines match the ANN trainer.
BaselineModel train_baseline(const Dataset& train, const Dataset& dev,
                             const FeatureTemplates& templates,
                             const Gazetteers& gazetteers,
                             const BaselineConfig& config, std::ostream* log);

std::vector<int> predict_baseline(const LabeledSequence& seq,
                                  const SparseWeights& weights,
                                  const FeatureTemplates& templates,
                                  const Gazetteers& gazetteers, int num_labels);
std::vector<int> predict_baseline(const LabeledSequence& seq, const BaselineModel& model);
std::vector<std::vector<int>> predict_baseline_dataset(const Dataset& ds,
                                                       const BaselineModel& model);

// "DEID-CRF v1": text header, then per-feature weights (lexicographic
// feature order) and the transition matrix as raw little-endian float64.
void save_baseline(const BaselineModel& model, const std::string& path);
BaselineModel load_baseline(const std::string& path);

}  // namespace deid
