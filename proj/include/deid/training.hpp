#pragma once

#include <iosfwd>
#include <string>

#include "deid/corpus.hpp"
#include "deid/sequence_model.hpp"

namespace deid {

struct TrainConfig {
  double lr = 0.005;
  double clip = 5.0;  // global gradient-norm threshold
  double dropout = 0.5;
  int max_epochs = 100;
  int patience = 10;  // epochs without dev F1 gain before stopping
  uint64_t seed = 42;
  double train_fraction = 1.0;  // seeded subsample of the training sequences
  ModelConfig model;

  void validate() const;
};

struct Checkpoint {
  TrainConfig config;
  ModelParameters params;
  double best_dev_f1 = 0.0;
  int best_epoch = 0;
};

struct PretrainedEmbeddings {
  TokenVocab vocab;
  Mat64 table;
};

// Global L2 norm over every gradient array (sparse embedding rows included).
double gradient_norm(const ModelGrads& grads);
void scale_gradients(ModelGrads& grads, double factor);
void apply_sgd(ModelParameters& params, const ModelGrads& grads, double lr);

// Plain SGD, batch size 1: per epoch, seeded shuffle, then per-sequence
// forward/backward/clip/update. Keeps the parameters of the best dev
// binary-HIPAA F1 epoch; stops at patience or max_epochs. When pretrained is
// given its vocabulary is used either way; its vectors initialize the table
// only when config.model.use_pretrained is set (the -pre-train ablation
// keeps the vocabulary and randomizes the values). Log lines are
// "epoch<TAB>train_loss<TAB>dev_P<TAB>dev_R<TAB>dev_F1".
Checkpoint train_model(const Dataset& train, const Dataset& dev,
                       const TrainConfig& config,
                       const PretrainedEmbeddings* pretrained, std::ostream* log);

// Text header ("DEID-MODEL v1", then key<TAB>value lines including array
// shapes) followed by the raw little-endian float64 arrays in header order.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// First line of a model file ("DEID-MODEL v1" / "DEID-CRF v1").
std::string peek_model_magic(const std::string& path);

}  // namespace deid
