#pragma once

#include <map>
#include <string>
#include <vector>

#include "deid/chain_crf.hpp"
#include "deid/corpus.hpp"
#include "deid/embeddings.hpp"
#include "deid/numerics.hpp"
#include "deid/recurrent.hpp"

namespace deid {

struct ModelConfig {
  int token_dim = 100;
  int char_dim = 25;
  int char_lstm_dim = 25;
  int pred_lstm_dim = 100;
  int ff_hidden = 100;
  bool use_token_emb = true;
  bool use_char_emb = true;
  bool use_seq_opt = true;
  bool use_pretrained = false;
  bool literal_output_gate = false;
  bool raw_score_emissions = false;

  // 100 + 2*25 by default; shrinks under the embedding ablations.
  int embedding_dim() const;
  void validate() const;
};

struct PredictionLayerParams {
  BiLstmParams lstm;  // hidden dim pred_lstm_dim per direction
  Mat64 ff_w1;        // (ff_hidden, 2*pred_lstm_dim)
  Vec64 ff_b1;
  Mat64 ff_w2;        // (num_labels, ff_hidden)
  Vec64 ff_b2;
};

struct ModelParameters {
  ModelConfig config;
  LabelSet labels;
  TokenVocab token_vocab;  // meaningful only when use_token_emb
  CharVocab char_vocab;    // meaningful only when use_char_emb
  Mat64 token_table;
  CharEncoderParams char_encoder;
  PredictionLayerParams prediction;
  Mat64 transitions;  // (k, k), present only when use_seq_opt

  int num_labels() const { return labels.size(); }
};

// Xavier for weight matrices, zero biases, +-0.05 for embedding tables,
// zero transitions; draws happen in the canonical array order below, so the
// result is fully determined by (config, vocabularies, seed). A pretrained
// table (with its own vocabulary) replaces the random token table.
ModelParameters init_model(const ModelConfig& config, const LabelSet& labels,
                           TokenVocab token_vocab, CharVocab char_vocab,
                           const Mat64* pretrained_table, uint64_t seed);

// Canonical enumeration of every trainable array (name, storage, shape);
// vectors report shape (1, n). Serialization, parameter counting, and the
// gradient checker all iterate this order.
struct ArrayRef {
  std::string name;
  double* data;
  size_t n;
  int rows;
  int cols;
};
std::vector<ArrayRef> parameter_arrays(ModelParameters& params);
size_t parameter_count(ModelParameters& params);

// Closed-form count for a configuration; the ablation shape law is tested
// against this.
size_t model_param_count(const ModelConfig& config, size_t token_vocab_size,
                         size_t char_vocab_size, int num_labels);

struct TokenCharTrace {
  std::vector<int> ids;
  std::vector<Vec64> xs;
  BiLstmTrace lstm;
};

struct SeqTrace {
  std::vector<int> gold;
  std::vector<int> token_ids;
  std::vector<TokenCharTrace> chars;
  std::vector<Vec64> e;       // character-enhanced embeddings
  std::vector<Vec64> mask;    // dropout multipliers; empty in infer mode
  std::vector<Vec64> e_in;    // prediction-layer inputs (post dropout)
  BiLstmTrace pred;
  std::vector<Vec64> d;       // BiLSTM outputs, dim 2*pred_lstm_dim
  std::vector<Vec64> u;       // feed-forward hidden activations (tanh)
  std::vector<Vec64> logits;  // pre-softmax label scores
  std::vector<Vec64> probs;   // a_i
};

// Full forward pass. Train mode draws dropout masks from rng; infer mode is
// deterministic and dropout-free.
SeqTrace model_forward(const LabeledSequence& seq, const ModelParameters& params,
                       bool train, double dropout_p, Rng* rng);

// The probability vectors a_{1:n} (infer mode).
std::vector<Vec64> model_probabilities(const LabeledSequence& seq,
                                       const ModelParameters& params);

// With seq-opt: -(s(gold) - logZ) over the chain whose emissions are the
// probability vectors (or raw logits under raw_score_emissions). Without:
// per-token cross-entropy. Nonnegative and finite in both cases.
double model_loss(const SeqTrace& trace, const ModelParameters& params);

struct ModelGrads {
  std::map<int, Vec64> token_rows;  // sparse: only rows used by the sequence
  std::map<int, Vec64> char_rows;
  BiLstmGrads char_lstm;
  BiLstmGrads pred_lstm;
  Mat64 d_ff_w1;
  Vec64 d_ff_b1;
  Mat64 d_ff_w2;
  Vec64 d_ff_b2;
  Mat64 d_transitions;

  void init_like(const ModelParameters& params);
};

// Exact gradient of model_loss for every trainable array; returns the loss.
double model_backward(const SeqTrace& trace, const ModelParameters& params,
                      ModelGrads* grads);

// Viterbi path over (a, T) when seq-opt is on, per-token argmax otherwise;
// ties resolve to the lowest label index. Deterministic.
std::vector<int> model_predict(const LabeledSequence& seq,
                               const ModelParameters& params);

// Predictions for a whole dataset; sequences are independent, so they are
// evaluated in parallel when OpenMP is available (outputs are positionally
// assigned, hence bit-identical to the serial path).
std::vector<std::vector<int>> predict_dataset(const Dataset& ds,
                                              const ModelParameters& params);

}  // namespace deid
