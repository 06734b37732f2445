#pragma once

// Test-only helpers: exhaustive-enumeration oracles independent of the DP
// implementations, random instance generators, and parameter flatteners for
// finite-difference checks.

#include <map>
#include <string>
#include <vector>

#include "deid/chain_crf.hpp"
#include "deid/corpus.hpp"
#include "deid/recurrent.hpp"
#include "deid/sequence_model.hpp"

namespace testsupport {

using deid::EmissionSeq;
using deid::Mat64;
using deid::Rng;
using deid::Vec64;

// Posterior marginals by frequency-weighted enumeration of all k^n
// sequences (never via the forward-backward recursion).
inline deid::ChainMarginals enum_marginals(const EmissionSeq& emissions,
                                           const Mat64& transitions) {
  const size_t n = emissions.size();
  const int k = static_cast<int>(emissions[0].size());
  deid::ChainMarginals m;
  m.unary.assign(n, Vec64(k, 0.0));
  m.pairwise.assign(n > 1 ? n - 1 : 0, Mat64(k, k));

  std::vector<int> y(n, 0);
  std::vector<double> scores;
  std::vector<std::vector<int>> paths;
  while (true) {
    scores.push_back(deid::sequence_score(emissions, transitions, y));
    paths.push_back(y);
    size_t pos = n;
    while (pos > 0 && ++y[pos - 1] == k) {
      y[pos - 1] = 0;
      --pos;
    }
    if (pos == 0) break;
  }
  m.log_z = deid::logsumexp(scores);
  for (size_t p = 0; p < paths.size(); ++p) {
    double w = std::exp(scores[p] - m.log_z);
    for (size_t t = 0; t < n; ++t) m.unary[t][paths[p][t]] += w;
    for (size_t t = 0; t + 1 < n; ++t)
      m.pairwise[t].at(paths[p][t], paths[p][t + 1]) += w;
  }
  return m;
}

inline EmissionSeq random_emissions(size_t n, int k, Rng& rng, double scale = 2.0) {
  EmissionSeq out(n, Vec64(k));
  for (auto& v : out)
    for (double& x : v) x = rng.uniform(-scale, scale);
  return out;
}

inline Mat64 random_transitions(int k, Rng& rng, double scale = 1.0) {
  Mat64 t(k, k);
  for (double& x : t.a) x = rng.uniform(-scale, scale);
  return t;
}

// ---- parameter flattening for finite differences ----

inline Vec64 flatten_params(deid::ModelParameters& params) {
  Vec64 flat;
  for (const deid::ArrayRef& a : deid::parameter_arrays(params))
    flat.insert(flat.end(), a.data, a.data + a.n);
  return flat;
}

inline void unflatten_params(deid::ModelParameters& params, const Vec64& flat) {
  size_t pos = 0;
  for (const deid::ArrayRef& a : deid::parameter_arrays(params)) {
    std::copy(flat.begin() + pos, flat.begin() + pos + a.n, a.data);
    pos += a.n;
  }
}

// Dense gradient vector aligned with flatten_params order; sparse embedding
// rows densify into their table slots.
inline Vec64 flatten_grads(deid::ModelGrads& grads, deid::ModelParameters& params) {
  auto lstm_block = [](const std::string& field, deid::LstmGrads& g) -> double* {
    if (field == "w_i") return g.dw_i.a.data();
    if (field == "w_c") return g.dw_c.a.data();
    if (field == "w_o") return g.dw_o.a.data();
    if (field == "b_i") return g.db_i.data();
    if (field == "b_c") return g.db_c.data();
    return g.db_o.data();
  };
  Vec64 flat;
  for (const deid::ArrayRef& a : deid::parameter_arrays(params)) {
    if (a.name == "token_table" || a.name == "char_table") {
      auto& rows = a.name == "token_table" ? grads.token_rows : grads.char_rows;
      Vec64 dense(a.n, 0.0);
      for (const auto& [row, v] : rows)
        std::copy(v.begin(), v.end(), dense.begin() + static_cast<size_t>(row) * a.cols);
      flat.insert(flat.end(), dense.begin(), dense.end());
      continue;
    }
    double* src = nullptr;
    if (a.name == "ff_w1")
      src = grads.d_ff_w1.a.data();
    else if (a.name == "ff_b1")
      src = grads.d_ff_b1.data();
    else if (a.name == "ff_w2")
      src = grads.d_ff_w2.a.data();
    else if (a.name == "ff_b2")
      src = grads.d_ff_b2.data();
    else if (a.name == "transitions")
      src = grads.d_transitions.a.data();
    else {
      std::string prefix = a.name.substr(0, a.name.find('.'));
      std::string field = a.name.substr(a.name.find('.') + 1);
      deid::BiLstmGrads& bi =
          prefix.rfind("char", 0) == 0 ? grads.char_lstm : grads.pred_lstm;
      deid::LstmGrads& dir = prefix.find("fwd") != std::string::npos ? bi.fwd : bi.bwd;
      src = lstm_block(field, dir);
    }
    flat.insert(flat.end(), src, src + a.n);
  }
  return flat;
}

// LSTM-only flatten helpers.
inline Vec64 flatten_lstm(const deid::LstmParams& p) {
  Vec64 flat;
  auto app = [&](const Vec64& v) { flat.insert(flat.end(), v.begin(), v.end()); };
  app(p.w_i.a);
  app(p.w_c.a);
  app(p.w_o.a);
  app(p.b_i);
  app(p.b_c);
  app(p.b_o);
  return flat;
}

inline void unflatten_lstm(deid::LstmParams& p, const Vec64& flat) {
  size_t pos = 0;
  auto take = [&](Vec64& v) {
    std::copy(flat.begin() + pos, flat.begin() + pos + v.size(), v.begin());
    pos += v.size();
  };
  take(p.w_i.a);
  take(p.w_c.a);
  take(p.w_o.a);
  take(p.b_i);
  take(p.b_c);
  take(p.b_o);
}

inline Vec64 flatten_lstm_grads(const deid::LstmGrads& g) {
  Vec64 flat;
  auto app = [&](const Vec64& v) { flat.insert(flat.end(), v.begin(), v.end()); };
  app(g.dw_i.a);
  app(g.dw_c.a);
  app(g.dw_o.a);
  app(g.db_i);
  app(g.db_c);
  app(g.db_o);
  return flat;
}

// Puts a freshly initialized model into a trained-scale state for
// finite-difference checks: embedding values at +-0.05 leave some weight
// gradients near the central-difference noise floor (~1e-10 absolute), where
// the relative-error denominator floor dominates. Scaling the tables to
// +-0.6 and randomizing biases keeps every nonzero gradient coordinate well
// above that floor.
inline void condition_model(deid::ModelParameters& p, uint64_t seed) {
  if (p.config.use_token_emb)
    for (double& x : p.token_table.a) x *= 12.0;
  if (p.config.use_char_emb)
    for (double& x : p.char_encoder.table.a) x *= 12.0;
  Rng trng(seed * 7 + 1);
  for (double& x : p.transitions.a) x = trng.uniform(-0.5, 0.5);
  Rng brng(seed * 13 + 5);
  std::vector<Vec64*> biases{&p.prediction.lstm.fwd.b_i, &p.prediction.lstm.fwd.b_c,
                             &p.prediction.lstm.fwd.b_o, &p.prediction.lstm.bwd.b_i,
                             &p.prediction.lstm.bwd.b_c, &p.prediction.lstm.bwd.b_o,
                             &p.prediction.ff_b1,        &p.prediction.ff_b2};
  if (p.config.use_char_emb)
    for (deid::LstmParams* l : {&p.char_encoder.lstm.fwd, &p.char_encoder.lstm.bwd}) {
      biases.push_back(&l->b_i);
      biases.push_back(&l->b_c);
      biases.push_back(&l->b_o);
    }
  for (Vec64* b : biases)
    for (double& x : *b) x = brng.uniform(-0.4, 0.4);
}

// A labeled sequence over space-separated single-class tokens.
inline deid::LabeledSequence make_sequence(const std::vector<std::string>& texts,
                                           const std::vector<int>& labels,
                                           const std::string& id = "t") {
  deid::LabeledSequence seq;
  seq.note_id = id;
  size_t cursor = 0;
  for (const std::string& t : texts) {
    if (!seq.tokens.empty()) ++cursor;
    seq.tokens.push_back({t, cursor, cursor + t.size()});
    cursor += t.size();
  }
  seq.labels = labels;
  return seq;
}

}  // namespace testsupport
