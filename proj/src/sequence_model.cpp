#include "deid/sequence_model.hpp"

#include <algorithm>
#include <cmath>

#include "deid/kernels.hpp"

namespace deid {

int ModelConfig::embedding_dim() const {
  validate();
  return (use_token_emb ? token_dim : 0) + (use_char_emb ? 2 * char_lstm_dim : 0);
}

void ModelConfig::validate() const {
  if (!use_token_emb && !use_char_emb)
    throw Error("model: token and character embeddings cannot both be disabled");
  if (token_dim <= 0 || char_dim <= 0 || char_lstm_dim <= 0 || pred_lstm_dim <= 0 ||
      ff_hidden <= 0)
    throw Error("model: dimensions must be positive");
}

ModelParameters init_model(const ModelConfig& config, const LabelSet& labels,
                           TokenVocab token_vocab, CharVocab char_vocab,
                           const Mat64* pretrained_table, uint64_t seed) {
  config.validate();
  labels.validate();
  ModelParameters p;
  p.config = config;
  p.labels = labels;
  Rng rng(seed);

  if (config.use_token_emb) {
    p.token_vocab = std::move(token_vocab);
    if (pretrained_table) {
      if (pretrained_table->cols != config.token_dim)
        throw Error("model: pretrained dimension " + std::to_string(pretrained_table->cols) +
                    " != token_dim " + std::to_string(config.token_dim));
      if (pretrained_table->rows != p.token_vocab.size())
        throw Error("model: pretrained table rows do not match vocabulary");
      p.token_table = *pretrained_table;
    } else {
      p.token_table = Mat64(p.token_vocab.size(), config.token_dim);
      uniform_init(p.token_table, 0.05, rng);
    }
  }
  if (config.use_char_emb) {
    p.char_vocab = std::move(char_vocab);
    p.char_encoder.table = Mat64(p.char_vocab.size(), config.char_dim);
    uniform_init(p.char_encoder.table, 0.05, rng);
    p.char_encoder.lstm.init(config.char_dim, config.char_lstm_dim,
                             config.literal_output_gate, rng);
  }
  int e_dim = config.embedding_dim();
  p.prediction.lstm.init(e_dim, config.pred_lstm_dim, config.literal_output_gate, rng);
  p.prediction.ff_w1 = Mat64(config.ff_hidden, 2 * config.pred_lstm_dim);
  xavier_init(p.prediction.ff_w1, rng);
  p.prediction.ff_b1.assign(config.ff_hidden, 0.0);
  p.prediction.ff_w2 = Mat64(labels.size(), config.ff_hidden);
  xavier_init(p.prediction.ff_w2, rng);
  p.prediction.ff_b2.assign(labels.size(), 0.0);
  if (config.use_seq_opt) p.transitions = Mat64(labels.size(), labels.size());
  return p;
}

namespace {

void push_lstm_arrays(std::vector<ArrayRef>& out, const std::string& prefix,
                      LstmParams& p) {
  out.push_back({prefix + ".w_i", p.w_i.a.data(), p.w_i.size(), p.w_i.rows, p.w_i.cols});
  out.push_back({prefix + ".w_c", p.w_c.a.data(), p.w_c.size(), p.w_c.rows, p.w_c.cols});
  out.push_back({prefix + ".w_o", p.w_o.a.data(), p.w_o.size(), p.w_o.rows, p.w_o.cols});
  out.push_back({prefix + ".b_i", p.b_i.data(), p.b_i.size(), 1, static_cast<int>(p.b_i.size())});
  out.push_back({prefix + ".b_c", p.b_c.data(), p.b_c.size(), 1, static_cast<int>(p.b_c.size())});
  out.push_back({prefix + ".b_o", p.b_o.data(), p.b_o.size(), 1, static_cast<int>(p.b_o.size())});
}

}  // namespace

std::vector<ArrayRef> parameter_arrays(ModelParameters& p) {
  std::vector<ArrayRef> out;
  if (p.config.use_token_emb)
    out.push_back({"token_table", p.token_table.a.data(), p.token_table.size(),
                   p.token_table.rows, p.token_table.cols});
  if (p.config.use_char_emb) {
    out.push_back({"char_table", p.char_encoder.table.a.data(), p.char_encoder.table.size(),
                   p.char_encoder.table.rows, p.char_encoder.table.cols});
    push_lstm_arrays(out, "char_fwd", p.char_encoder.lstm.fwd);
    push_lstm_arrays(out, "char_bwd", p.char_encoder.lstm.bwd);
  }
  push_lstm_arrays(out, "pred_fwd", p.prediction.lstm.fwd);
  push_lstm_arrays(out, "pred_bwd", p.prediction.lstm.bwd);
  out.push_back({"ff_w1", p.prediction.ff_w1.a.data(), p.prediction.ff_w1.size(),
                 p.prediction.ff_w1.rows, p.prediction.ff_w1.cols});
  out.push_back({"ff_b1", p.prediction.ff_b1.data(), p.prediction.ff_b1.size(), 1,
                 static_cast<int>(p.prediction.ff_b1.size())});
  out.push_back({"ff_w2", p.prediction.ff_w2.a.data(), p.prediction.ff_w2.size(),
                 p.prediction.ff_w2.rows, p.prediction.ff_w2.cols});
  out.push_back({"ff_b2", p.prediction.ff_b2.data(), p.prediction.ff_b2.size(), 1,
                 static_cast<int>(p.prediction.ff_b2.size())});
  if (p.config.use_seq_opt)
    out.push_back({"transitions", p.transitions.a.data(), p.transitions.size(),
                   p.transitions.rows, p.transitions.cols});
  return out;
}

size_t parameter_count(ModelParameters& params) {
  size_t n = 0;
  for (const ArrayRef& a : parameter_arrays(params)) n += a.n;
  return n;
}

namespace {

size_t lstm_param_count(size_t d_in, size_t d_h) {
  return d_h * (d_in + 2 * d_h)  // w_i
         + d_h * (d_in + d_h)    // w_c
         + d_h * (d_in + 2 * d_h)  // w_o
         + 3 * d_h;              // biases
}

}  // namespace

size_t model_param_count(const ModelConfig& config, size_t token_vocab_size,
                         size_t char_vocab_size, int num_labels) {
  config.validate();
  size_t k = static_cast<size_t>(num_labels);
  size_t total = 0;
  if (config.use_token_emb) total += token_vocab_size * config.token_dim;
  if (config.use_char_emb) {
    total += char_vocab_size * config.char_dim;
    total += 2 * lstm_param_count(config.char_dim, config.char_lstm_dim);
  }
  size_t e_dim = config.embedding_dim();
  total += 2 * lstm_param_count(e_dim, config.pred_lstm_dim);
  total += static_cast<size_t>(config.ff_hidden) * 2 * config.pred_lstm_dim + config.ff_hidden;
  total += k * config.ff_hidden + k;
  if (config.use_seq_opt) total += k * k;
  return total;
}

SeqTrace model_forward(const LabeledSequence& seq, const ModelParameters& params,
                       bool train, double dropout_p, Rng* rng) {
  if (seq.tokens.empty()) throw Error("model: empty sequence");
  if (train && dropout_p > 0.0 && !rng)
    throw Error("model: training forward needs an rng for dropout");
  const ModelConfig& cfg = params.config;
  const size_t n = seq.tokens.size();
  const int k = params.prediction.ff_w2.rows;

  SeqTrace tr;
  tr.gold = seq.labels;
  tr.e.resize(n);

  if (cfg.use_token_emb) {
    tr.token_ids.resize(n);
    for (size_t t = 0; t < n; ++t)
      tr.token_ids[t] = params.token_vocab.lookup(lowercase_ascii(seq.tokens[t].text));
  }
  if (cfg.use_char_emb) tr.chars.resize(n);

  for (size_t t = 0; t < n; ++t) {
    Vec64& e = tr.e[t];
    if (cfg.use_token_emb) {
      const double* row = params.token_table.row(tr.token_ids[t]);
      e.insert(e.end(), row, row + cfg.token_dim);
    }
    if (cfg.use_char_emb) {
      TokenCharTrace& ct = tr.chars[t];
      ct.ids = token_char_ids(seq.tokens[t].text, params.char_vocab);
      if (ct.ids.empty()) throw Error("model: empty token in sequence " + seq.note_id);
      ct.xs.reserve(ct.ids.size());
      for (int id : ct.ids) {
        const double* row = params.char_encoder.table.row(id);
        ct.xs.emplace_back(row, row + cfg.char_dim);
      }
      ct.lstm = bilstm_forward(ct.xs, params.char_encoder.lstm);
      Vec64 b = bilstm_summary(ct.lstm);
      e.insert(e.end(), b.begin(), b.end());
    }
  }

  // Dropout on the character-enhanced embeddings, before the prediction layer.
  bool dropping = train && dropout_p > 0.0;
  tr.e_in.resize(n);
  if (dropping) tr.mask.resize(n);
  for (size_t t = 0; t < n; ++t) {
    if (dropping) {
      tr.mask[t] = dropout_mask(tr.e[t].size(), dropout_p, *rng);
      tr.e_in[t].resize(tr.e[t].size());
      for (size_t j = 0; j < tr.e[t].size(); ++j)
        tr.e_in[t][j] = tr.e[t][j] * tr.mask[t][j];
    } else {
      tr.e_in[t] = tr.e[t];
    }
  }

  tr.pred = bilstm_forward(tr.e_in, params.prediction.lstm);
  tr.d = bilstm_per_element(tr.pred);

  tr.u.resize(n);
  tr.logits.resize(n);
  tr.probs.resize(n);
  for (size_t t = 0; t < n; ++t) {
    tr.u[t] = tanh(kernels::matvec(params.prediction.ff_w1, tr.d[t], params.prediction.ff_b1));
    tr.logits[t] = kernels::matvec(params.prediction.ff_w2, tr.u[t], params.prediction.ff_b2);
    if (static_cast<int>(tr.logits[t].size()) != k)
      throw Error("model: logit dimension mismatch");
    tr.probs[t] = softmax(tr.logits[t]);
  }
  return tr;
}

std::vector<Vec64> model_probabilities(const LabeledSequence& seq,
                                       const ModelParameters& params) {
  return model_forward(seq, params, false, 0.0, nullptr).probs;
}

namespace {

const std::vector<Vec64>& chain_emissions(const SeqTrace& tr, const ModelConfig& cfg) {
  return cfg.raw_score_emissions ? tr.logits : tr.probs;
}

}  // namespace

double model_loss(const SeqTrace& tr, const ModelParameters& params) {
  const size_t n = tr.probs.size();
  if (tr.gold.size() != n) throw Error("model: gold labels missing");
  if (params.config.use_seq_opt) {
    const std::vector<Vec64>& emis = chain_emissions(tr, params.config);
    return log_partition(emis, params.transitions) -
           sequence_score(emis, params.transitions, tr.gold);
  }
  double loss = 0.0;
  for (size_t t = 0; t < n; ++t)
    loss -= std::log(std::max(tr.probs[t][tr.gold[t]], 1e-300));
  return loss;
}

void ModelGrads::init_like(const ModelParameters& params) {
  token_rows.clear();
  char_rows.clear();
  if (params.config.use_char_emb) char_lstm.init_like(params.char_encoder.lstm);
  pred_lstm.init_like(params.prediction.lstm);
  d_ff_w1 = Mat64(params.prediction.ff_w1.rows, params.prediction.ff_w1.cols);
  d_ff_b1.assign(params.prediction.ff_b1.size(), 0.0);
  d_ff_w2 = Mat64(params.prediction.ff_w2.rows, params.prediction.ff_w2.cols);
  d_ff_b2.assign(params.prediction.ff_b2.size(), 0.0);
  if (params.config.use_seq_opt)
    d_transitions = Mat64(params.transitions.rows, params.transitions.cols);
}

double model_backward(const SeqTrace& tr, const ModelParameters& params,
                      ModelGrads* grads) {
  const ModelConfig& cfg = params.config;
  const size_t n = tr.probs.size();
  const int k = static_cast<int>(tr.probs[0].size());
  grads->init_like(params);

  double loss;
  std::vector<Vec64> dz(n, Vec64(k, 0.0));
  if (cfg.use_seq_opt) {
    const std::vector<Vec64>& emis = chain_emissions(tr, cfg);
    ChainMarginals marg = posterior_marginals(emis, params.transitions);
    loss = marg.log_z - sequence_score(emis, params.transitions, tr.gold);

    // dLoss/dEmission = marginal - gold indicator; dLoss/dT likewise.
    std::vector<Vec64> demis(n, Vec64(k));
    for (size_t t = 0; t < n; ++t) {
      for (int j = 0; j < k; ++j) demis[t][j] = marg.unary[t][j];
      demis[t][tr.gold[t]] -= 1.0;
    }
    for (size_t t = 0; t + 1 < n; ++t) {
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
          grads->d_transitions.at(a, b) += marg.pairwise[t].at(a, b);
      grads->d_transitions.at(tr.gold[t], tr.gold[t + 1]) -= 1.0;
    }

    if (cfg.raw_score_emissions) {
      dz = std::move(demis);
    } else {
      // Chain consumed probabilities; push through the softmax Jacobian.
      for (size_t t = 0; t < n; ++t) {
        double dot = 0.0;
        for (int j = 0; j < k; ++j) dot += demis[t][j] * tr.probs[t][j];
        for (int j = 0; j < k; ++j) dz[t][j] = tr.probs[t][j] * (demis[t][j] - dot);
      }
    }
  } else {
    loss = 0.0;
    for (size_t t = 0; t < n; ++t) {
      loss -= std::log(std::max(tr.probs[t][tr.gold[t]], 1e-300));
      dz[t] = tr.probs[t];
      dz[t][tr.gold[t]] -= 1.0;
    }
  }

  // Feed-forward layers, collecting upstream for the prediction BiLSTM.
  std::vector<Vec64> dd(n, Vec64(2 * cfg.pred_lstm_dim, 0.0));
  Vec64 du(cfg.ff_hidden), du_pre(cfg.ff_hidden);
  for (size_t t = 0; t < n; ++t) {
    add_inplace(grads->d_ff_b2, dz[t]);
    kernels::outer_acc(grads->d_ff_w2, dz[t].data(), tr.u[t].data());
    std::fill(du.begin(), du.end(), 0.0);
    kernels::matvec_t_acc(params.prediction.ff_w2, dz[t].data(), 0, cfg.ff_hidden, du.data());
    for (int j = 0; j < cfg.ff_hidden; ++j)
      du_pre[j] = du[j] * (1.0 - tr.u[t][j] * tr.u[t][j]);
    add_inplace(grads->d_ff_b1, du_pre);
    kernels::outer_acc(grads->d_ff_w1, du_pre.data(), tr.d[t].data());
    kernels::matvec_t_acc(params.prediction.ff_w1, du_pre.data(), 0,
                          2 * cfg.pred_lstm_dim, dd[t].data());
  }

  std::vector<Vec64> de_in;
  bilstm_backward_per_element(tr.pred, params.prediction.lstm, dd, &grads->pred_lstm,
                              &de_in);

  // Through dropout, then split into the token and character channels.
  const int tok_dim = cfg.use_token_emb ? cfg.token_dim : 0;
  for (size_t t = 0; t < n; ++t) {
    Vec64& de = de_in[t];
    if (!tr.mask.empty())
      for (size_t j = 0; j < de.size(); ++j) de[j] *= tr.mask[t][j];
    if (cfg.use_token_emb) {
      Vec64& row = grads->token_rows[tr.token_ids[t]];
      if (row.empty()) row.assign(cfg.token_dim, 0.0);
      for (int j = 0; j < tok_dim; ++j) row[j] += de[j];
    }
    if (cfg.use_char_emb) {
      Vec64 db(de.begin() + tok_dim, de.end());
      std::vector<Vec64> dxs;
      bilstm_backward_summary(tr.chars[t].lstm, params.char_encoder.lstm, db,
                              &grads->char_lstm, &dxs);
      for (size_t c = 0; c < tr.chars[t].ids.size(); ++c) {
        Vec64& row = grads->char_rows[tr.chars[t].ids[c]];
        if (row.empty()) row.assign(cfg.char_dim, 0.0);
        add_inplace(row, dxs[c]);
      }
    }
  }
  return loss;
}

std::vector<int> model_predict(const LabeledSequence& seq,
                               const ModelParameters& params) {
  SeqTrace tr = model_forward(seq, params, false, 0.0, nullptr);
  if (params.config.use_seq_opt)
    return viterbi(chain_emissions(tr, params.config), params.transitions).path;
  std::vector<int> out(tr.probs.size());
  for (size_t t = 0; t < tr.probs.size(); ++t) out[t] = argmax_lowest(tr.probs[t]);
  return out;
}

std::vector<std::vector<int>> predict_dataset(const Dataset& ds,
                                              const ModelParameters& params) {
  std::vector<std::vector<int>> out(ds.sequences.size());
  const int n = static_cast<int>(ds.sequences.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < n; ++i) out[i] = model_predict(ds.sequences[i], params);
  return out;
}

}  // namespace deid
