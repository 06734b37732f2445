#include "deid/training.hpp"

#include <algorithm>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "deid/evaluation.hpp"

namespace deid {

void TrainConfig::validate() const {
  if (lr <= 0) throw Error("train: learning rate must be positive");
  if (clip <= 0) throw Error("train: clip threshold must be positive");
  if (dropout < 0 || dropout >= 1) throw Error("train: dropout must be in [0, 1)");
  if (max_epochs < 1) throw Error("train: max_epochs must be >= 1");
  if (patience < 1) throw Error("train: patience must be >= 1");
  if (train_fraction <= 0 || train_fraction > 1)
    throw Error("train: train_fraction must be in (0, 1]");
  model.validate();
}

namespace {

double sum_squares(const Vec64& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double sum_squares_lstm(const LstmGrads& g) {
  return sum_squares(g.dw_i.a) + sum_squares(g.dw_c.a) + sum_squares(g.dw_o.a) +
         sum_squares(g.db_i) + sum_squares(g.db_c) + sum_squares(g.db_o);
}

void scale_lstm(LstmGrads& g, double f) {
  for (double& x : g.dw_i.a) x *= f;
  for (double& x : g.dw_c.a) x *= f;
  for (double& x : g.dw_o.a) x *= f;
  for (double& x : g.db_i) x *= f;
  for (double& x : g.db_c) x *= f;
  for (double& x : g.db_o) x *= f;
}

void sgd_lstm(LstmParams& p, const LstmGrads& g, double lr) {
  for (size_t i = 0; i < p.w_i.a.size(); ++i) p.w_i.a[i] -= lr * g.dw_i.a[i];
  for (size_t i = 0; i < p.w_c.a.size(); ++i) p.w_c.a[i] -= lr * g.dw_c.a[i];
  for (size_t i = 0; i < p.w_o.a.size(); ++i) p.w_o.a[i] -= lr * g.dw_o.a[i];
  for (size_t i = 0; i < p.b_i.size(); ++i) p.b_i[i] -= lr * g.db_i[i];
  for (size_t i = 0; i < p.b_c.size(); ++i) p.b_c[i] -= lr * g.db_c[i];
  for (size_t i = 0; i < p.b_o.size(); ++i) p.b_o[i] -= lr * g.db_o[i];
}

}  // namespace

double gradient_norm(const ModelGrads& g) {
  double s = 0.0;
  for (const auto& [row, v] : g.token_rows) s += sum_squares(v);
  for (const auto& [row, v] : g.char_rows) s += sum_squares(v);
  if (!g.char_lstm.fwd.dw_i.a.empty())
    s += sum_squares_lstm(g.char_lstm.fwd) + sum_squares_lstm(g.char_lstm.bwd);
  s += sum_squares_lstm(g.pred_lstm.fwd) + sum_squares_lstm(g.pred_lstm.bwd);
  s += sum_squares(g.d_ff_w1.a) + sum_squares(g.d_ff_b1);
  s += sum_squares(g.d_ff_w2.a) + sum_squares(g.d_ff_b2);
  s += sum_squares(g.d_transitions.a);
  return std::sqrt(s);
}

void scale_gradients(ModelGrads& g, double f) {
  for (auto& [row, v] : g.token_rows)
    for (double& x : v) x *= f;
  for (auto& [row, v] : g.char_rows)
    for (double& x : v) x *= f;
  if (!g.char_lstm.fwd.dw_i.a.empty()) {
    scale_lstm(g.char_lstm.fwd, f);
    scale_lstm(g.char_lstm.bwd, f);
  }
  scale_lstm(g.pred_lstm.fwd, f);
  scale_lstm(g.pred_lstm.bwd, f);
  for (double& x : g.d_ff_w1.a) x *= f;
  for (double& x : g.d_ff_b1) x *= f;
  for (double& x : g.d_ff_w2.a) x *= f;
  for (double& x : g.d_ff_b2) x *= f;
  for (double& x : g.d_transitions.a) x *= f;
}

void apply_sgd(ModelParameters& p, const ModelGrads& g, double lr) {
  for (const auto& [row, v] : g.token_rows) {
    double* dst = p.token_table.row(row);
    for (size_t j = 0; j < v.size(); ++j) dst[j] -= lr * v[j];
  }
  for (const auto& [row, v] : g.char_rows) {
    double* dst = p.char_encoder.table.row(row);
    for (size_t j = 0; j < v.size(); ++j) dst[j] -= lr * v[j];
  }
  if (p.config.use_char_emb) {
    sgd_lstm(p.char_encoder.lstm.fwd, g.char_lstm.fwd, lr);
    sgd_lstm(p.char_encoder.lstm.bwd, g.char_lstm.bwd, lr);
  }
  sgd_lstm(p.prediction.lstm.fwd, g.pred_lstm.fwd, lr);
  sgd_lstm(p.prediction.lstm.bwd, g.pred_lstm.bwd, lr);
  for (size_t i = 0; i < p.prediction.ff_w1.a.size(); ++i)
    p.prediction.ff_w1.a[i] -= lr * g.d_ff_w1.a[i];
  for (size_t i = 0; i < p.prediction.ff_b1.size(); ++i)
    p.prediction.ff_b1[i] -= lr * g.d_ff_b1[i];
  for (size_t i = 0; i < p.prediction.ff_w2.a.size(); ++i)
    p.prediction.ff_w2.a[i] -= lr * g.d_ff_w2.a[i];
  for (size_t i = 0; i < p.prediction.ff_b2.size(); ++i)
    p.prediction.ff_b2[i] -= lr * g.d_ff_b2[i];
  if (p.config.use_seq_opt)
    for (size_t i = 0; i < p.transitions.a.size(); ++i)
      p.transitions.a[i] -= lr * g.d_transitions.a[i];
}

Checkpoint train_model(const Dataset& train, const Dataset& dev,
                       const TrainConfig& config,
                       const PretrainedEmbeddings* pretrained, std::ostream* log) {
  config.validate();
  if (train.sequences.empty() || dev.sequences.empty())
    throw Error("train: empty train or dev set");
  if (config.model.use_pretrained && !pretrained)
    throw Error("train: use_pretrained set but no pretrained vectors given");

  // Seeded subsample for the training-set-size sweeps.
  std::vector<size_t> pool(train.sequences.size());
  for (size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  if (config.train_fraction < 1.0) {
    Rng sub = Rng(config.seed).fork(3);
    sub.shuffle(pool);
    size_t keep = static_cast<size_t>(
        std::ceil(config.train_fraction * static_cast<double>(pool.size())));
    pool.resize(std::max<size_t>(1, keep));
    std::sort(pool.begin(), pool.end());
  }

  TokenVocab token_vocab;
  const Mat64* pre_table = nullptr;
  if (config.model.use_token_emb) {
    if (pretrained) {
      token_vocab = pretrained->vocab;
      if (config.model.use_pretrained) pre_table = &pretrained->table;
    } else {
      Dataset sub;
      sub.label_set = train.label_set;
      for (size_t i : pool) sub.sequences.push_back(train.sequences[i]);
      token_vocab = build_token_vocab(sub);
    }
  }
  CharVocab char_vocab;
  if (config.model.use_char_emb) {
    Dataset sub;
    sub.label_set = train.label_set;
    for (size_t i : pool) sub.sequences.push_back(train.sequences[i]);
    char_vocab = build_char_vocab(sub);
  }

  ModelParameters params = init_model(config.model, train.label_set,
                                      std::move(token_vocab), std::move(char_vocab),
                                      pre_table, config.seed);

  Rng base(config.seed);
  Rng shuffle_rng = base.fork(1);
  Rng dropout_rng = base.fork(2);

  Checkpoint best;
  best.config = config;
  best.params = params;
  best.best_dev_f1 = -1.0;
  best.best_epoch = 0;

  std::vector<size_t> order = pool;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    ModelGrads grads;
    for (size_t i : order) {
      const LabeledSequence& seq = train.sequences[i];
      SeqTrace trace =
          model_forward(seq, params, true, config.dropout, &dropout_rng);
      double loss = model_backward(trace, params, &grads);
      if (!std::isfinite(loss))
        throw Error("training diverged: non-finite loss at sequence " + seq.note_id +
                    " (epoch " + std::to_string(epoch) + ")");
      loss_sum += loss;
      double norm = gradient_norm(grads);
      if (norm > config.clip) scale_gradients(grads, config.clip / norm);
      apply_sgd(params, grads, config.lr);
    }

    EvalReport report = token_prf(dev, predict_dataset(dev, params),
                                  EvalMode::binary_hipaa, dev.label_set);
    double f1 = report.overall.f1();
    if (log) {
      char line[160];
      snprintf(line, sizeof line, "%d\t%.6f\t%.4f\t%.4f\t%.4f\n", epoch,
               loss_sum / static_cast<double>(order.size()),
               report.overall.precision(), report.overall.recall(), f1);
      *log << line << std::flush;
    }
    if (f1 > best.best_dev_f1) {
      best.best_dev_f1 = f1;
      best.best_epoch = epoch;
      best.params = params;
    } else if (epoch - best.best_epoch >= config.patience) {
      break;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kModelMagic = "DEID-MODEL v1";

std::string fmt_double(double x) {
  char buf[40];
  snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  const TrainConfig& tc = ckpt.config;
  const ModelConfig& mc = tc.model;
  out << kModelMagic << '\n';
  out << "config.token_dim\t" << mc.token_dim << '\n';
  out << "config.char_dim\t" << mc.char_dim << '\n';
  out << "config.char_lstm_dim\t" << mc.char_lstm_dim << '\n';
  out << "config.pred_lstm_dim\t" << mc.pred_lstm_dim << '\n';
  out << "config.ff_hidden\t" << mc.ff_hidden << '\n';
  out << "config.use_token_emb\t" << mc.use_token_emb << '\n';
  out << "config.use_char_emb\t" << mc.use_char_emb << '\n';
  out << "config.use_seq_opt\t" << mc.use_seq_opt << '\n';
  out << "config.use_pretrained\t" << mc.use_pretrained << '\n';
  out << "config.literal_output_gate\t" << mc.literal_output_gate << '\n';
  out << "config.raw_score_emissions\t" << mc.raw_score_emissions << '\n';
  out << "train.lr\t" << fmt_double(tc.lr) << '\n';
  out << "train.clip\t" << fmt_double(tc.clip) << '\n';
  out << "train.dropout\t" << fmt_double(tc.dropout) << '\n';
  out << "train.max_epochs\t" << tc.max_epochs << '\n';
  out << "train.patience\t" << tc.patience << '\n';
  out << "train.seed\t" << tc.seed << '\n';
  out << "train.train_fraction\t" << fmt_double(tc.train_fraction) << '\n';
  out << "best.dev_f1\t" << fmt_double(ckpt.best_dev_f1) << '\n';
  out << "best.epoch\t" << ckpt.best_epoch << '\n';

  const LabelSet& ls = ckpt.params.labels;
  out << "labels.count\t" << ls.size() << '\n';
  for (int i = 0; i < ls.size(); ++i)
    out << "label." << i << '\t' << ls.labels[i] << '\t' << ls.category[i] << '\t'
        << (ls.hipaa[i] ? 1 : 0) << '\n';
  if (mc.use_token_emb) {
    out << "tokens.count\t" << ckpt.params.token_vocab.size() << '\n';
    for (int i = 0; i < ckpt.params.token_vocab.size(); ++i)
      out << "token." << i << '\t' << ckpt.params.token_vocab.tokens[i] << '\n';
  }
  if (mc.use_char_emb) {
    out << "chars.count\t" << ckpt.params.char_vocab.size() << '\n';
    for (int i = 0; i < ckpt.params.char_vocab.size(); ++i)
      out << "char." << i << '\t' << ckpt.params.char_vocab.chars[i] << '\n';
  }

  ModelParameters& params = const_cast<ModelParameters&>(ckpt.params);
  std::vector<ArrayRef> arrays = parameter_arrays(params);
  for (const ArrayRef& a : arrays)
    out << "array." << a.name << '\t' << a.rows << '\t' << a.cols << '\n';
  out << "end\theader\n";
  for (const ArrayRef& a : arrays)
    out.write(reinterpret_cast<const char*>(a.data),
              static_cast<std::streamsize>(a.n * sizeof(double)));
  if (!out) throw Error("failed writing checkpoint " + path);
}

namespace {

int to_int(const std::string& s, const std::string& what) {
  try {
    return std::stoi(s);
  } catch (const std::exception&) {
    throw Error("checkpoint: bad integer in " + what);
  }
}

double to_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw Error("checkpoint: bad number in " + what);
  return v;
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("checkpoint " + path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kModelMagic)
    throw Error("checkpoint " + path + ": unknown version '" + line + "'");

  std::map<std::string, std::string> kv;
  LabelSet labels;
  TokenVocab token_vocab;
  token_vocab.tokens.clear();
  CharVocab char_vocab;
  char_vocab.chars.clear();
  struct ArraySpec {
    std::string name;
    int rows, cols;
  };
  std::vector<ArraySpec> specs;

  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line == "end\theader") {
      saw_end = true;
      break;
    }
    auto f = split_tabs(line);
    if (f.size() < 2) throw Error("checkpoint " + path + ": malformed header line");
    const std::string& key = f[0];
    if (key.rfind("label.", 0) == 0) {
      if (f.size() != 4) throw Error("checkpoint " + path + ": malformed " + key);
      labels.add(f[1], f[2], f[3] == "1");
    } else if (key.rfind("token.", 0) == 0) {
      token_vocab.tokens.push_back(f[1]);
    } else if (key.rfind("char.", 0) == 0) {
      char_vocab.chars.push_back(
          static_cast<uint32_t>(std::stoul(f[1])));
    } else if (key.rfind("array.", 0) == 0) {
      if (f.size() != 3) throw Error("checkpoint " + path + ": malformed " + key);
      specs.push_back({key.substr(6), to_int(f[1], key), to_int(f[2], key)});
    } else {
      kv[key] = f[1];
    }
  }
  if (!saw_end) throw Error("checkpoint " + path + ": truncated header");

  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error("checkpoint " + path + ": missing key " + key);
    return it->second;
  };

  Checkpoint ckpt;
  TrainConfig& tc = ckpt.config;
  ModelConfig& mc = tc.model;
  mc.token_dim = to_int(need("config.token_dim"), "config.token_dim");
  mc.char_dim = to_int(need("config.char_dim"), "config.char_dim");
  mc.char_lstm_dim = to_int(need("config.char_lstm_dim"), "config.char_lstm_dim");
  mc.pred_lstm_dim = to_int(need("config.pred_lstm_dim"), "config.pred_lstm_dim");
  mc.ff_hidden = to_int(need("config.ff_hidden"), "config.ff_hidden");
  mc.use_token_emb = need("config.use_token_emb") == "1";
  mc.use_char_emb = need("config.use_char_emb") == "1";
  mc.use_seq_opt = need("config.use_seq_opt") == "1";
  mc.use_pretrained = need("config.use_pretrained") == "1";
  mc.literal_output_gate = need("config.literal_output_gate") == "1";
  mc.raw_score_emissions = need("config.raw_score_emissions") == "1";
  tc.lr = to_double(need("train.lr"), "train.lr");
  tc.clip = to_double(need("train.clip"), "train.clip");
  tc.dropout = to_double(need("train.dropout"), "train.dropout");
  tc.max_epochs = to_int(need("train.max_epochs"), "train.max_epochs");
  tc.patience = to_int(need("train.patience"), "train.patience");
  tc.seed = std::stoull(need("train.seed"));
  tc.train_fraction = to_double(need("train.train_fraction"), "train.train_fraction");
  ckpt.best_dev_f1 = to_double(need("best.dev_f1"), "best.dev_f1");
  ckpt.best_epoch = to_int(need("best.epoch"), "best.epoch");

  if (to_int(need("labels.count"), "labels.count") != labels.size())
    throw Error("checkpoint " + path + ": label count mismatch");
  labels.validate();
  if (mc.use_token_emb) {
    if (to_int(need("tokens.count"), "tokens.count") !=
        static_cast<int>(token_vocab.tokens.size()))
      throw Error("checkpoint " + path + ": token vocabulary count mismatch");
    for (int i = 0; i < static_cast<int>(token_vocab.tokens.size()); ++i)
      token_vocab.index.emplace(token_vocab.tokens[i], i);
  } else {
    token_vocab = TokenVocab{};
  }
  if (mc.use_char_emb) {
    if (to_int(need("chars.count"), "chars.count") !=
        static_cast<int>(char_vocab.chars.size()))
      throw Error("checkpoint " + path + ": char vocabulary count mismatch");
    for (int i = 0; i < static_cast<int>(char_vocab.chars.size()); ++i)
      char_vocab.index.emplace(char_vocab.chars[i], i);
  } else {
    char_vocab = CharVocab{};
  }

  // Allocate storage with the exact shapes init_model produces, then verify
  // the header agrees and overwrite the values from the binary section.
  ckpt.params = init_model(mc, labels, std::move(token_vocab), std::move(char_vocab),
                           nullptr, 0);
  std::vector<ArrayRef> arrays = parameter_arrays(ckpt.params);
  if (arrays.size() != specs.size())
    throw Error("checkpoint " + path + ": array list mismatch");
  for (size_t i = 0; i < arrays.size(); ++i) {
    if (arrays[i].name != specs[i].name || arrays[i].rows != specs[i].rows ||
        arrays[i].cols != specs[i].cols)
      throw Error("checkpoint " + path + ": array mismatch at " + specs[i].name);
    in.read(reinterpret_cast<char*>(arrays[i].data),
            static_cast<std::streamsize>(arrays[i].n * sizeof(double)));
    if (static_cast<size_t>(in.gcount()) != arrays[i].n * sizeof(double))
      throw Error("checkpoint " + path + ": unexpected end of file in array " +
                  specs[i].name);
  }
  return ckpt;
}

std::string peek_model_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file " + path);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace deid
