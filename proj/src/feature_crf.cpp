#include "deid/feature_crf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "deid/embeddings.hpp"
#include "deid/evaluation.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deid {

namespace {

void check_offsets(const std::vector<int>& offsets, const char* kind) {
  for (int o : offsets)
    if (o < -4 || o > 4)
      throw Error(std::string("templates: ") + kind + " offset out of [-4, 4]");
}

}  // namespace

void FeatureTemplates::validate() const {
  check_offsets(token_offsets, "token");
  check_offsets(shape_offsets, "shape");
  check_offsets(ngram_offsets, "ngram");
  check_offsets(affix_offsets, "affix");
  check_offsets(gazetteer_offsets, "gazetteer");
  check_offsets(regex_offsets, "regex");
}

namespace {

std::vector<int> parse_offsets(const std::string& s, const std::string& origin) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error(origin + ": bad offset list '" + s + "'");
    }
  }
  return out;
}

}  // namespace

FeatureTemplates load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open template file " + path);
  FeatureTemplates t;
  t.token_offsets.clear();
  t.shape_offsets.clear();
  t.ngram_offsets.clear();
  t.affix_offsets.clear();
  t.gazetteer_offsets.clear();
  t.regex_offsets.clear();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(path + ":" + std::to_string(lineno) + ": expected kind<TAB>offsets");
    std::string kind = line.substr(0, tab);
    std::vector<int> offsets = parse_offsets(line.substr(tab + 1),
                                             path + ":" + std::to_string(lineno));
    if (kind == "token")
      t.token_offsets = offsets;
    else if (kind == "shape")
      t.shape_offsets = offsets;
    else if (kind == "ngram")
      t.ngram_offsets = offsets;
    else if (kind == "affix")
      t.affix_offsets = offsets;
    else if (kind == "gazetteer")
      t.gazetteer_offsets = offsets;
    else if (kind == "regex")
      t.regex_offsets = offsets;
    else
      throw Error(path + ":" + std::to_string(lineno) + ": unknown kind " + kind);
  }
  t.validate();
  return t;
}

Gazetteers load_gazetteers(const std::vector<std::pair<std::string, std::string>>& name_path) {
  Gazetteers g;
  for (const auto& [name, path] : name_path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open gazetteer " + path);
    std::set<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      for (const Token& t : tokenize(line)) entries.insert(lowercase_ascii(t.text));
    }
    g.names.push_back(name);
    g.entries.push_back(std::move(entries));
  }
  return g;
}

std::string token_shape(const std::string& token_text) {
  std::string shape;
  for (uint32_t cp : utf8_codepoints(token_text)) {
    if (cp >= 'A' && cp <= 'Z')
      shape += 'X';
    else if (cp >= 'a' && cp <= 'z')
      shape += 'x';
    else if (cp >= '0' && cp <= '9')
      shape += 'd';
    else if (cp >= 0x80)
      shape += 'x';
    else
      shape += 'p';
  }
  return shape;
}

std::vector<std::string> regex_classes(const std::string& token_text) {
  std::vector<std::string> out;
  bool all_digits = !token_text.empty();
  for (char c : token_text) all_digits = all_digits && c >= '0' && c <= '9';
  if (!all_digits) return out;
  size_t len = token_text.size();
  if (len == 4 && (token_text[0] == '1' || token_text[0] == '2'))
    out.push_back("year-like");
  if (len == 5) out.push_back("zip-like");
  if (len == 3 || len == 4) out.push_back("phone-like");
  if (len >= 6) out.push_back("id-like");
  return out;
}

std::vector<std::string> extract_features(const std::vector<Token>& tokens, int i,
                                          const FeatureTemplates& templates,
                                          const Gazetteers& gazetteers) {
  const int n = static_cast<int>(tokens.size());
  if (i < 0 || i >= n) throw Error("extract_features: position out of range");
  std::vector<std::string> feats;

  auto slot = [&](int offset, auto&& fn) {
    int j = i + offset;
    std::string tag = "[" + std::to_string(offset) + "]";
    if (j < 0)
      feats.push_back("bos" + tag);
    else if (j >= n)
      feats.push_back("eos" + tag);
    else
      fn(tokens[j].text, tag);
  };

  for (int o : templates.token_offsets)
    slot(o, [&](const std::string& text, const std::string& tag) {
      feats.push_back("t" + tag + "=" + lowercase_ascii(text));
    });
  for (int o : templates.shape_offsets)
    slot(o, [&](const std::string& text, const std::string& tag) {
      feats.push_back("sh" + tag + "=" + token_shape(text));
    });
  for (int o : templates.ngram_offsets)
    slot(o, [&](const std::string& text, const std::string& tag) {
      std::string low = lowercase_ascii(text);
      for (size_t g = 2; g <= 3; ++g)
        for (size_t p = 0; p + g <= low.size(); ++p)
          feats.push_back("ng" + std::to_string(g) + tag + "=" + low.substr(p, g));
    });
  for (int o : templates.affix_offsets)
    slot(o, [&](const std::string& text, const std::string& tag) {
      std::string low = lowercase_ascii(text);
      for (size_t len = 1; len <= 4 && len <= low.size(); ++len) {
        feats.push_back("pre" + std::to_string(len) + tag + "=" + low.substr(0, len));
        feats.push_back("suf" + std::to_string(len) + tag + "=" +
                        low.substr(low.size() - len));
      }
    });
  for (int o : templates.gazetteer_offsets)
    slot(o, [&](const std::string& text, const std::string& tag) {
      std::string low = lowercase_ascii(text);
      for (size_t g = 0; g < gazetteers.names.size(); ++g)
        if (gazetteers.member(g, low))
          feats.push_back("gaz" + tag + "=" + gazetteers.names[g]);
    });
  for (int o : templates.regex_offsets)
    slot(o, [&](const std::string& text, const std::string& tag) {
      for (const std::string& cls : regex_classes(text))
        feats.push_back("rx" + tag + "=" + cls);
    });

  std::sort(feats.begin(), feats.end());
  feats.erase(std::unique(feats.begin(), feats.end()), feats.end());
  return feats;
}

Vec64 SparseWeights::emissions(const std::vector<std::string>& features,
                               int num_labels) const {
  Vec64 e(num_labels, 0.0);
  for (const std::string& f : features) {
    auto it = w.find(f);
    if (it == w.end()) continue;
    for (int l = 0; l < num_labels; ++l) e[l] += it->second[l];
  }
  return e;
}

void BaselineConfig::validate() const {
  if (lr <= 0) throw Error("baseline: learning rate must be positive");
  if (l2 < 0) throw Error("baseline: l2 must be nonnegative");
  if (max_epochs < 1 || patience < 1) throw Error("baseline: bad epoch limits");
}

namespace {

EmissionSeq sequence_emissions(const std::vector<std::vector<std::string>>& feats,
                               const SparseWeights& weights, int k) {
  EmissionSeq emis(feats.size());
  for (size_t t = 0; t < feats.size(); ++t) emis[t] = weights.emissions(feats[t], k);
  return emis;
}

}  // namespace

BaselineModel train_baseline(const Dataset& train, const Dataset& dev,
                             const FeatureTemplates& templates,
                             const Gazetteers& gazetteers,
                             const BaselineConfig& config, std::ostream* log) {
  config.validate();
  templates.validate();
  if (train.sequences.empty() || dev.sequences.empty())
    throw Error("baseline: empty train or dev set");
  if (train.label_set.size() < 1) throw Error("baseline: empty label set");
  const int k = train.label_set.size();

  BaselineModel model;
  model.config = config;
  model.labels = train.label_set;
  model.templates = templates;
  model.gazetteers = gazetteers;
  model.weights.transitions = Mat64(k, k);
  model.best_dev_f1 = -1.0;

  // Features never depend on the weights; extract once.
  std::vector<std::vector<std::vector<std::string>>> feats(train.sequences.size());
  for (size_t s = 0; s < train.sequences.size(); ++s) {
    const std::vector<Token>& toks = train.sequences[s].tokens;
    feats[s].resize(toks.size());
    for (int i = 0; i < static_cast<int>(toks.size()); ++i)
      feats[s][i] = extract_features(toks, i, templates, gazetteers);
  }

  SparseWeights weights;
  weights.transitions = Mat64(k, k);
  Rng shuffle_rng = Rng(config.seed).fork(1);
  std::vector<size_t> order(train.sequences.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t s : order) {
      const LabeledSequence& seq = train.sequences[s];
      const size_t n = seq.tokens.size();
      EmissionSeq emis = sequence_emissions(feats[s], weights, k);
      ChainMarginals marg = posterior_marginals(emis, weights.transitions);
      loss_sum += marg.log_z - sequence_score(emis, weights.transitions, seq.labels);

      for (size_t t = 0; t < n; ++t) {
        Vec64 demis = marg.unary[t];
        demis[seq.labels[t]] -= 1.0;
        for (const std::string& f : feats[s][t]) {
          Vec64& row = weights.w[f];
          if (row.empty()) row.assign(k, 0.0);
          for (int l = 0; l < k; ++l)
            row[l] -= config.lr * (demis[l] + config.l2 * row[l]);
        }
      }
      for (size_t t = 0; t + 1 < n; ++t) {
        for (int a = 0; a < k; ++a)
          for (int b = 0; b < k; ++b) {
            double d = marg.pairwise[t].at(a, b);
            if (seq.labels[t] == a && seq.labels[t + 1] == b) d -= 1.0;
            weights.transitions.at(a, b) -=
                config.lr * (d + config.l2 * weights.transitions.at(a, b));
          }
      }
    }

    // Dev F1 against the current epoch's weights.
    std::vector<std::vector<int>> dev_pred(dev.sequences.size());
    const int dn = static_cast<int>(dev.sequences.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < dn; ++i)
      dev_pred[i] = predict_baseline(dev.sequences[i], weights, templates, gazetteers, k);
    EvalReport report = token_prf(dev, dev_pred, EvalMode::binary_hipaa, dev.label_set);
    double f1 = report.overall.f1();
    if (log) {
      char line[160];
      snprintf(line, sizeof line, "%d\t%.6f\t%.4f\t%.4f\t%.4f\n", epoch,
               loss_sum / static_cast<double>(order.size()),
               report.overall.precision(), report.overall.recall(), f1);
      *log << line << std::flush;
    }
    if (f1 > model.best_dev_f1) {
      model.best_dev_f1 = f1;
      model.best_epoch = epoch;
      model.weights = weights;
    } else if (epoch - model.best_epoch >= config.patience) {
      break;
    }
  }
  return model;
}

std::vector<int> predict_baseline(const LabeledSequence& seq,
                                  const SparseWeights& weights,
                                  const FeatureTemplates& templates,
                                  const Gazetteers& gazetteers, int num_labels) {
  EmissionSeq emis(seq.tokens.size());
  for (int i = 0; i < static_cast<int>(seq.tokens.size()); ++i)
    emis[i] = weights.emissions(extract_features(seq.tokens, i, templates, gazetteers),
                                num_labels);
  return viterbi(emis, weights.transitions).path;
}

std::vector<int> predict_baseline(const LabeledSequence& seq, const BaselineModel& m) {
  return predict_baseline(seq, m.weights, m.templates, m.gazetteers, m.labels.size());
}

std::vector<std::vector<int>> predict_baseline_dataset(const Dataset& ds,
                                                       const BaselineModel& model) {
  std::vector<std::vector<int>> out(ds.sequences.size());
  const int n = static_cast<int>(ds.sequences.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < n; ++i) out[i] = predict_baseline(ds.sequences[i], model);
  return out;
}

namespace {

constexpr const char* kBaselineMagic = "DEID-CRF v1";

std::string offsets_to_string(const std::vector<int>& offsets) {
  std::string s;
  for (size_t i = 0; i < offsets.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(offsets[i]);
  }
  return s;
}

std::string fmt_double(double x) {
  char buf[40];
  snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void save_baseline(const BaselineModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model " + path);
  out << kBaselineMagic << '\n';
  out << "baseline.lr\t" << fmt_double(model.config.lr) << '\n';
  out << "baseline.l2\t" << fmt_double(model.config.l2) << '\n';
  out << "baseline.max_epochs\t" << model.config.max_epochs << '\n';
  out << "baseline.patience\t" << model.config.patience << '\n';
  out << "baseline.seed\t" << model.config.seed << '\n';
  out << "best.dev_f1\t" << fmt_double(model.best_dev_f1) << '\n';
  out << "best.epoch\t" << model.best_epoch << '\n';
  const LabelSet& ls = model.labels;
  out << "labels.count\t" << ls.size() << '\n';
  for (int i = 0; i < ls.size(); ++i)
    out << "label." << i << '\t' << ls.labels[i] << '\t' << ls.category[i] << '\t'
        << (ls.hipaa[i] ? 1 : 0) << '\n';
  out << "templates.token\t" << offsets_to_string(model.templates.token_offsets) << '\n';
  out << "templates.shape\t" << offsets_to_string(model.templates.shape_offsets) << '\n';
  out << "templates.ngram\t" << offsets_to_string(model.templates.ngram_offsets) << '\n';
  out << "templates.affix\t" << offsets_to_string(model.templates.affix_offsets) << '\n';
  out << "templates.gazetteer\t" << offsets_to_string(model.templates.gazetteer_offsets)
      << '\n';
  out << "templates.regex\t" << offsets_to_string(model.templates.regex_offsets) << '\n';
  out << "gazetteers.count\t" << model.gazetteers.names.size() << '\n';
  for (size_t g = 0; g < model.gazetteers.names.size(); ++g) {
    out << "gazetteer." << g << '\t' << model.gazetteers.names[g] << '\t'
        << model.gazetteers.entries[g].size() << '\n';
    for (const std::string& e : model.gazetteers.entries[g])
      out << "gazentry." << g << '\t' << e << '\n';
  }

  std::vector<std::string> features;
  features.reserve(model.weights.w.size());
  for (const auto& [f, v] : model.weights.w) features.push_back(f);
  std::sort(features.begin(), features.end());
  out << "features.count\t" << features.size() << '\n';
  for (const std::string& f : features) out << "feature\t" << f << '\n';
  out << "end\theader\n";
  for (const std::string& f : features) {
    const Vec64& v = model.weights.w.at(f);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  out.write(reinterpret_cast<const char*>(model.weights.transitions.a.data()),
            static_cast<std::streamsize>(model.weights.transitions.size() * sizeof(double)));
  if (!out) throw Error("failed writing model " + path);
}

BaselineModel load_baseline(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("model " + path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kBaselineMagic)
    throw Error("model " + path + ": unknown version '" + line + "'");

  BaselineModel model;
  model.templates = FeatureTemplates{};
  std::vector<std::string> features;
  std::map<std::string, std::string> kv;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line == "end\theader") {
      saw_end = true;
      break;
    }
    size_t t1 = line.find('\t');
    if (t1 == std::string::npos) throw Error("model " + path + ": malformed header line");
    std::string key = line.substr(0, t1);
    std::string rest = line.substr(t1 + 1);
    if (key == "feature") {
      features.push_back(rest);
    } else if (key.rfind("label.", 0) == 0) {
      size_t t2 = rest.find('\t');
      size_t t3 = rest.rfind('\t');
      if (t2 == std::string::npos || t3 == t2)
        throw Error("model " + path + ": malformed " + key);
      model.labels.add(rest.substr(0, t2), rest.substr(t2 + 1, t3 - t2 - 1),
                       rest.substr(t3 + 1) == "1");
    } else if (key.rfind("gazetteer.", 0) == 0) {
      size_t t2 = rest.find('\t');
      model.gazetteers.names.push_back(rest.substr(0, t2));
      model.gazetteers.entries.emplace_back();
    } else if (key.rfind("gazentry.", 0) == 0) {
      size_t g = std::stoul(key.substr(9));
      if (g >= model.gazetteers.entries.size())
        throw Error("model " + path + ": gazetteer entry before its gazetteer");
      model.gazetteers.entries[g].insert(rest);
    } else {
      kv[key] = rest;
    }
  }
  if (!saw_end) throw Error("model " + path + ": truncated header");

  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error("model " + path + ": missing key " + key);
    return it->second;
  };
  model.config.lr = std::strtod(need("baseline.lr").c_str(), nullptr);
  model.config.l2 = std::strtod(need("baseline.l2").c_str(), nullptr);
  model.config.max_epochs = std::stoi(need("baseline.max_epochs"));
  model.config.patience = std::stoi(need("baseline.patience"));
  model.config.seed = std::stoull(need("baseline.seed"));
  model.best_dev_f1 = std::strtod(need("best.dev_f1").c_str(), nullptr);
  model.best_epoch = std::stoi(need("best.epoch"));
  model.labels.validate();
  auto offs = [&](const std::string& key) {
    return parse_offsets(need(key), path);
  };
  model.templates.token_offsets = offs("templates.token");
  model.templates.shape_offsets = offs("templates.shape");
  model.templates.ngram_offsets = offs("templates.ngram");
  model.templates.affix_offsets = offs("templates.affix");
  model.templates.gazetteer_offsets = offs("templates.gazetteer");
  model.templates.regex_offsets = offs("templates.regex");

  const int k = model.labels.size();
  size_t expected = std::stoul(need("features.count"));
  if (features.size() != expected)
    throw Error("model " + path + ": feature count mismatch");
  for (const std::string& f : features) {
    Vec64 v(k);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(k * sizeof(double)));
    if (static_cast<size_t>(in.gcount()) != k * sizeof(double))
      throw Error("model " + path + ": unexpected end of file in feature weights");
    model.weights.w.emplace(f, std::move(v));
  }
  model.weights.transitions = Mat64(k, k);
  in.read(reinterpret_cast<char*>(model.weights.transitions.a.data()),
          static_cast<std::streamsize>(model.weights.transitions.size() * sizeof(double)));
  if (static_cast<size_t>(in.gcount()) !=
      model.weights.transitions.size() * sizeof(double))
    throw Error("model " + path + ": unexpected end of file in transitions");
  return model;
}

}  // namespace deid
