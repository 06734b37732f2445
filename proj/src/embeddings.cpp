#include "deid/embeddings.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace deid {

int TokenVocab::lookup(const std::string& lowercased) const {
  auto it = index.find(lowercased);
  return it == index.end() ? 0 : it->second;
}

int TokenVocab::add(const std::string& lowercased) {
  auto it = index.find(lowercased);
  if (it != index.end()) return it->second;
  int id = size();
  tokens.push_back(lowercased);
  index.emplace(lowercased, id);
  return id;
}

int CharVocab::lookup(uint32_t codepoint) const {
  auto it = index.find(codepoint);
  return it == index.end() ? 0 : it->second;
}

int CharVocab::add(uint32_t codepoint) {
  auto it = index.find(codepoint);
  if (it != index.end()) return it->second;
  int id = size();
  chars.push_back(codepoint);
  index.emplace(codepoint, id);
  return id;
}

std::string lowercase_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
  return out;
}

std::vector<uint32_t> utf8_codepoints(const std::string& s) {
  std::vector<uint32_t> out;
  size_t i = 0;
  while (i < s.size()) {
    unsigned char b = s[i];
    uint32_t cp;
    size_t len;
    if (b < 0x80) {
      cp = b;
      len = 1;
    } else if ((b >> 5) == 0x6) {
      cp = b & 0x1f;
      len = 2;
    } else if ((b >> 4) == 0xe) {
      cp = b & 0x0f;
      len = 3;
    } else if ((b >> 3) == 0x1e) {
      cp = b & 0x07;
      len = 4;
    } else {
      out.push_back(b);  // stray byte: keep it as its own codepoint
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(b);
      ++i;
      continue;
    }
    bool ok = true;
    for (size_t j = 1; j < len; ++j) {
      unsigned char c = s[i + j];
      if ((c >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (c & 0x3f);
    }
    if (!ok) {
      out.push_back(b);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

TokenVocab build_token_vocab(const Dataset& ds) {
  TokenVocab v;
  for (const LabeledSequence& seq : ds.sequences)
    for (const Token& t : seq.tokens) v.add(lowercase_ascii(t.text));
  return v;
}

CharVocab build_char_vocab(const Dataset& ds) {
  CharVocab v;
  for (const LabeledSequence& seq : ds.sequences)
    for (const Token& t : seq.tokens)
      for (uint32_t cp : utf8_codepoints(t.text)) v.add(cp);
  return v;
}

std::pair<TokenVocab, Mat64> load_pretrained(const std::string& path,
                                             int expected_dim, Rng& rng,
                                             std::ostream* warn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vector file " + path);
  if (expected_dim <= 0) throw Error("vector dimension must be positive");

  TokenVocab vocab;
  std::vector<Vec64> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    Vec64 v;
    v.reserve(expected_dim);
    double x;
    while (ss >> x) v.push_back(x);
    if (static_cast<int>(v.size()) != expected_dim)
      throw Error(path + ":" + std::to_string(lineno) + ": expected " +
                  std::to_string(expected_dim) + " values, got " +
                  std::to_string(v.size()));
    std::string lowered = lowercase_ascii(token);
    if (vocab.index.count(lowered)) {
      if (warn)
        *warn << "warning: " << path << ":" << lineno << ": duplicate token '"
              << lowered << "', keeping first\n";
      continue;
    }
    vocab.add(lowered);
    rows.push_back(std::move(v));
  }

  Mat64 table(static_cast<int>(rows.size()) + 1, expected_dim);
  {
    Mat64 unk(1, expected_dim);
    uniform_init(unk, 0.05, rng);
    std::copy(unk.a.begin(), unk.a.end(), table.row(0));
  }
  for (size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].begin(), rows[r].end(), table.row(static_cast<int>(r) + 1));
  return {std::move(vocab), std::move(table)};
}

void save_pretrained(const TokenVocab& vocab, const Mat64& table,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write vector file " + path);
  char buf[64];
  for (int i = 1; i < vocab.size(); ++i) {  // UNK row is not part of the file format
    out << vocab.tokens[i];
    for (int j = 0; j < table.cols; ++j) {
      snprintf(buf, sizeof buf, "%.17g", table.at(i, j));
      out << ' ' << buf;
    }
    out << '\n';
  }
}

std::vector<int> token_char_ids(const std::string& token_text, const CharVocab& vocab) {
  std::vector<int> ids;
  for (uint32_t cp : utf8_codepoints(token_text)) ids.push_back(vocab.lookup(cp));
  return ids;
}

Vec64 encode_token_chars(const std::string& token_text, const CharVocab& vocab,
                         const CharEncoderParams& params) {
  if (token_text.empty()) throw Error("cannot encode an empty token");
  std::vector<int> ids = token_char_ids(token_text, vocab);
  std::vector<Vec64> xs;
  xs.reserve(ids.size());
  for (int id : ids)
    xs.emplace_back(params.table.row(id), params.table.row(id) + params.table.cols);
  return bilstm_outputs(xs, params.lstm, BiMode::summary)[0];
}

std::vector<Vec64> embed_sequence(const std::vector<Token>& tokens,
                                  const TokenVocab* token_vocab,
                                  const Mat64* token_table,
                                  const CharVocab* char_vocab,
                                  const CharEncoderParams* char_encoder) {
  if (tokens.empty()) throw Error("cannot embed an empty sequence");
  if (!token_table && !char_encoder)
    throw Error("at least one of token and character embeddings must be enabled");
  std::vector<Vec64> out;
  out.reserve(tokens.size());
  for (const Token& tok : tokens) {
    Vec64 e;
    if (token_table) {
      int id = token_vocab->lookup(lowercase_ascii(tok.text));
      e.insert(e.end(), token_table->row(id), token_table->row(id) + token_table->cols);
    }
    if (char_encoder) {
      Vec64 ch = encode_token_chars(tok.text, *char_vocab, *char_encoder);
      e.insert(e.end(), ch.begin(), ch.end());
    }
    out.push_back(std::move(e));
  }
  return out;
}

Vec64 dropout_mask(size_t n, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw Error("dropout probability must be in [0, 1)");
  Vec64 mask(n);
  double keep_scale = 1.0 / (1.0 - p);
  for (size_t i = 0; i < n; ++i) mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

Vec64 dropout(const Vec64& v, double p, bool train, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw Error("dropout probability must be in [0, 1)");
  if (!train || p == 0.0) return v;
  Vec64 mask = dropout_mask(v.size(), p, rng);
  Vec64 out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] * mask[i];
  return out;
}

}  // namespace deid
