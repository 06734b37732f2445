#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "deid/corpus.hpp"
#include "deid/numerics.hpp"
#include "deid/recurrent.hpp"

namespace deid {

// Token vocabulary with UNK at index 0. Lookup lowercases; the character
// channel preserves case (capitalization is a PHI-relevant surface signal).
struct TokenVocab {
  std::vector<std::string> tokens{"<unk>"};
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(tokens.size()); }
  // token must already be lowercased; returns 0 (UNK) when unseen.
  int lookup(const std::string& lowercased) const;
  int add(const std::string& lowercased);  // returns existing index if present
};

struct CharVocab {
  std::vector<uint32_t> chars{0};  // codepoints; 0 is the shared UNK char
  std::unordered_map<uint32_t, int> index;

  int size() const { return static_cast<int>(chars.size()); }
  int lookup(uint32_t codepoint) const;
  int add(uint32_t codepoint);
};

std::string lowercase_ascii(const std::string& s);
std::vector<uint32_t> utf8_codepoints(const std::string& s);

// First-occurrence-order vocabularies over a dataset's tokens (lowercased)
// and characters.
TokenVocab build_token_vocab(const Dataset& ds);
CharVocab build_char_vocab(const Dataset& ds);

// Pretrained vector file: one entry per line, "token v1 v2 ... vd" separated
// by single spaces, no header. Tokens are lowercased at load; duplicates
// keep the first row (a warning goes to *warn). Row 0 of the returned table
// is a randomly initialized UNK row.
std::pair<TokenVocab, Mat64> load_pretrained(const std::string& path,
                                             int expected_dim, Rng& rng,
                                             std::ostream* warn = nullptr);
void save_pretrained(const TokenVocab& vocab, const Mat64& table,
                     const std::string& path);

// Character-level token encoder: char embeddings -> BiLSTM -> concatenated
// final states (dim 2 * lstm.d_h).
struct CharEncoderParams {
  Mat64 table;  // (char vocab size, char_dim)
  BiLstmParams lstm;
};

std::vector<int> token_char_ids(const std::string& token_text, const CharVocab& vocab);
Vec64 encode_token_chars(const std::string& token_text, const CharVocab& vocab,
                         const CharEncoderParams& params);

// e_i = [token_table row of lowercase(x_i) ; char encoding of x_i]; either
// part can be disabled (ablations).
std::vector<Vec64> embed_sequence(const std::vector<Token>& tokens,
                                  const TokenVocab* token_vocab,
                                  const Mat64* token_table,
                                  const CharVocab* char_vocab,
                                  const CharEncoderParams* char_encoder);

// Inverted dropout: train mode zeroes each coordinate with probability p and
// scales survivors by 1/(1-p); infer mode is the exact identity.
Vec64 dropout(const Vec64& v, double p, bool train, Rng& rng);

// Multipliers (0 or 1/(1-p)) drawn once; the trainer caches them for the
// backward pass.
Vec64 dropout_mask(size_t n, double p, Rng& rng);

}  // namespace deid
