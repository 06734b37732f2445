#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "deid/embeddings.hpp"
#include "support/oracles.hpp"

using namespace deid;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

CharEncoderParams make_encoder(const CharVocab& vocab, int char_dim, int lstm_dim,
                               uint64_t seed) {
  CharEncoderParams enc;
  Rng rng(seed);
  enc.table = Mat64(vocab.size(), char_dim);
  uniform_init(enc.table, 0.5, rng);
  enc.lstm.init(char_dim, lstm_dim, false, rng);
  return enc;
}

CharVocab ascii_vocab() {
  CharVocab v;
  for (char c = 'a'; c <= 'z'; ++c) v.add(static_cast<uint32_t>(c));
  for (char c = 'A'; c <= 'Z'; ++c) v.add(static_cast<uint32_t>(c));
  for (char c = '0'; c <= '9'; ++c) v.add(static_cast<uint32_t>(c));
  return v;
}

}  // namespace

TEST_CASE("utf8 codepoints") {
  auto cps = utf8_codepoints("ab");
  CHECK(cps == std::vector<uint32_t>{'a', 'b'});
  auto accented = utf8_codepoints("caf\xC3\xA9");
  REQUIRE(accented.size() == 4);
  CHECK(accented[3] == 0xE9);
  // A stray continuation byte falls back to one codepoint per byte.
  CHECK(utf8_codepoints("\xA9x").size() == 2);
}

TEST_CASE("load_pretrained: counting, lowercasing, malformed lines, duplicates") {
  Rng rng(1);
  std::string path = write_temp("vec_ok.txt", "The 0.1 0.2 0.3\nhouse -1 0.5 2\n");
  auto [vocab, table] = load_pretrained(path, 3, rng);
  CHECK(vocab.size() == 3);  // 2 entries + UNK
  CHECK(table.rows == 3);
  CHECK(table.cols == 3);

  // Lookup lowercases at the call site; the stored key is lowercased.
  int id = vocab.lookup(lowercase_ascii("THE"));
  REQUIRE(id == 1);
  CHECK(table.at(id, 0) == 0.1);
  CHECK(table.at(id, 2) == 0.3);
  CHECK(vocab.lookup("never-seen") == 0);

  // UNK row is randomly initialized within +-0.05.
  for (int j = 0; j < 3; ++j) {
    CHECK(table.at(0, j) >= -0.05);
    CHECK(table.at(0, j) <= 0.05);
  }

  std::string bad = write_temp("vec_bad.txt", "the 0.1 0.2\n");
  try {
    Rng r2(2);
    load_pretrained(bad, 3, r2);
    FAIL("expected dimension error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":1") != std::string::npos);
  }

  std::string dup = write_temp("vec_dup.txt", "the 1 1 1\nTHE 2 2 2\ncat 3 3 3\n");
  std::ostringstream warn;
  Rng r3(3);
  auto [v2, t2] = load_pretrained(dup, 3, r3, &warn);
  CHECK(v2.size() == 3);  // the + cat + UNK; duplicate kept first
  CHECK(t2.at(v2.lookup("the"), 0) == 1.0);
  CHECK(warn.str().find("duplicate") != std::string::npos);

  // Save-load round trip reproduces the vectors.
  std::string rt = write_temp("vec_rt.txt", "");
  save_pretrained(v2, t2, rt);
  Rng r4(4);
  auto [v3, t3] = load_pretrained(rt, 3, r4);
  CHECK(v3.size() == v2.size());
  for (int i = 1; i < v2.size(); ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(t3.at(v3.lookup(v2.tokens[i]), j) - t2.at(i, j)) <= 1e-12);
}

TEST_CASE("encode_token_chars: zero-parameter fixed point and output dim") {
  CharVocab vocab = ascii_vocab();
  CharEncoderParams enc = make_encoder(vocab, 4, 3, 5);
  for (double& x : enc.lstm.fwd.w_i.a) x = 0.0;
  for (double& x : enc.lstm.fwd.w_c.a) x = 0.0;
  for (double& x : enc.lstm.fwd.w_o.a) x = 0.0;
  enc.lstm.bwd = enc.lstm.fwd;
  Vec64 z = encode_token_chars("x", vocab, enc);
  CHECK(z == Vec64(6, 0.0));

  CharEncoderParams enc2 = make_encoder(vocab, 4, 25, 6);
  std::string token;
  for (int len = 1; len <= 100; ++len) {
    token += static_cast<char>('a' + len % 26);
    CHECK(encode_token_chars(token, vocab, enc2).size() == 50);
  }
  CHECK_THROWS_AS(encode_token_chars("", vocab, enc2), Error);
}

TEST_CASE("walk/walks share the forward prefix state, not the encoding") {
  CharVocab vocab = ascii_vocab();
  CharEncoderParams enc = make_encoder(vocab, 4, 3, 7);

  auto char_vecs = [&](const std::string& tok) {
    std::vector<Vec64> xs;
    for (int id : token_char_ids(tok, vocab))
      xs.emplace_back(enc.table.row(id), enc.table.row(id) + enc.table.cols);
    return xs;
  };
  auto walk = lstm_forward(char_vecs("walk"), enc.lstm.fwd);
  auto walks = lstm_forward(char_vecs("walks"), enc.lstm.fwd);
  CHECK(walk.steps[3].h == walks.steps[3].h);  // prefix-driven forward state

  Vec64 e1 = encode_token_chars("walk", vocab, enc);
  Vec64 e2 = encode_token_chars("walks", vocab, enc);
  CHECK(e1 != e2);
}

TEST_CASE("embed_sequence: UNK token part, char part specificity, ablation dims") {
  CharVocab cvocab = ascii_vocab();
  CharEncoderParams enc = make_encoder(cvocab, 4, 3, 8);
  TokenVocab tvocab;
  tvocab.add("known");
  Mat64 table(2, 5);
  Rng rng(9);
  uniform_init(table, 0.5, rng);

  auto toks = testsupport::make_sequence({"known", "mystery", "riddle"}, {0, 0, 0}).tokens;
  auto es = embed_sequence(toks, &tvocab, &table, &cvocab, &enc);
  REQUIRE(es.size() == 3);
  for (const Vec64& e : es) CHECK(e.size() == 5 + 6);

  // Both unseen tokens take the UNK row for the token part.
  for (int j = 0; j < 5; ++j) {
    CHECK(es[1][j] == table.at(0, j));
    CHECK(es[2][j] == table.at(0, j));
  }
  // The char parts still differ.
  CHECK(Vec64(es[1].begin() + 5, es[1].end()) != Vec64(es[2].begin() + 5, es[2].end()));

  // Two unseen tokens with identical characters embed identically.
  auto twins = testsupport::make_sequence({"zyzzyx", "zyzzyx"}, {0, 0}).tokens;
  auto et = embed_sequence(twins, &tvocab, &table, &cvocab, &enc);
  CHECK(et[0] == et[1]);

  // Ablations: token-only 5 dims, char-only 6 dims.
  CHECK(embed_sequence(toks, &tvocab, &table, nullptr, nullptr)[0].size() == 5);
  CHECK(embed_sequence(toks, nullptr, nullptr, &cvocab, &enc)[0].size() == 6);
  CHECK_THROWS_AS(embed_sequence(toks, nullptr, nullptr, nullptr, nullptr), Error);
}

TEST_CASE("dropout: identity modes, zero fraction, expectation preservation") {
  Rng rng(10);
  Vec64 v(64);
  for (double& x : v) x = rng.uniform(-2, 2);

  CHECK(dropout(v, 0.5, false, rng) == v);  // infer mode is the exact identity
  CHECK(dropout(v, 0.0, true, rng) == v);
  CHECK_THROWS_AS(dropout(v, 1.0, true, rng), Error);
  CHECK_THROWS_AS(dropout(v, -0.1, true, rng), Error);

  // Zero fraction over 1e5 coordinates within 0.5 +- 0.01.
  Vec64 big(100000, 1.0);
  Vec64 dropped = dropout(big, 0.5, true, rng);
  size_t zeros = 0;
  for (double x : dropped) {
    if (x == 0.0)
      ++zeros;
    else
      CHECK(x == 2.0);  // survivors scale by 1/(1-p)
  }
  double frac = static_cast<double>(zeros) / big.size();
  CHECK(frac > 0.49);
  CHECK(frac < 0.51);

  // Inverted scaling preserves the expectation within 2%.
  double coord = 1.7;
  double sum = 0.0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) sum += dropout({coord}, 0.5, true, rng)[0];
  CHECK(sum / draws == doctest::Approx(coord).epsilon(0.02));
}
