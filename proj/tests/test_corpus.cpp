#include <doctest.h>

#include <set>
#include <sstream>

#include "deid/corpus.hpp"
#include "support/oracles.hpp"

using namespace deid;

TEST_CASE("tokenize splits whitespace, punctuation, and letter/digit boundaries") {
  CHECK(tokenize("").empty());

  auto toks = tokenize("Mr. Parkinson");
  REQUIRE(toks.size() == 3);
  CHECK(toks[0].text == "Mr");
  CHECK(toks[0].start == 0);
  CHECK(toks[0].end == 2);
  CHECK(toks[1].text == ".");
  CHECK(toks[1].start == 2);
  CHECK(toks[1].end == 3);
  CHECK(toks[2].text == "Parkinson");
  CHECK(toks[2].start == 4);
  CHECK(toks[2].end == 13);

  std::vector<std::string> expect{"Results", "02", "/", "20", "/", "2087"};
  auto t2 = tokenize("Results02/20/2087");
  REQUIRE(t2.size() == expect.size());
  for (size_t i = 0; i < expect.size(); ++i) CHECK(t2[i].text == expect[i]);

  auto t3 = tokenize("53RHM");
  REQUIRE(t3.size() == 2);
  CHECK(t3[0].text == "53");
  CHECK(t3[1].text == "RHM");
}

TEST_CASE("tokenize offset fidelity and idempotence") {
  std::vector<std::string> samples{
      "He was admitted on 02/20/2087 at Rafael Hospital.",
      "  spaced\tout\ntext  ",
      "MC # 0937884Date: 10/07/69",
      "caf\xC3\xA9 au lait, r\xC3\xA9sum\xC3\xA9!",  // multi-byte letters stay glued
      "a-b_c+d=e"};
  for (const std::string& text : samples) {
    auto toks = tokenize(text);
    for (const Token& t : toks) {
      REQUIRE(t.start < t.end);
      CHECK(text.substr(t.start, t.end - t.start) == t.text);
    }
    for (size_t i = 1; i < toks.size(); ++i) CHECK(toks[i - 1].end <= toks[i].start);

    // Re-tokenizing the space-joined token texts reproduces the texts.
    std::string joined;
    for (const Token& t : toks) {
      if (!joined.empty()) joined += ' ';
      joined += t.text;
    }
    auto again = tokenize(joined);
    REQUIRE(again.size() == toks.size());
    for (size_t i = 0; i < toks.size(); ++i) CHECK(again[i].text == toks[i].text);
  }
}

TEST_CASE("standoff_to_sequence labels by span intersection") {
  LabelSet ls = default_label_set();
  int name = ls.index_of("PATIENT");

  auto seq = standoff_to_sequence("a b", {}, ls);
  CHECK(seq.labels == std::vector<int>{0, 0});

  auto seq2 = standoff_to_sequence("Mr. Parkinson", {{4, 13, "PATIENT"}}, ls);
  CHECK(seq2.labels == std::vector<int>{0, 0, name});

  // Partial overlap still labels the whole token.
  auto seq3 = standoff_to_sequence("Mr. Parkinson", {{4, 9, "PATIENT"}}, ls);
  CHECK(seq3.labels == std::vector<int>{0, 0, name});

  // A token intersecting two spans takes the span that starts first.
  auto seq4 = standoff_to_sequence(
      "abcd", {{0, 2, "PATIENT"}, {2, 4, "DOCTOR"}}, ls);
  CHECK(seq4.labels == std::vector<int>{name});

  CHECK_THROWS_AS(standoff_to_sequence("abcdef", {{0, 4, "PATIENT"}, {2, 6, "DOCTOR"}}, ls),
                  Error);
  CHECK_THROWS_AS(standoff_to_sequence("ab", {{0, 1, "NOT_A_LABEL"}}, ls), Error);
  CHECK_THROWS_AS(standoff_to_sequence("ab", {{0, 9, "PATIENT"}}, ls), Error);

  // Tokens disjoint from all spans never get a PHI label.
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    std::string text = "alpha beta 123 gamma delta 456 epsilon";
    size_t start = rng.below(10), len = 1 + rng.below(8);
    std::vector<Span> spans{{start, start + len, "PATIENT"}};
    auto s = standoff_to_sequence(text, spans, ls);
    for (size_t t = 0; t < s.tokens.size(); ++t) {
      bool intersects = s.tokens[t].start < start + len && s.tokens[t].end > start;
      if (!intersects) CHECK(s.labels[t] == 0);
    }
  }
}

TEST_CASE("token file round trips and errors") {
  LabelSet ls = default_label_set();

  std::istringstream one("John\tPATIENT\n\n");
  Dataset d = read_token_stream(one, ls, "test");
  REQUIRE(d.sequences.size() == 1);
  REQUIRE(d.sequences[0].tokens.size() == 1);
  CHECK(d.sequences[0].tokens[0].text == "John");
  CHECK(d.sequences[0].labels[0] == ls.index_of("PATIENT"));

  Dataset ds;
  ds.label_set = ls;
  ds.sequences.push_back(testsupport::make_sequence(
      {"Mr", ".", "Parkinson", "seen", "02", "/", "20"},
      {0, 0, ls.index_of("PATIENT"), 0, ls.index_of("DATE"), ls.index_of("DATE"),
       ls.index_of("DATE")},
      "note-1"));
  ds.sequences.push_back(testsupport::make_sequence({"stable"}, {0}, "note-2"));

  std::ostringstream out;
  write_token_stream(ds, out);
  std::istringstream in(out.str());
  Dataset back = read_token_stream(in, ls, "test");
  REQUIRE(back.sequences.size() == 2);
  CHECK(back.sequences[0].note_id == "note-1");
  CHECK(back.sequences[0].labels == ds.sequences[0].labels);
  CHECK(back.sequences[1].tokens[0].text == "stable");

  std::ostringstream out2;
  write_token_stream(back, out2);
  CHECK(out2.str() == out.str());  // write-read-write is byte stable

  std::istringstream bad("a b c\n");
  try {
    read_token_stream(bad, ls, "bad.tok");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bad.tok:1") != std::string::npos);
  }

  std::istringstream unknown("x\tNOPE\n");
  try {
    read_token_stream(unknown, ls, "u.tok");
    FAIL("expected unknown label error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("NOPE") != std::string::npos);
  }
}

TEST_CASE("split_dataset is seeded, sized, disjoint, exhaustive") {
  LabelSet ls = default_label_set();
  auto make = [&](int n) {
    Dataset ds;
    ds.label_set = ls;
    for (int i = 0; i < n; ++i)
      ds.sequences.push_back(
          testsupport::make_sequence({"tok" + std::to_string(i)}, {0},
                                     "s" + std::to_string(i)));
    return ds;
  };

  Dataset ten = make(10);
  Dataset tr, dv, te;
  split_dataset(ten, 0.8, 0.1, 0.1, 7, &tr, &dv, &te);
  CHECK(tr.sequences.size() == 8);
  CHECK(dv.sequences.size() == 1);
  CHECK(te.sequences.size() == 1);

  Dataset tr2, dv2, te2;
  split_dataset(ten, 0.8, 0.1, 0.1, 7, &tr2, &dv2, &te2);
  CHECK(tr2.sequences.size() == tr.sequences.size());
  for (size_t i = 0; i < tr.sequences.size(); ++i)
    CHECK(tr2.sequences[i].note_id == tr.sequences[i].note_id);

  Dataset hundred = make(100);
  split_dataset(hundred, 0.4, 0.4, 0.2, 3, &tr, &dv, &te);
  CHECK(tr.sequences.size() == 40);
  CHECK(dv.sequences.size() == 40);
  CHECK(te.sequences.size() == 20);

  std::set<std::string> seen;
  for (const Dataset* part : {&tr, &dv, &te})
    for (const auto& s : part->sequences) CHECK(seen.insert(s.note_id).second);
  CHECK(seen.size() == 100);

  Dataset two = make(2);
  CHECK_THROWS_AS(split_dataset(two, 0.8, 0.1, 0.1, 1, &tr, &dv, &te), Error);
  CHECK_THROWS_AS(split_dataset(ten, 0.5, 0.5, 0.5, 1, &tr, &dv, &te), Error);
}

TEST_CASE("label set validation") {
  LabelSet ls = default_label_set();
  CHECK(ls.labels[0] == "O");
  CHECK(ls.index_of("PATIENT") > 0);
  CHECK(ls.index_of("missing") == -1);
  CHECK_FALSE(ls.is_hipaa(ls.index_of("YEAR")));
  CHECK(ls.is_hipaa(ls.index_of("DATE")));

  LabelSet bad;
  bad.add("X", "NAME", true);
  CHECK_THROWS_AS(bad.validate(), Error);

  LabelSet dup;
  dup.add("O", "O", false);
  dup.add("A", "NAME", true);
  dup.add("A", "NAME", true);
  CHECK_THROWS_AS(dup.validate(), Error);
}
