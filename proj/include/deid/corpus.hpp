#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "deid/numerics.hpp"

namespace deid {

struct Token {
  std::string text;
  size_t start = 0;  // byte offset into the source note
  size_t end = 0;    // exclusive
};

// Ordered label inventory. labels[0] is always the non-PHI label "O"; every
// other label carries a Table-1 category and a HIPAA flag.
struct LabelSet {
  std::vector<std::string> labels;
  std::vector<bool> hipaa;
  std::vector<std::string> category;

  int size() const { return static_cast<int>(labels.size()); }
  int index_of(const std::string& name) const;
  bool is_phi(int label) const { return label != 0; }
  bool is_hipaa(int label) const { return hipaa[label]; }
  void add(const std::string& name, const std::string& cat, bool is_hipaa_type);
  void validate() const;
};

LabelSet default_label_set();
LabelSet load_label_set(const std::string& path);
void save_label_set(const LabelSet& ls, const std::string& path);

struct LabeledSequence {
  std::string note_id;
  std::vector<Token> tokens;
  std::vector<int> labels;
};

struct Dataset {
  LabelSet label_set;
  std::vector<LabeledSequence> sequences;
};

// Splits on whitespace, then each punctuation byte becomes its own token,
// then letter<->digit boundaries split. Bytes >= 0x80 count as letters, so
// multi-byte UTF-8 stays glued to its word. Offsets are byte offsets.
std::vector<Token> tokenize(const std::string& text);

struct Span {
  size_t start = 0;
  size_t end = 0;
  std::string label;
};

// A token gets a span's label iff [token.start, token.end) intersects it; a
// token touching two spans takes the one that starts first. Overlapping
// spans and unknown labels are rejected.
LabeledSequence standoff_to_sequence(const std::string& text,
                                     std::vector<Span> spans,
                                     const LabelSet& label_set,
                                     const std::string& note_id = "");

// Stand-off annotation file: lines "start<TAB>end<TAB>label".
std::vector<Span> read_standoff_file(const std::string& path);

// Token file: "token<TAB>label" lines, blank line terminates a sequence, '#'
// at column 0 is a comment. The writer emits a "#id<TAB><note_id>" comment
// per sequence which the reader recognizes, so write/read round-trips are
// exact.
Dataset read_token_stream(std::istream& in, const LabelSet& label_set,
                          const std::string& origin);
Dataset read_token_file(const std::string& path, const LabelSet& label_set);
void write_token_stream(const Dataset& ds, std::ostream& out);
void write_token_file(const Dataset& ds, const std::string& path);

// Sequence-level partition; deterministic in seed, sizes within +-1 of the
// exact fractions. Fractions must be positive and sum to 1.
void split_dataset(const Dataset& ds, double train_frac, double dev_frac,
                   double test_frac, uint64_t seed, Dataset* train,
                   Dataset* dev, Dataset* test);

}  // namespace deid
