#include "deid/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace deid {

int LabelSet::index_of(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (labels[i] == name) return i;
  return -1;
}

void LabelSet::add(const std::string& name, const std::string& cat, bool is_hipaa_type) {
  labels.push_back(name);
  category.push_back(cat);
  hipaa.push_back(is_hipaa_type);
}

void LabelSet::validate() const {
  if (labels.empty() || labels[0] != "O")
    throw Error("label set: first label must be the non-PHI label O");
  std::set<std::string> seen;
  for (int i = 0; i < size(); ++i) {
    if (!seen.insert(labels[i]).second)
      throw Error("label set: duplicate label " + labels[i]);
    if (labels[i] == "O" && i != 0)
      throw Error("label set: O must appear exactly once, first");
    if (hipaa[i] && category[i] == "O")
      throw Error("label set: HIPAA label " + labels[i] + " needs a PHI category");
  }
  if (hipaa[0]) throw Error("label set: O cannot be a HIPAA type");
}

LabelSet default_label_set() {
  LabelSet ls;
  ls.add("O", "O", false);
  ls.add("AGE", "AGE", true);  // ages >= 90
  ls.add("PHONE", "CONTACT", true);
  ls.add("EMAIL", "CONTACT", true);
  ls.add("DATE", "DATE", true);  // month/day parts
  ls.add("YEAR", "DATE", false);
  ls.add("SSN", "ID", true);
  ls.add("MRN", "ID", true);
  ls.add("STREET", "LOCATION", true);
  ls.add("CITY", "LOCATION", true);
  ls.add("STATE", "LOCATION", false);
  ls.add("ZIP", "LOCATION", true);
  ls.add("HOSPITAL", "LOCATION", false);
  ls.add("PATIENT", "NAME", true);
  ls.add("DOCTOR", "NAME", false);
  ls.add("PROFESSION", "PROFESSION", false);
  ls.validate();
  return ls;
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
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

LabelSet load_label_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open label file " + path);
  LabelSet ls;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = split_tabs(line);
    if (f.size() != 3)
      throw Error(path + ":" + std::to_string(lineno) +
                  ": expected label<TAB>category<TAB>hipaa");
    if (f[2] != "0" && f[2] != "1")
      throw Error(path + ":" + std::to_string(lineno) + ": hipaa flag must be 0 or 1");
    ls.add(f[0], f[1], f[2] == "1");
  }
  ls.validate();
  return ls;
}

void save_label_set(const LabelSet& ls, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write label file " + path);
  for (int i = 0; i < ls.size(); ++i)
    out << ls.labels[i] << '\t' << ls.category[i] << '\t' << (ls.hipaa[i] ? 1 : 0) << '\n';
}

namespace {

enum class ByteClass { space, letter, digit, punct };

ByteClass classify(unsigned char b) {
  if (b == ' ' || b == '\t' || b == '\n' || b == '\r' || b == '\v' || b == '\f')
    return ByteClass::space;
  if (b >= '0' && b <= '9') return ByteClass::digit;
  if ((b >= 'A' && b <= 'Z') || (b >= 'a' && b <= 'z') || b >= 0x80)
    return ByteClass::letter;
  return ByteClass::punct;
}

}  // namespace

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    ByteClass c = classify(static_cast<unsigned char>(text[i]));
    if (c == ByteClass::space) {
      ++i;
      continue;
    }
    if (c == ByteClass::punct) {
      out.push_back({text.substr(i, 1), i, i + 1});
      ++i;
      continue;
    }
    size_t j = i + 1;
    while (j < n && classify(static_cast<unsigned char>(text[j])) == c) ++j;
    out.push_back({text.substr(i, j - i), i, j});
    i = j;
  }
  return out;
}

LabeledSequence standoff_to_sequence(const std::string& text,
                                     std::vector<Span> spans,
                                     const LabelSet& label_set,
                                     const std::string& note_id) {
  std::stable_sort(spans.begin(), spans.end(),
                   [](const Span& a, const Span& b) { return a.start < b.start; });
  for (size_t i = 0; i < spans.size(); ++i) {
    const Span& s = spans[i];
    if (s.start >= s.end || s.end > text.size())
      throw Error("span (" + std::to_string(s.start) + "," + std::to_string(s.end) +
                  ") out of bounds");
    if (label_set.index_of(s.label) < 0) throw Error("unknown label " + s.label);
    if (i > 0 && spans[i - 1].end > s.start)
      throw Error("span conflict: (" + std::to_string(spans[i - 1].start) + "," +
                  std::to_string(spans[i - 1].end) + ") overlaps (" +
                  std::to_string(s.start) + "," + std::to_string(s.end) + ")");
  }

  LabeledSequence seq;
  seq.note_id = note_id;
  seq.tokens = tokenize(text);
  seq.labels.assign(seq.tokens.size(), 0);
  size_t si = 0;
  for (size_t t = 0; t < seq.tokens.size(); ++t) {
    const Token& tok = seq.tokens[t];
    while (si < spans.size() && spans[si].end <= tok.start) ++si;
    if (si < spans.size() && spans[si].start < tok.end && spans[si].end > tok.start)
      seq.labels[t] = label_set.index_of(spans[si].label);
  }
  return seq;
}

std::vector<Span> read_standoff_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open annotation file " + path);
  std::vector<Span> spans;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = split_tabs(line);
    if (f.size() != 3)
      throw Error(path + ":" + std::to_string(lineno) +
                  ": expected start<TAB>end<TAB>label");
    try {
      spans.push_back({std::stoull(f[0]), std::stoull(f[1]), f[2]});
    } catch (const std::exception&) {
      throw Error(path + ":" + std::to_string(lineno) + ": bad offset");
    }
  }
  return spans;
}

Dataset read_token_stream(std::istream& in, const LabelSet& label_set,
                          const std::string& origin) {
  Dataset ds;
  ds.label_set = label_set;
  LabeledSequence cur;
  std::string pending_id;
  size_t cursor = 0;  // byte offset within the reconstructed note text

  auto flush = [&]() {
    if (cur.tokens.empty()) {
      pending_id.clear();
      return;
    }
    if (cur.note_id.empty())
      cur.note_id = std::to_string(ds.sequences.size() + 1);
    ds.sequences.push_back(std::move(cur));
    cur = LabeledSequence();
    cursor = 0;
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      auto f = split_tabs(line);
      if (f.size() == 2 && f[0] == "#id") {
        cur.note_id = f[1];
      }
      continue;
    }
    auto f = split_tabs(line);
    if (f.size() != 2 || f[0].empty() || f[1].empty())
      throw Error(origin + ":" + std::to_string(lineno) +
                  ": expected token<TAB>label");
    int label = label_set.index_of(f[1]);
    if (label < 0)
      throw Error(origin + ":" + std::to_string(lineno) + ": unknown label " + f[1]);
    // Offsets are reconstructed as if tokens were joined by single spaces.
    if (!cur.tokens.empty()) ++cursor;
    cur.tokens.push_back({f[0], cursor, cursor + f[0].size()});
    cursor += f[0].size();
    cur.labels.push_back(label);
  }
  flush();
  return ds;
}

Dataset read_token_file(const std::string& path, const LabelSet& label_set) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open token file " + path);
  return read_token_stream(in, label_set, path);
}

void write_token_stream(const Dataset& ds, std::ostream& out) {
  for (const LabeledSequence& seq : ds.sequences) {
    out << "#id\t" << seq.note_id << '\n';
    for (size_t i = 0; i < seq.tokens.size(); ++i)
      out << seq.tokens[i].text << '\t' << ds.label_set.labels[seq.labels[i]] << '\n';
    out << '\n';
  }
}

void write_token_file(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write token file " + path);
  write_token_stream(ds, out);
}

void split_dataset(const Dataset& ds, double train_frac, double dev_frac,
                   double test_frac, uint64_t seed, Dataset* train,
                   Dataset* dev, Dataset* test) {
  if (train_frac <= 0 || dev_frac <= 0 || test_frac <= 0)
    throw Error("split: fractions must be positive");
  if (std::abs(train_frac + dev_frac + test_frac - 1.0) > 1e-9)
    throw Error("split: fractions must sum to 1");
  const size_t n = ds.sequences.size();
  if (n < 3) throw Error("split: fewer sequences than parts");

  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);

  auto cut = [&](double f) {
    return static_cast<size_t>(std::llround(static_cast<double>(n) * f));
  };
  size_t c1 = cut(train_frac);
  size_t c2 = cut(train_frac + dev_frac);
  if (c1 == 0 || c2 <= c1 || c2 >= n)
    throw Error("split: a part would be empty at these fractions");

  auto fill = [&](Dataset* out, size_t lo, size_t hi) {
    out->label_set = ds.label_set;
    out->sequences.clear();
    std::vector<size_t> part(idx.begin() + lo, idx.begin() + hi);
    std::sort(part.begin(), part.end());
    for (size_t i : part) out->sequences.push_back(ds.sequences[i]);
  };
  fill(train, 0, c1);
  fill(dev, c1, c2);
  fill(test, c2, n);
}

}  // namespace deid
