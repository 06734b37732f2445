#include "deid/synth.hpp"

#include <algorithm>

#include <cstdio>
#include <set>
#include <fstream>
#include <set>
#include <sstream>

#include "deid/embeddings.hpp"

namespace deid {

std::map<std::string, double> GenConfig::default_densities() {
  return {{"AGE", 0.010},     {"CONTACT", 0.010}, {"DATE", 0.025},
          {"ID", 0.015},      {"LOCATION", 0.025}, {"NAME", 0.025},
          {"PROFESSION", 0.010}};
}

void GenConfig::validate() const {
  if (notes < 1) throw Error("generate: notes must be >= 1");
  if (min_tokens < 1 || max_tokens < min_tokens)
    throw Error("generate: bad tokens-per-note range");
  static const std::set<std::string> known = {"AGE",      "CONTACT", "DATE",
                                              "ID",       "LOCATION", "NAME",
                                              "PROFESSION"};
  double total = 0.0;
  for (const auto& [cat, d] : density) {
    if (!known.count(cat)) throw Error("generate: unknown PHI category " + cat);
    if (d < 0.0 || d > 1.0) throw Error("generate: density out of [0, 1] for " + cat);
    total += d;
  }
  if (total > 0.5) throw Error("generate: densities sum to more than 0.5");
}

std::vector<std::string> load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  if (out.empty()) throw Error("empty lexicon " + path);
  return out;
}

namespace {

// Filler vocabulary; clinical-ish words the generator labels O.
const char* const kFiller[] = {
    "patient",   "denies",     "reports",   "admitted",   "discharged", "history",
    "of",        "presents",   "with",      "without",    "stable",     "daily",
    "mg",        "po",         "bid",       "prn",        "exam",       "normal",
    "chest",     "pain",       "fever",     "cough",      "chronic",    "acute",
    "left",      "right",      "bilateral", "followup",   "clinic",     "visit",
    "assessment", "plan",      "continue",  "medication", "dose",       "labs",
    "pending",   "reviewed",   "noted",     "improved",   "worsening",  "unchanged",
    "since",     "last",       "week",      "month",      "on",         "off",
    "the",       "a",          "and",       "or",         "no",         "not",
    "for",       "to",         "at",        "in",         "was",        "is",
    "seen",      "today",      "tolerating", "ambulating", "diet",      "advanced",
    "vitals",    "afebrile",   "bp",        "hr",         "rr",         "sat",
    "alert",     "oriented",   "follow",    "up",         "as",         "needed",
    "renal",     "cardiac",    "pulmonary", "neuro",      "abdomen",    "soft",
    "nontender", "extremities", "edema",    "none",       "allergies",  "nkda",
    "tobacco",   "alcohol",    "quit",      "smoking",    "sober",      "lives",
    "alone",     "married",    "children",  "grown",      "retired",    "works",
    "appetite",  "good",       "sleep",     "poor",       "anxiety",    "depression",
    "screening", "negative",   "positive",  "results",    "within",     "limits",
    "glucose",   "sodium",     "potassium", "creatinine", "hemoglobin", "platelets"};
const size_t kFillerCount = sizeof(kFiller) / sizeof(kFiller[0]);

const char* const kPunct[] = {".", ",", ":", ";"};
const char* const kTitles[] = {"Mr.", "Mrs.", "Ms."};
const char* const kStreetSuffix[] = {"St", "Ave", "Ct", "Rd", "Blvd", "Ln"};
const char* const kHospitalSuffix[] = {"General Hospital", "Memorial Hospital",
                                       "Medical Center", "Clinic"};
const char* const kDomains[] = {"example.org", "mailhub.com", "clinicmail.net"};

struct Chunk {
  std::string text;
  std::string label;  // empty for filler
};

struct Lexicons {
  std::vector<std::string> first_names, surnames, cities, states, professions;
};

std::vector<std::string> pool_slice(const std::vector<std::string>& full,
                                    GenConfig::NamePool pool, const std::string& what) {
  if (pool == GenConfig::NamePool::all) return full;
  size_t half = full.size() / 2;
  if (half == 0) throw Error("lexicon too small to split into pools: " + what);
  if (pool == GenConfig::NamePool::first_half)
    return {full.begin(), full.begin() + half};
  return {full.begin() + half, full.end()};
}

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[rng.below(v.size())];
}

std::string digits(Rng& rng, int count, bool no_leading_zero = false) {
  std::string s;
  for (int i = 0; i < count; ++i) {
    int lo = (i == 0 && no_leading_zero) ? 1 : 0;
    s += static_cast<char>('0' + rng.range_int(lo, 9));
  }
  return s;
}

std::string two(int v) {
  char buf[8];
  snprintf(buf, sizeof buf, "%02d", v);
  return buf;
}

std::vector<Chunk> make_instance(const std::string& category, const Lexicons& lex,
                                 Rng& rng) {
  std::vector<Chunk> out;
  if (category == "AGE") {
    out.push_back({std::to_string(90 + rng.range_int(0, 9)), "AGE"});
  } else if (category == "CONTACT") {
    if (rng.uniform() < 0.5) {
      out.push_back({std::to_string(rng.range_int(200, 999)) + "-" + digits(rng, 3) +
                         "-" + digits(rng, 4),
                     "PHONE"});
    } else {
      out.push_back({lowercase_ascii(pick(lex.first_names, rng)) + "." +
                         lowercase_ascii(pick(lex.surnames, rng)) + "@" +
                         kDomains[rng.below(3)],
                     "EMAIL"});
    }
  } else if (category == "DATE") {
    double r = rng.uniform();
    std::string md = two(rng.range_int(1, 12)) + "/" + two(rng.range_int(1, 28));
    if (r < 0.60)
      out.push_back({md + "/" + std::to_string(2060 + rng.range_int(0, 39)), "DATE"});
    else if (r < 0.85)
      out.push_back({md, "DATE"});
    else
      out.push_back({std::to_string(2060 + rng.range_int(0, 39)), "YEAR"});
  } else if (category == "ID") {
    if (rng.uniform() < 0.5)
      out.push_back({digits(rng, 3, true) + "-" + digits(rng, 2) + "-" + digits(rng, 4),
                     "SSN"});
    else
      out.push_back({digits(rng, 7, true), "MRN"});
  } else if (category == "LOCATION") {
    double r = rng.uniform();
    if (r < 0.25)
      out.push_back({std::to_string(rng.range_int(1, 999)) + " " +
                         pick(lex.surnames, rng) + " " + kStreetSuffix[rng.below(6)],
                     "STREET"});
    else if (r < 0.45)
      out.push_back({pick(lex.cities, rng), "CITY"});
    else if (r < 0.60)
      out.push_back({pick(lex.states, rng), "STATE"});
    else if (r < 0.75)
      out.push_back({std::to_string(10000 + rng.range_int(0, 89999)), "ZIP"});
    else
      out.push_back({pick(lex.surnames, rng) + " " + kHospitalSuffix[rng.below(4)],
                     "HOSPITAL"});
  } else if (category == "NAME") {
    if (rng.uniform() < 0.7) {
      if (rng.uniform() < 0.4) out.push_back({kTitles[rng.below(3)], ""});
      if (rng.uniform() < 0.3)
        out.push_back({pick(lex.surnames, rng), "PATIENT"});
      else
        out.push_back({pick(lex.first_names, rng) + " " + pick(lex.surnames, rng),
                       "PATIENT"});
    } else {
      out.push_back({"Dr.", ""});
      out.push_back({pick(lex.first_names, rng) + " " + pick(lex.surnames, rng),
                     "DOCTOR"});
    }
  } else if (category == "PROFESSION") {
    out.push_back({pick(lex.professions, rng), "PROFESSION"});
  } else {
    throw Error("generate: unknown PHI category " + category);
  }
  return out;
}

Chunk make_filler(Rng& rng) {
  double r = rng.uniform();
  if (r < 0.08) return {kPunct[rng.below(4)], ""};
  if (r < 0.13) return {std::to_string(rng.range_int(1, 399)), ""};  // lab-ish value
  return {kFiller[rng.below(kFillerCount)], ""};
}

}  // namespace

Dataset generate(const GenConfig& config, const LabelSet& label_set) {
  config.validate();
  label_set.validate();
  for (const auto& [cat, d] : config.density) {
    if (d <= 0.0) continue;
    bool covered = false;
    for (int l = 1; l < label_set.size(); ++l)
      covered = covered || label_set.category[l] == cat;
    if (!covered)
      throw Error("generate: label set has no type for category " + cat);
  }

  Lexicons lex;
  lex.first_names = pool_slice(load_lexicon(config.first_names_path), config.name_pool,
                               config.first_names_path);
  lex.surnames = pool_slice(load_lexicon(config.surnames_path), config.name_pool,
                            config.surnames_path);
  lex.cities = load_lexicon(config.cities_path);
  lex.states = load_lexicon(config.states_path);
  lex.professions = load_lexicon(config.professions_path);

  // Fixed category order for the cumulative draw (map iteration is sorted).
  std::vector<std::pair<std::string, double>> cats(config.density.begin(),
                                                   config.density.end());

  Dataset ds;
  ds.label_set = label_set;
  Rng base(config.seed);
  int width = std::max<int>(4, std::to_string(config.notes).size());

  for (int note = 0; note < config.notes; ++note) {
    Rng rng = base.fork(static_cast<uint64_t>(note));
    int target = rng.range_int(config.min_tokens, config.max_tokens);

    std::vector<Chunk> chunks;
    int tokens = 0;
    while (tokens < target) {
      double r = rng.uniform();
      double cum = 0.0;
      std::string chosen;
      for (const auto& [cat, d] : cats) {
        cum += d;
        if (r < cum) {
          chosen = cat;
          break;
        }
      }
      std::vector<Chunk> emitted =
          chosen.empty() ? std::vector<Chunk>{make_filler(rng)}
                         : make_instance(chosen, lex, rng);
      for (Chunk& c : emitted) {
        tokens += static_cast<int>(tokenize(c.text).size());
        chunks.push_back(std::move(c));
      }
    }

    std::string text;
    std::vector<Span> spans;
    for (const Chunk& c : chunks) {
      if (!text.empty()) text += ' ';
      size_t start = text.size();
      text += c.text;
      if (!c.label.empty()) spans.push_back({start, text.size(), c.label});
    }
    std::string id = std::to_string(note + 1);
    if (static_cast<int>(id.size()) < width)
      id.insert(0, static_cast<size_t>(width) - id.size(), '0');
    ds.sequences.push_back(
        standoff_to_sequence(text, spans, label_set, config.note_prefix + "-" + id));
  }
  return ds;
}

CorpusStats corpus_stats(const Dataset& ds) {
  if (ds.sequences.empty()) throw Error("stats: empty dataset");
  CorpusStats s;
  s.notes = static_cast<long long>(ds.sequences.size());
  std::set<std::string> vocab;
  for (const LabeledSequence& seq : ds.sequences) {
    s.tokens += static_cast<long long>(seq.tokens.size());
    int prev = 0;
    for (size_t t = 0; t < seq.tokens.size(); ++t) {
      vocab.insert(lowercase_ascii(seq.tokens[t].text));
      int l = seq.labels[t];
      if (l != 0) {
        ++s.phi_tokens;
        if (l != prev) ++s.phi_instances;
      }
      prev = l;
    }
  }
  s.vocabulary = static_cast<long long>(vocab.size());
  return s;
}

std::string stats_kv(const CorpusStats& stats) {
  std::ostringstream out;
  out << "notes\t" << stats.notes << '\n'
      << "tokens\t" << stats.tokens << '\n'
      << "phi_instances\t" << stats.phi_instances << '\n'
      << "phi_tokens\t" << stats.phi_tokens << '\n'
      << "vocabulary\t" << stats.vocabulary << '\n';
  return out.str();
}

}  // namespace deid
