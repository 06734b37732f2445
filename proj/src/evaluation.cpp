#include "deid/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace deid {

namespace {

void check_aligned(const Dataset& gold, const Predictions& pred) {
  if (pred.size() != gold.sequences.size())
    throw Error("evaluation: prediction has " + std::to_string(pred.size()) +
                " sequences, gold has " + std::to_string(gold.sequences.size()));
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i].size() != gold.sequences[i].labels.size())
      throw Error("evaluation: length mismatch in sequence " +
                  gold.sequences[i].note_id);
}

}  // namespace

PrfCounts binary_hipaa_counts(const std::vector<int>& gold,
                              const std::vector<int>& pred, const LabelSet& ls) {
  PrfCounts c;
  for (size_t t = 0; t < gold.size(); ++t) {
    bool g = ls.is_hipaa(gold[t]);
    bool p = ls.is_hipaa(pred[t]);
    if (g && p)
      ++c.tp;
    else if (!g && p)
      ++c.fp;
    else if (g && !p)
      ++c.fn;
  }
  return c;
}

EvalReport token_prf(const Dataset& gold, const Predictions& pred, EvalMode mode,
                     const LabelSet& ls) {
  check_aligned(gold, pred);
  EvalReport report;
  report.mode = mode;

  if (mode == EvalMode::binary_hipaa) {
    for (size_t i = 0; i < pred.size(); ++i)
      report.overall.add(binary_hipaa_counts(gold.sequences[i].labels, pred[i], ls));
    return report;
  }

  // Typed token counting: a confusion between two PHI groups costs one FP
  // (pred's group) and one FN (gold's group). Group "O" never counts.
  auto group_of = [&](int label) -> std::string {
    if (label == 0) return "O";
    return mode == EvalMode::per_type ? ls.labels[label] : ls.category[label];
  };
  std::map<std::string, PrfCounts> by_group;
  for (size_t i = 0; i < pred.size(); ++i) {
    const std::vector<int>& g = gold.sequences[i].labels;
    for (size_t t = 0; t < pred[i].size(); ++t) {
      std::string gg = group_of(g[t]);
      std::string pg = group_of(pred[i][t]);
      if (gg == pg) {
        if (gg != "O") ++by_group[gg].tp;
      } else {
        if (pg != "O") ++by_group[pg].fp;
        if (gg != "O") ++by_group[gg].fn;
      }
    }
  }
  // Emit in label-set order, without duplicates.
  std::vector<std::string> order;
  for (int l = 1; l < ls.size(); ++l) {
    std::string g = mode == EvalMode::per_type ? ls.labels[l] : ls.category[l];
    bool seen = false;
    for (const std::string& o : order) seen = seen || o == g;
    if (!seen) order.push_back(g);
  }
  for (const std::string& g : order) {
    PrfCounts c = by_group.count(g) ? by_group[g] : PrfCounts{};
    report.breakdown.emplace_back(g, c);
    report.overall.add(c);
  }
  return report;
}

double approx_randomization(const Predictions& pred_a, const Predictions& pred_b,
                            const Dataset& gold, Metric metric, int shuffles,
                            uint64_t seed) {
  check_aligned(gold, pred_a);
  check_aligned(gold, pred_b);
  if (shuffles <= 0) throw Error("significance: shuffle count must be positive");
  const size_t n = gold.sequences.size();

  // Per-sequence binary counts for both systems; a shuffle only reassigns
  // which side each sequence's counts land on.
  std::vector<PrfCounts> ca(n), cb(n);
  PrfCounts sum_a, sum_b;
  for (size_t i = 0; i < n; ++i) {
    ca[i] = binary_hipaa_counts(gold.sequences[i].labels, pred_a[i], gold.label_set);
    cb[i] = binary_hipaa_counts(gold.sequences[i].labels, pred_b[i], gold.label_set);
    sum_a.add(ca[i]);
    sum_b.add(cb[i]);
  }
  const double observed = std::abs(sum_a.get(metric) - sum_b.get(metric));

  Rng base(seed);
  long long hits = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : hits)
#endif
  for (int s = 0; s < shuffles; ++s) {
    Rng rng = base.fork(static_cast<uint64_t>(s));
    PrfCounts xa, xb;
    for (size_t i = 0; i < n; ++i) {
      if (rng.uniform() < 0.5) {
        xa.add(cb[i]);
        xb.add(ca[i]);
      } else {
        xa.add(ca[i]);
        xb.add(cb[i]);
      }
    }
    if (std::abs(xa.get(metric) - xb.get(metric)) >= observed) ++hits;
  }
  return static_cast<double>(hits + 1) / (shuffles + 1);
}

Predictions ensemble_union(const Predictions& pred_a, const Predictions& pred_b,
                           const LabelSet&) {
  if (pred_a.size() != pred_b.size())
    throw Error("ensemble: prediction sequence counts differ");
  Predictions out(pred_a.size());
  for (size_t i = 0; i < pred_a.size(); ++i) {
    if (pred_a[i].size() != pred_b[i].size())
      throw Error("ensemble: length mismatch in sequence " + std::to_string(i + 1));
    out[i].resize(pred_a[i].size());
    for (size_t t = 0; t < pred_a[i].size(); ++t)
      out[i][t] = pred_a[i][t] != 0 ? pred_a[i][t] : pred_b[i][t];
  }
  return out;
}

namespace {

std::string mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::binary_hipaa: return "binary-HIPAA";
    case EvalMode::per_type: return "per-type";
    default: return "per-category";
  }
}

std::string fmt(double x) {
  char buf[32];
  snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

}  // namespace

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "mode: " << mode_name(r.mode) << "\n";
  char line[160];
  snprintf(line, sizeof line, "%-12s %8s %8s %8s %10s %10s %10s\n", "", "TP", "FP",
           "FN", "P", "R", "F1");
  out << line;
  auto row = [&](const std::string& name, const PrfCounts& c) {
    snprintf(line, sizeof line, "%-12s %8lld %8lld %8lld %10.4f %10.4f %10.4f\n",
             name.c_str(), c.tp, c.fp, c.fn, c.precision(), c.recall(), c.f1());
    out << line;
  };
  for (const auto& [name, counts] : r.breakdown) row(name, counts);
  row("overall", r.overall);
  return out.str();
}

std::string report_kv(const EvalReport& r) {
  std::ostringstream out;
  out << "mode\t" << mode_name(r.mode) << "\n";
  auto block = [&](const std::string& prefix, const PrfCounts& c) {
    out << prefix << "tp\t" << c.tp << "\n"
        << prefix << "fp\t" << c.fp << "\n"
        << prefix << "fn\t" << c.fn << "\n"
        << prefix << "precision\t" << fmt(c.precision()) << "\n"
        << prefix << "recall\t" << fmt(c.recall()) << "\n"
        << prefix << "f1\t" << fmt(c.f1()) << "\n";
  };
  block("", r.overall);
  for (const auto& [name, counts] : r.breakdown) block(name + ".", counts);
  return out.str();
}

}  // namespace deid
