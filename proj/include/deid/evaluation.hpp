#pragma once

#include <string>
#include <vector>

#include "deid/corpus.hpp"

namespace deid {

enum class EvalMode { binary_hipaa, per_type, per_category };
enum class Metric { precision, recall, f1 };

struct PrfCounts {
  long long tp = 0, fp = 0, fn = 0;

  // Zero-denominator rules: empty prediction set is perfectly precise only
  // when nothing was missed, and symmetrically for recall; F1 is 0 when
  // P + R = 0.
  double precision() const { return tp + fp == 0 ? (fn == 0 ? 1.0 : 0.0) : double(tp) / (tp + fp); }
  double recall() const { return tp + fn == 0 ? (fp == 0 ? 1.0 : 0.0) : double(tp) / (tp + fn); }
  double f1() const {
    double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
  double get(Metric m) const {
    return m == Metric::precision ? precision() : m == Metric::recall ? recall() : f1();
  }
  void add(const PrfCounts& o) { tp += o.tp; fp += o.fp; fn += o.fn; }
};

struct EvalReport {
  EvalMode mode = EvalMode::binary_hipaa;
  PrfCounts overall;
  // Per-type or per-category counts, in label-set order (PHI entries only).
  std::vector<std::pair<std::string, PrfCounts>> breakdown;
};

using Predictions = std::vector<std::vector<int>>;

// Token-based P/R/F1. binary_hipaa maps every HIPAA-masked label to PHI and
// everything else (including non-HIPAA PHI types) to non-PHI before
// counting; per_type/per_category micro-average over the typed counts.
EvalReport token_prf(const Dataset& gold, const Predictions& pred, EvalMode mode,
                     const LabelSet& label_set);

// Binary-HIPAA counts of one sequence (helper shared with the shuffler).
PrfCounts binary_hipaa_counts(const std::vector<int>& gold,
                              const std::vector<int>& pred, const LabelSet& ls);

// Two-sided approximate randomization: per shuffle, each sequence's two
// outputs swap with probability 1/2; p = (#{|delta| >= |observed|} + 1) /
// (shuffles + 1). The metric is binary-HIPAA. Deterministic in seed; the
// shuffle streams are seed-partitioned, so evaluation parallelizes without
// changing the result.
double approx_randomization(const Predictions& pred_a, const Predictions& pred_b,
                            const Dataset& gold, Metric metric, int shuffles,
                            uint64_t seed);

// Token is PHI iff either input says so; when both do, pred_a's type wins.
Predictions ensemble_union(const Predictions& pred_a, const Predictions& pred_b,
                           const LabelSet& label_set);

std::string format_report(const EvalReport& report);
std::string report_kv(const EvalReport& report);

}  // namespace deid
