#include "deid/chain_crf.hpp"

#include <cmath>

namespace deid {

namespace {

int check_instance(const EmissionSeq& emissions, const Mat64& transitions) {
  if (emissions.empty()) throw Error("chain: empty emission sequence");
  int k = static_cast<int>(emissions[0].size());
  if (k == 0) throw Error("chain: empty emission vector");
  for (const Vec64& e : emissions)
    if (static_cast<int>(e.size()) != k)
      throw Error("chain: ragged emission sequence");
  if (transitions.rows != k || transitions.cols != k)
    throw Error("chain: transition matrix must be k x k");
  return k;
}

}  // namespace

double sequence_score(const EmissionSeq& emissions, const Mat64& transitions,
                      const std::vector<int>& y) {
  int k = check_instance(emissions, transitions);
  if (y.size() != emissions.size()) throw Error("chain: label/emission length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= k) throw Error("chain: label index out of range");
    s += emissions[i][y[i]];
    if (i > 0) s += transitions.at(y[i - 1], y[i]);
  }
  return s;
}

double log_partition(const EmissionSeq& emissions, const Mat64& transitions) {
  int k = check_instance(emissions, transitions);
  const size_t n = emissions.size();
  Vec64 alpha = emissions[0];
  Vec64 next(k), scratch(k);
  for (size_t t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      for (int p = 0; p < k; ++p) scratch[p] = alpha[p] + transitions.at(p, j);
      next[j] = emissions[t][j] + logsumexp(scratch);
    }
    alpha = next;
  }
  return logsumexp(alpha);
}

ChainMarginals posterior_marginals(const EmissionSeq& emissions,
                                   const Mat64& transitions) {
  int k = check_instance(emissions, transitions);
  const size_t n = emissions.size();

  // Forward and backward tables in log space.
  std::vector<Vec64> alpha(n, Vec64(k)), beta(n, Vec64(k, 0.0));
  alpha[0] = emissions[0];
  Vec64 scratch(k);
  for (size_t t = 1; t < n; ++t)
    for (int j = 0; j < k; ++j) {
      for (int p = 0; p < k; ++p) scratch[p] = alpha[t - 1][p] + transitions.at(p, j);
      alpha[t][j] = emissions[t][j] + logsumexp(scratch);
    }
  for (size_t t = n - 1; t-- > 0;)
    for (int p = 0; p < k; ++p) {
      for (int j = 0; j < k; ++j)
        scratch[j] = transitions.at(p, j) + emissions[t + 1][j] + beta[t + 1][j];
      beta[t][p] = logsumexp(scratch);
    }

  ChainMarginals m;
  m.log_z = logsumexp(alpha[n - 1]);
  m.unary.assign(n, Vec64(k));
  for (size_t t = 0; t < n; ++t)
    for (int j = 0; j < k; ++j)
      m.unary[t][j] = std::exp(alpha[t][j] + beta[t][j] - m.log_z);
  m.pairwise.assign(n > 1 ? n - 1 : 0, Mat64(k, k));
  for (size_t t = 0; t + 1 < n; ++t)
    for (int p = 0; p < k; ++p)
      for (int j = 0; j < k; ++j)
        m.pairwise[t].at(p, j) = std::exp(alpha[t][p] + transitions.at(p, j) +
                                          emissions[t + 1][j] + beta[t + 1][j] -
                                          m.log_z);
  return m;
}

ViterbiResult viterbi(const EmissionSeq& emissions, const Mat64& transitions) {
  int k = check_instance(emissions, transitions);
  const size_t n = emissions.size();
  std::vector<Vec64> best(n, Vec64(k));
  std::vector<std::vector<int>> from(n, std::vector<int>(k, -1));
  best[0] = emissions[0];
  for (size_t t = 1; t < n; ++t)
    for (int j = 0; j < k; ++j) {
      int arg = 0;
      double top = best[t - 1][0] + transitions.at(0, j);
      for (int p = 1; p < k; ++p) {
        double s = best[t - 1][p] + transitions.at(p, j);
        if (s > top) {
          top = s;
          arg = p;
        }
      }
      best[t][j] = top + emissions[t][j];
      from[t][j] = arg;
    }

  ViterbiResult r;
  r.path.assign(n, 0);
  int cur = argmax_lowest(best[n - 1]);
  r.score = best[n - 1][cur];
  for (size_t t = n; t-- > 0;) {
    r.path[t] = cur;
    if (t > 0) cur = from[t][cur];
  }
  return r;
}

namespace {

void check_enumerable(size_t n, int k) {
  double paths = std::pow(static_cast<double>(k), static_cast<double>(n));
  if (paths > 1e6)
    throw Error("brute force: k^n exceeds 1e6, instance refused");
}

// Enumerates label sequences in lexicographic order (position 0 most
// significant), calling fn(y) for each.
template <class F>
void enumerate(size_t n, int k, F&& fn) {
  std::vector<int> y(n, 0);
  while (true) {
    fn(y);
    size_t pos = n;
    while (pos > 0 && ++y[pos - 1] == k) {
      y[pos - 1] = 0;
      --pos;
    }
    if (pos == 0) return;
  }
}

}  // namespace

ViterbiResult brute_force_best(const EmissionSeq& emissions, const Mat64& transitions) {
  int k = check_instance(emissions, transitions);
  check_enumerable(emissions.size(), k);
  ViterbiResult r;
  bool first = true;
  enumerate(emissions.size(), k, [&](const std::vector<int>& y) {
    double s = sequence_score(emissions, transitions, y);
    if (first || s > r.score) {
      first = false;
      r.score = s;
      r.path = y;
    }
  });
  return r;
}

double brute_force_log_z(const EmissionSeq& emissions, const Mat64& transitions) {
  int k = check_instance(emissions, transitions);
  check_enumerable(emissions.size(), k);
  Vec64 scores;
  enumerate(emissions.size(), k, [&](const std::vector<int>& y) {
    scores.push_back(sequence_score(emissions, transitions, y));
  });
  return logsumexp(scores);
}

}  // namespace deid
