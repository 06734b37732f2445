#pragma once

#include <vector>

#include "deid/numerics.hpp"

namespace deid {

// Emission sequence: one score vector per token, all of length k. The
// transition matrix is k x k; entry (i, j) scores label i followed by label
// j. Entries are unconstrained reals: the sequence-level softmax normalizes
// globally, so no row normalization is applied. No START/STOP transitions:
// the score sums transitions for positions 2..n only.
using EmissionSeq = std::vector<Vec64>;

// s(y) = sum_i a_i[y_i] + sum_{i>=2} T[y_{i-1}, y_i].
double sequence_score(const EmissionSeq& emissions, const Mat64& transitions,
                      const std::vector<int>& y);

// log sum over all k^n label sequences of exp(s(y)), via the forward
// recursion in log space.
double log_partition(const EmissionSeq& emissions, const Mat64& transitions);

struct ChainMarginals {
  std::vector<Vec64> unary;     // unary[t][j]    = P(y_t = j)
  std::vector<Mat64> pairwise;  // pairwise[t](k,j) = P(y_t = k, y_{t+1} = j), t in [0, n-1)
  double log_z = 0.0;
};

ChainMarginals posterior_marginals(const EmissionSeq& emissions,
                                   const Mat64& transitions);

struct ViterbiResult {
  std::vector<int> path;
  double score = 0.0;
};

// Maximum-score sequence; ties break toward the lower label index at each
// backtracking step.
ViterbiResult viterbi(const EmissionSeq& emissions, const Mat64& transitions);

// Exhaustive-enumeration oracles. Refuse instances with k^n > 1e6.
ViterbiResult brute_force_best(const EmissionSeq& emissions, const Mat64& transitions);
double brute_force_log_z(const EmissionSeq& emissions, const Mat64& transitions);

}  // namespace deid
