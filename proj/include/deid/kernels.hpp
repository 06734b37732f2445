#pragma once

#include "deid/numerics.hpp"

namespace deid::kernels {

// Runtime switch for the OpenMP paths. Both paths compute every output
// element with identical arithmetic (one serial dot product per element), so
// results are bit-identical regardless of the switch or thread count.
void set_parallel(bool on);
bool parallel_enabled();

// y = W x (+ bias). bias may be null.
void matvec(const Mat64& w, const double* x, const double* bias, double* y);
void matvec_serial(const Mat64& w, const double* x, const double* bias, double* y);

// y += W^T g over a column block [col0, col0 + len). y has length len.
void matvec_t_acc(const Mat64& w, const double* g, int col0, int len, double* y);
void matvec_t_acc_serial(const Mat64& w, const double* g, int col0, int len, double* y);

// W += g x^T (outer-product accumulate; g has w.rows entries, x has w.cols).
void outer_acc(Mat64& w, const double* g, const double* x);
void outer_acc_serial(Mat64& w, const double* g, const double* x);

inline Vec64 matvec(const Mat64& w, const Vec64& x, const Vec64& bias) {
  Vec64 y(w.rows);
  matvec(w, x.data(), bias.empty() ? nullptr : bias.data(), y.data());
  return y;
}

}  // namespace deid::kernels
