#include "deid/kernels.hpp"

#include <atomic>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deid::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Below this element count the fork/join overhead dwarfs the work.
constexpr size_t kParallelThreshold = size_t{1} << 17;

bool go_parallel(size_t elements) {
#ifdef _OPENMP
  return g_parallel.load(std::memory_order_relaxed) &&
         elements >= kParallelThreshold && !omp_in_parallel();
#else
  (void)elements;
  return false;
#endif
}

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

void matvec_serial(const Mat64& w, const double* x, const double* bias, double* y) {
  for (int i = 0; i < w.rows; ++i)
    y[i] = (bias ? bias[i] : 0.0) + dot(w.row(i), x, w.cols);
}

void matvec(const Mat64& w, const double* x, const double* bias, double* y) {
  if (!go_parallel(w.size())) {
    matvec_serial(w, x, bias, y);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int i = 0; i < w.rows; ++i)
    y[i] = (bias ? bias[i] : 0.0) + dot(w.row(i), x, w.cols);
#endif
}

void matvec_t_acc_serial(const Mat64& w, const double* g, int col0, int len, double* y) {
  for (int j = 0; j < len; ++j) {
    double s = 0.0;
    const double* col = w.a.data() + col0 + j;
    for (int i = 0; i < w.rows; ++i) s += col[static_cast<size_t>(i) * w.cols] * g[i];
    y[j] += s;
  }
}

void matvec_t_acc(const Mat64& w, const double* g, int col0, int len, double* y) {
  if (!go_parallel(static_cast<size_t>(w.rows) * len)) {
    matvec_t_acc_serial(w, g, col0, len, y);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int j = 0; j < len; ++j) {
    double s = 0.0;
    const double* col = w.a.data() + col0 + j;
    for (int i = 0; i < w.rows; ++i) s += col[static_cast<size_t>(i) * w.cols] * g[i];
    y[j] += s;
  }
#endif
}

void outer_acc_serial(Mat64& w, const double* g, const double* x) {
  for (int i = 0; i < w.rows; ++i) {
    double gi = g[i];
    double* row = w.row(i);
    for (int j = 0; j < w.cols; ++j) row[j] += gi * x[j];
  }
}

void outer_acc(Mat64& w, const double* g, const double* x) {
  if (!go_parallel(w.size())) {
    outer_acc_serial(w, g, x);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int i = 0; i < w.rows; ++i) {
    double gi = g[i];
    double* row = w.row(i);
    for (int j = 0; j < w.cols; ++j) row[j] += gi * x[j];
  }
#endif
}

}  // namespace deid::kernels
