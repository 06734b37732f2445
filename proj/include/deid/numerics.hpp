#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace deid {

// Thrown for every data/model error the library reports. The CLI maps it to
// exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vec64 = std::vector<double>;

// Dense row-major matrix of 64-bit floats.
struct Mat64 {
  int rows = 0;
  int cols = 0;
  Vec64 a;

  Mat64() = default;
  Mat64(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
  double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  size_t size() const { return a.size(); }
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seedable deterministic generator. The raw stream is mt19937_64, which the
// standard pins down exactly; the derived draws below avoid the
// implementation-defined std::*_distribution mappings so identical seeds give
// identical streams everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t next() { return engine_(); }

  // Uniform in [0, 1), 53 bits of entropy.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, bound). bound must be > 0.
  uint64_t below(uint64_t bound) { return next() % bound; }

  // Uniform integer in [lo, hi] inclusive.
  int range_int(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Independent child stream; deterministic in (seed, stream).
  Rng fork(uint64_t stream) const {
    return Rng(splitmix64(seed_ + 0x9e3779b97f4a7c15ull * (stream + 1)));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

// Overflow-safe elementwise nonlinearities.
double sigmoid(double x);
Vec64 sigmoid(const Vec64& v);
Vec64 tanh(const Vec64& v);

// softmax(v) = exp(v - logsumexp(v)); shift-invariant and overflow-safe.
Vec64 softmax(const Vec64& v);

// log sum_i exp(v_i), computed against max(v). Empty input is an error.
double logsumexp(const Vec64& v);

// Index of the maximum entry; ties resolve to the lowest index.
int argmax_lowest(const Vec64& v);

// Max over coordinates of |analytic - central_difference| /
// max(1e-8, |analytic| + |central_difference|). Throws if f(theta) is not
// finite.
double grad_check(const std::function<double(const Vec64&)>& f,
                  const Vec64& theta, const Vec64& analytic_grad, double h);

// Xavier-style uniform init: entries in +-sqrt(6 / (fan_in + fan_out)) with
// fan_out = rows, fan_in = cols.
void xavier_init(Mat64& w, Rng& rng);

// Uniform init in +-half_range (embedding tables use 0.05).
void uniform_init(Mat64& w, double half_range, Rng& rng);

inline void add_inplace(Vec64& dst, const Vec64& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline bool all_finite(const Vec64& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace deid
