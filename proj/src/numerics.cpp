#include "deid/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace deid {

double sigmoid(double x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

Vec64 sigmoid(const Vec64& v) {
  Vec64 out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

Vec64 tanh(const Vec64& v) {
  Vec64 out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

double logsumexp(const Vec64& v) {
  if (v.empty()) throw Error("logsumexp: empty input");
  double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;  // all -inf, or a stray inf/nan propagates
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

Vec64 softmax(const Vec64& v) {
  if (v.empty()) throw Error("softmax: empty input");
  double z = logsumexp(v);
  Vec64 out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i] - z);
  return out;
}

int argmax_lowest(const Vec64& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

double grad_check(const std::function<double(const Vec64&)>& f,
                  const Vec64& theta, const Vec64& analytic_grad, double h) {
  if (h <= 0.0) throw Error("grad_check: step must be positive");
  if (analytic_grad.size() != theta.size())
    throw Error("grad_check: gradient/parameter size mismatch");
  if (!std::isfinite(f(theta))) throw Error("grad_check: f(theta) is not finite");

  Vec64 point = theta;
  double worst = 0.0;
  for (size_t i = 0; i < point.size(); ++i) {
    double saved = point[i];
    point[i] = saved + h;
    double fp = f(point);
    point[i] = saved - h;
    double fm = f(point);
    point[i] = saved;
    double numeric = (fp - fm) / (2.0 * h);
    double denom = std::max(1e-8, std::abs(analytic_grad[i]) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic_grad[i] - numeric) / denom);
  }
  return worst;
}

void xavier_init(Mat64& w, Rng& rng) {
  double r = std::sqrt(6.0 / (w.rows + w.cols));
  for (double& x : w.a) x = rng.uniform(-r, r);
}

void uniform_init(Mat64& w, double half_range, Rng& rng) {
  for (double& x : w.a) x = rng.uniform(-half_range, half_range);
}

}  // namespace deid
