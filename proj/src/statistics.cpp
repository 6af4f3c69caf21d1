#include "qsl/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qsl/errors.hpp"

namespace qsl {

double tv_distance(const RealVector& hist_a, const RealVector& hist_b) {
  if (hist_a.size() != hist_b.size() || hist_a.size() == 0) throw InvalidArgument("tv_distance: bin mismatch");
  const double sa = hist_a.sum();
  const double sb = hist_b.sum();
  if (!(sa > 0.0) || !(sb > 0.0)) throw InvalidArgument("tv_distance: empty histogram");
  if ((hist_a.array() < 0.0).any() || (hist_b.array() < 0.0).any())
    throw InvalidArgument("tv_distance: negative bin");
  return 0.5 * (hist_a / sa - hist_b / sb).cwiseAbs().sum();
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> samples_a, std::span<const double> samples_b) {
  if (samples_a.empty() || samples_b.empty()) throw InvalidArgument("ks_test: empty sample");
  std::vector<double> a(samples_a.begin(), samples_a.end());
  std::vector<double> b(samples_b.begin(), samples_b.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double root = std::sqrt(ne);
  // Stephens' small-sample correction to the asymptotic law.
  const double lambda = (root + 0.12 + 0.11 / root) * d;
  return {d, kolmogorov_survival(lambda)};
}

}  // namespace qsl
