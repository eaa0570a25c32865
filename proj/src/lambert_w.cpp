#include "pmpthermo/lambert_w.hpp"

#include <cmath>
#include <numbers>

#include "pmpthermo/error.hpp"

namespace pmpthermo {

namespace {

double initial_guess(double x) {
  constexpr double kBranch = -1.0 / std::numbers::e;
  if (x < kBranch + 0.25) {
    // branch-point series in p = sqrt(2(e x + 1))
    const double p = std::sqrt(std::max(0.0, 2.0 * (std::numbers::e * x + 1.0)));
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  }
  if (x < 3.0) {
    return std::log1p(x) * (1.0 - std::log1p(std::log1p(x)) / (2.0 + std::log1p(x)));
  }
  const double l1 = std::log(x);
  const double l2 = std::log(l1);
  return l1 - l2 + l2 / l1;
}

}  // namespace

double lambert_w0(double x) {
  constexpr double kBranch = -1.0 / std::numbers::e;
  if (std::isnan(x) || x < kBranch) {
    throw DomainError("lambert_w0: argument below -1/e");
  }
  if (x == 0.0) return 0.0;
  if (x == kBranch) return -1.0;
  if (std::isinf(x)) return x;

  double w = initial_guess(x);
  for (int i = 0; i < 64; ++i) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    const double step = f / denom;
    w -= step;
    if (std::fabs(step) <= 1e-16 * (1.0 + std::fabs(w))) break;
  }
  return w;
}

}  // namespace pmpthermo
