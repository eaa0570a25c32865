#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "pmpthermo/error.hpp"

namespace pmpthermo::ode {

struct Options {
  double rtol = 1e-9;
  double atol = 1e-12;
  double initial_step = 0.0;  // 0 selects a step from the initial slope
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 10'000'000;
};

struct Stats {
  long accepted = 0;
  long rejected = 0;
  double last_step = 0.0;
};

/// Dormand-Prince 5(4) with FSAL and the classic step controller.
/// Integrates y' = f(t, y) from t0 to t1 in place. `observe(t, y)` is called
/// after each accepted step. Throws IntegrationFailure on step underflow.
template <class Rhs, class Observer>
Stats integrate_dopri(Rhs&& f, double t0, double t1, Eigen::VectorXd& y,
                      const Options& opt, Observer&& observe) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                          e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  Stats stats;
  const double span = t1 - t0;
  if (span <= 0.0) return stats;

  const Eigen::Index n = y.size();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  Eigen::VectorXd ytmp(n), ynew(n), err(n);

  f(t0, y, k1);
  double h = opt.initial_step;
  if (h <= 0.0) {
    const double scale = opt.atol + opt.rtol * y.cwiseAbs().maxCoeff();
    const double slope = k1.cwiseAbs().maxCoeff();
    h = slope > 0.0 ? 0.01 * scale / slope : span;
    h = std::clamp(h, 1e-6 * span, span);
    h = std::max(h, std::pow(opt.rtol, 0.2) * 1e-3 * span);
  }
  h = std::min({h, opt.max_step, span});

  double t = t0;
  while (t < t1) {
    if (stats.accepted + stats.rejected >= opt.max_steps) {
      throw IntegrationFailure("step budget exhausted", t);
    }
    const bool last = t + h >= t1 || t1 - (t + h) < 1e-12 * std::fabs(span);
    if (last) h = t1 - t;
    if (h < 1e-14 * std::max(1.0, std::fabs(t))) {
      throw IntegrationFailure("step size underflow", t);
    }

    ytmp = y + h * a21 * k1;
    f(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double t_new = last ? t1 : t + h;
    f(t_new, ynew, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
      const double r = err[i] / sc;
      norm += r * r;
    }
    norm = std::sqrt(norm / static_cast<double>(n));

    if (std::isfinite(norm) && norm <= 1.0) {
      t = t_new;
      y.swap(ynew);
      k1.swap(k7);
      ++stats.accepted;
      stats.last_step = h;
      observe(t, y);
      const double fac = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
      h = std::min(h * fac, opt.max_step);
    } else {
      ++stats.rejected;
      const double fac = std::isfinite(norm) ? std::clamp(0.9 * std::pow(norm, -0.2), 0.1, 0.9) : 0.1;
      h *= fac;
    }
  }
  return stats;
}

}  // namespace pmpthermo::ode
