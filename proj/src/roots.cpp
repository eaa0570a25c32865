#include "pmpthermo/roots.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "pmpthermo/error.hpp"

namespace pmpthermo {

RootResult brent_root(const std::function<double(double)>& f, double a,
                      double b, double xtol, int max_iter) {
  return brent_root(f, a, b, f(a), f(b), xtol, max_iter);
}

RootResult brent_root(const std::function<double(double)>& f, double a,
                      double b, double fa, double fb, double xtol,
                      int max_iter) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  RootResult r;
  r.evaluations = 2;
  if (fa == 0.0) return {a, fa, r.evaluations, true};
  if (fb == 0.0) return {b, fb, r.evaluations, true};
  if ((fa > 0.0) == (fb > 0.0)) {
    throw DomainError("brent_root: bracket does not change sign");
  }

  double c = a, fc = fa, d = b - a, e = d;
  for (int iter = 0; iter < max_iter; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2.0 * eps * std::fabs(b) + 0.5 * xtol;
    const double m = 0.5 * (c - b);
    if (std::fabs(m) <= tol || fb == 0.0) {
      return {b, fb, r.evaluations, true};
    }
    if (std::fabs(e) >= tol && std::fabs(fa) > std::fabs(fb)) {
      // inverse quadratic interpolation, secant when a == c
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        const double qa = fa / fc;
        const double rb = fb / fc;
        p = s * (2.0 * m * qa * (qa - rb) - (b - a) * (rb - 1.0));
        q = (qa - 1.0) * (rb - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * m * q - std::fabs(tol * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += (std::fabs(d) > tol) ? d : (m > 0.0 ? tol : -tol);
    fb = f(b);
    ++r.evaluations;
  }
  return {b, fb, r.evaluations, false};
}

}  // namespace pmpthermo
