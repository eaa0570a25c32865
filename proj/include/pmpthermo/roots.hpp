#pragma once

#include <functional>

namespace pmpthermo {

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Brent's method on a sign-changing bracket [a, b]. Throws DomainError
/// when f(a) and f(b) share a sign.
RootResult brent_root(const std::function<double(double)>& f, double a,
                      double b, double xtol = 1e-15, int max_iter = 200);

/// Same as brent_root but with precomputed end values.
RootResult brent_root(const std::function<double(double)>& f, double a,
                      double b, double fa, double fb, double xtol,
                      int max_iter);

}  // namespace pmpthermo
