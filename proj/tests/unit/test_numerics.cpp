#include <cmath>
#include <random>

#include "doctest.h"
#include "pmpthermo/error.hpp"
#include "pmpthermo/io.hpp"
#include "pmpthermo/lambert_w.hpp"
#include "pmpthermo/ode.hpp"
#include "pmpthermo/roots.hpp"

using namespace pmpthermo;

namespace {

// w e^w = x by plain bisection on [-1, max(1, log x + 1)]
double lambert_bisection(double x) {
  double lo = -1.0, hi = std::max(1.0, std::log(x + 1.0) + 1.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid * std::exp(mid) < x ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("brent finds simple roots") {
  const auto r = brent_root([](double x) { return std::cos(x) - x; }, 0.0, 1.0);
  CHECK(r.converged);
  CHECK(r.x == doctest::Approx(0.739085133215161).epsilon(1e-15));

  const auto cubic = brent_root([](double x) { return (x - 2.0) * (x * x + 1.0); }, -5.0, 7.0);
  CHECK(std::fabs(cubic.x - 2.0) < 1e-14);
}

TEST_CASE("brent rejects a bracket without sign change") {
  CHECK_THROWS_AS(brent_root([](double x) { return x * x + 1.0; }, -1.0, 1.0), DomainError);
}

TEST_CASE("lambert w0 against bisection") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> expo(-6.0, 6.0);
  for (int k = 0; k < 200; ++k) {
    const double x = std::pow(10.0, expo(rng));
    const double w = lambert_w0(x);
    CHECK(std::fabs(w - lambert_bisection(x)) <= 1e-13 * std::max(1.0, std::fabs(w)));
    CHECK(std::fabs(w * std::exp(w) - x) <= 1e-13 * x);
  }
  CHECK(lambert_w0(0.0) == 0.0);
  CHECK(lambert_w0(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(lambert_w0(-std::exp(-1.0)) == doctest::Approx(-1.0).epsilon(1e-7));
}

TEST_CASE("lambert w0 on the negative branch") {
  for (double x : {-0.3, -0.2, -0.1, -1e-3}) {
    const double w = lambert_w0(x);
    CHECK(std::fabs(w * std::exp(w) - x) < 1e-15);
    CHECK(w > -1.0);
  }
  CHECK_THROWS_AS(lambert_w0(-0.5), DomainError);
}

TEST_CASE("dopri integrates exponential decay") {
  Eigen::VectorXd y(1);
  y << 1.0;
  const auto stats = ode::integrate_dopri(
      [](double, const Eigen::VectorXd& s, Eigen::VectorXd& d) {
        d.resize(1);
        d[0] = -2.0 * s[0];
      },
      0.0, 3.0, y, {}, [](double, const Eigen::VectorXd&) {});
  CHECK(std::fabs(y[0] - std::exp(-6.0)) < 1e-11);
  CHECK(stats.accepted > 0);
}

TEST_CASE("number formatting is fixed at 15 significant digits") {
  CHECK(io::format_number(1.0 / 3.0) == "0.333333333333333");
  CHECK(io::format_number(-0.05) == "-0.05");
  CHECK(io::format_number(2.0) == "2");
  CHECK(io::round15(0.1 + 0.2) == 0.3);
}
