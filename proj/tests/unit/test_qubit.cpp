#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "doctest.h"
#include "pmpthermo/error.hpp"
#include "pmpthermo/qubit.hpp"

using namespace pmpthermo;
using namespace pmpthermo::qubit;
using boost::math::quadrature::gauss_kronrod;

namespace {

// Reference quantities written out independently of the library.
double ref_p(double x, double mu) { return (1.0 - mu * x) / (1.0 + x * x); }
double ref_dp(double x, double mu) {
  const double d = 1.0 + x * x;
  return (-mu * d - 2.0 * x * (1.0 - mu * x)) / (d * d);
}
// p relaxes toward 1/(1+x^2) at unit rate
double ref_dt_dx(double x, double mu) { return ref_dp(x, mu) / (1.0 / (1.0 + x * x) - ref_p(x, mu)); }

double quad_time(double x0, double x1, double mu) {
  return gauss_kronrod<double, 61>::integrate([&](double x) { return ref_dt_dx(x, mu); }, x0, x1, 15, 1e-13);
}
double quad_heat(double x0, double x1, double mu, double beta) {
  return gauss_kronrod<double, 61>::integrate(
      [&](double x) { return -2.0 * std::log(x) / beta * ref_dp(x, mu); }, x0, x1, 15, 1e-13);
}

// costate from the branch constants: q = (mu (x + 1/x) - 2 ln x) / (2 beta)
double ref_q(double x, double mu, double beta) { return (mu * (x + 1.0 / x) - 2.0 * std::log(x)) / (2.0 * beta); }

// x on a branch at population p, by bisection on [1, hi]
double ref_x(double p, double mu, double hi) {
  double lo = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ref_p(mid, mu) > p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// continuity of q between the two branches at the same p
double ref_jump_gap(double p, double K, double z) {
  const double mu_c = -std::sqrt(-K), mu_h = std::sqrt(-z * K);
  const double xc = ref_x(p, mu_c, 1e8);
  const double xh = ref_x(p, mu_h, 1.0 / mu_h);
  return ref_q(xc, mu_c, 1.0) - ref_q(xh, mu_h, z);
}

std::vector<double> ref_jump_roots(double K, double z, int n = 4000) {
  const double p_max = std::min(0.5 * (1.0 - std::sqrt(-z * K)), 0.5);
  std::vector<double> roots;
  double a = 1e-4, fa = ref_jump_gap(a, K, z);
  for (int i = 1; i <= n; ++i) {
    const double b = 1e-4 + (p_max - 2e-9 - 1e-4) * i / n, fb = ref_jump_gap(b, K, z);
    if (fa * fb < 0.0) {
      double lo = a, hi = b, flo = fa;
      for (int k = 0; k < 100; ++k) {
        const double mid = 0.5 * (lo + hi), fm = ref_jump_gap(mid, K, z);
        if (flo * fm <= 0.0) {
          hi = mid;
        } else {
          lo = mid;
          flo = fm;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    a = b;
    fa = fb;
  }
  return roots;
}

}  // namespace

TEST_CASE("branch constants") {
  CHECK(mu(-0.04, 1.0, {Branch::cold}) == doctest::Approx(-0.2));
  CHECK(mu(-0.04, 0.25, {Branch::hot}) == doctest::Approx(0.1));
  const auto b = branch_constants(-0.04, 0.25);
  CHECK(b.mu_c == doctest::Approx(-0.2));
  CHECK(b.mu_h == doctest::Approx(0.1));
}

TEST_CASE("population and gap are inverse maps") {
  for (double m : {-0.5, -0.1, 0.0, 0.1, 0.3}) {
    const double hi = m > 0.0 ? 1.0 / m : 50.0;
    for (int k = 0; k <= 40; ++k) {
      const double x = 1.0 + (hi - 1.0) * k / 40.0;
      if (ref_p(x, m) <= 0.0) continue;
      CHECK(isotherm_p(x, m) == doctest::Approx(ref_p(x, m)).epsilon(1e-14));
      CHECK(x_of_p(isotherm_p(x, m), m) == doctest::Approx(x).epsilon(1e-10));
      CHECK(dp_dx(x, m) == doctest::Approx(ref_dp(x, m)).epsilon(1e-12));
    }
  }
}

TEST_CASE("worked cold segment") {
  const double K = -0.05;
  const double m = mu(K, 1.0, {Branch::cold});
  const double x0 = std::exp(0.5), x1 = std::exp(1.0);
  CHECK(isotherm_p(x0, m) == doctest::Approx(0.3680907868).epsilon(1e-9));
  CHECK(isotherm_time(x0, x1, m) == doctest::Approx(2.037175662).epsilon(1e-9));
  CHECK(isotherm_heat(x0, x1, m, 1.0) == doctest::Approx(0.2572847452).epsilon(1e-9));
}

TEST_CASE("closed-form time and heat agree with quadrature") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 40; ++k) {
    const double K = -0.005 - 0.3 * unit(rng);
    const double z = 0.1 + 0.8 * unit(rng);
    const bool cold = k % 2 == 0;
    const double beta = cold ? 1.0 : z;
    const double m = cold ? -std::sqrt(-K) : std::sqrt(-z * K);
    const double hi = cold ? 30.0 : 1.0 / m;
    double x0 = 1.0 + (hi - 1.0) * (0.02 + 0.45 * unit(rng));
    double x1 = 1.0 + (hi - 1.0) * (0.52 + 0.45 * unit(rng));
    if (!cold) std::swap(x0, x1);
    CHECK(isotherm_time(x0, x1, m) == doctest::Approx(quad_time(x0, x1, m)).epsilon(1e-9));
    CHECK(isotherm_heat(x0, x1, m, beta) == doctest::Approx(quad_heat(x0, x1, m, beta)).epsilon(1e-9));
  }
}

TEST_CASE("segments against the flow are rejected") {
  const double m = -0.2;
  CHECK_THROWS_AS(isotherm_time(3.0, 2.0, m), DirectionError);
  CHECK(std::isinf(isotherm_time(1.5, 2.0, 0.0)));
}

TEST_CASE("slow segments approach the quasi-static heat") {
  for (double K : {-1e-6, -1e-8}) {
    const double m = mu(K, 1.0, {Branch::cold});
    const double x0 = x_of_p(0.45, m), x1 = x_of_p(0.1, m);
    const double qs = (binary_entropy(0.45) - binary_entropy(0.1));
    CHECK(isotherm_heat(x0, x1, m, 1.0) == doctest::Approx(qs).epsilon(5e-3));
  }
  CHECK(quasi_static_heat(0.5, 0.1, 1.0) == doctest::Approx(std::log(2.0) - binary_entropy(0.1)));
}

TEST_CASE("admissible ranges") {
  const auto cold = admissible_x_range(-0.3, Branch::cold);
  CHECK(cold.lo == 1.0);
  CHECK(std::isinf(cold.hi));
  const auto hot = admissible_x_range(0.25, Branch::hot);
  CHECK(hot.hi == doctest::Approx(4.0));
  CHECK(branch_p_max(0.2) == doctest::Approx(0.4));
}

TEST_CASE("jump points match costate continuity") {
  for (double K : {-0.01, -0.03, -0.05, -0.07}) {
    const auto ref = ref_jump_roots(K, 0.3);
    REQUIRE(ref.size() == 2);
    const auto j = find_jump_points(K, 0.3);
    CHECK(j.p_ad1 == doctest::Approx(ref[0]).epsilon(1e-9));
    CHECK(j.p_ad2 == doctest::Approx(ref[1]).epsilon(1e-9));
  }
  const auto j = find_jump_points(-0.05, 0.3);
  CHECK(j.p_ad1 == doctest::Approx(0.02391553149).epsilon(1e-9));
  CHECK(j.p_ad2 == doctest::Approx(0.2062190044).epsilon(1e-9));
  CHECK_THROWS_AS(find_jump_points(-0.08, 0.3), NoJumpPoints);
}

TEST_CASE("f vanishes exactly where the costate is continuous") {
  // same sign pattern on both sides of the two roots
  const double K = -0.05, z = 0.3;
  const bool same = (adiabatic_f(0.01, K, z) > 0.0) == (ref_jump_gap(0.01, K, z) > 0.0);
  for (double p : {0.02, 0.08, 0.15, 0.25}) {
    CHECK(((adiabatic_f(p, K, z) > 0.0) == (ref_jump_gap(p, K, z) > 0.0)) == same);
  }
  const double h = 1e-6;
  for (double p : {0.05, 0.12, 0.2}) {
    const double fd = (adiabatic_f(p + h, -0.05, 0.3) - adiabatic_f(p - h, -0.05, 0.3)) / (2 * h);
    CHECK(adiabatic_f_dp(p, -0.05, 0.3) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("engine threshold against a bisection on root existence") {
  const double z = 0.3;
  double lo = -0.2, hi = -0.01;  // roots exist at hi, not at lo
  for (int i = 0; i < 45; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ref_jump_roots(mid, z, 600).size() >= 2 ? hi : lo) = mid;
  }
  const auto s = solve_engine(z);
  CHECK(s.K_star == doctest::Approx(hi).epsilon(1e-5));
  CHECK(s.K_star == doctest::Approx(-0.07190164595321585).epsilon(1e-12));
  CHECK(s.p_star == doctest::Approx(0.0880293184705).epsilon(1e-10));
  CHECK(std::fabs(s.f_residual) <= 1e-10);
  CHECK(std::fabs(s.tangency_residual) <= 1e-10);
  // Otto efficiency of the infinitesimal cycle
  CHECK(s.eta_star == doctest::Approx(1.0 - s.u_c_star / s.u_h_star).epsilon(1e-12));
  CHECK(s.eta_carnot == doctest::Approx(0.7));
  CHECK(s.eta_curzon_ahlborn == doctest::Approx(1.0 - std::sqrt(0.3)));
  CHECK(std::fabs(s.eta_star - s.eta_curzon_ahlborn) < 0.03);
}

TEST_CASE("engine inputs are validated") {
  CHECK_THROWS_AS(solve_engine(0.0), DomainError);
  CHECK_THROWS_AS(solve_engine(1.0), DomainError);
  CHECK_THROWS_AS(solve_engine(-0.2), DomainError);
}

TEST_CASE("engine near linear response") {
  const auto s = solve_engine(0.99);
  CHECK(s.g < 1e-3);
  CHECK(std::fabs(s.eta_star - s.eta_curzon_ahlborn) < 1e-6);
}

TEST_CASE("asymptotic constants") {
  const auto a = asymptotic_limit();
  CHECK(a.theta == doctest::Approx(0.06961).epsilon(1e-3));
  CHECK(4.0 * a.theta * std::exp(4.0 * a.theta) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(a.p_star_limit == doctest::Approx(2.0 * a.theta / (1.0 + 4.0 * a.theta)));
}
