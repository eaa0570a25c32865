#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "pmpthermo/error.hpp"
#include "pmpthermo/lindblad.hpp"

using namespace pmpthermo;
using cd = std::complex<double>;

namespace {

Operator random_hermitian(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Operator a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = cd(g(rng), g(rng));
  return 0.5 * (a + a.adjoint());
}

// Dense fixed-step RK4 on the qubit population with heat bookkeeping, used
// as an independent reference for adaptive integration.
struct Dense {
  double p;
  double heat;
};
Dense dense_qubit(double p0, double t1, double beta, const std::function<double(double)>& u, int steps) {
  auto rhs = [&](double t, double p) {
    const double n = 1.0 / (1.0 + std::exp(beta * u(t)));
    return n - p;
  };
  double p = p0, heat = 0.0;
  const double h = t1 / steps;
  for (int i = 0; i < steps; ++i) {
    const double t = i * h;
    const double k1 = rhs(t, p), k2 = rhs(t + h / 2, p + h / 2 * k1), k3 = rhs(t + h / 2, p + h / 2 * k2),
                 k4 = rhs(t + h, p + h * k3);
    // heat released: -u dp, Simpson weights on the same stages
    heat -= h / 6 * (u(t) * k1 + 2 * u(t + h / 2) * (k2 + k3) + u(t + h) * k4);
    p += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return {p, heat};
}

}  // namespace

TEST_CASE("density matrix invariants are enforced") {
  Operator m(2, 2);
  m << 0.6, 0.1, 0.2, 0.4;
  CHECK_THROWS_AS(DensityMatrix{m}, DomainError);
  m << 0.7, 0.0, 0.0, 0.4;
  CHECK_THROWS_AS(DensityMatrix{m}, DomainError);
  m << 1.2, 0.0, 0.0, -0.2;
  CHECK_THROWS_AS(DensityMatrix{m}, DomainError);
  CHECK_THROWS_AS(DensityMatrix{Operator(2, 3)}, ShapeError);
  CHECK_NOTHROW(DensityMatrix::qubit(0.3));
  CHECK(DensityMatrix::qubit(0.3).populations()[1] == doctest::Approx(0.3));
}

TEST_CASE("bath ordering is validated") {
  CHECK_THROWS_AS(BathPair::make(0.5, 1.0), DomainError);
  CHECK_NOTHROW(BathPair::make(1.0, 0.3));
}

TEST_CASE("gibbs population of the qubit") {
  CHECK(qubit_gibbs_population(1.0, 0.0) == doctest::Approx(0.5));
  CHECK(qubit_gibbs_population(1.0, 2.0) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-15));
  CHECK(qubit_gibbs_population(0.3, -4.0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.2))).epsilon(1e-15));
}

TEST_CASE("stationary state equals the rate-weighted Gibbs mixture") {
  for (std::size_t n : {2u, 3u, 5u}) {
    const auto sys = OpenSystem::levels(n, 1.0, 0.3);
    ControlVector u;
    for (std::size_t k = 1; k < n; ++k) u.hamiltonian_params.push_back(0.5 + 0.9 * static_cast<double>(k));
    u.gamma_c = 0.35;
    u.gamma_h = 0.65;
    const Operator rho = stationary_state(u, sys);
    // energies 0, u_1, ..., u_{n-1}
    auto gibbs = [&](double beta) {
      Eigen::VectorXd w(n);
      w[0] = 1.0;
      for (std::size_t k = 1; k < n; ++k) w[k] = std::exp(-beta * u.hamiltonian_params[k - 1]);
      return Eigen::VectorXd(w / w.sum());
    };
    const Eigen::VectorXd expected = 0.35 * gibbs(1.0) + 0.65 * gibbs(0.3);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(rho(k, k) - expected[k]) < 1e-13);
    CHECK(lindblad_rhs(rho, u, sys).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("adjoint is dual to the generator") {
  std::mt19937_64 rng(11);
  for (std::size_t n : {2u, 3u, 4u}) {
    const auto sys = OpenSystem::levels(n, 1.0, 0.4);
    ControlVector u;
    for (std::size_t k = 1; k < n; ++k) u.hamiltonian_params.push_back(0.3 * static_cast<double>(k) + 0.1);
    u.gamma_c = 0.2;
    u.gamma_h = 0.8;
    for (int trial = 0; trial < 5; ++trial) {
      const Operator a = random_hermitian(n, rng);
      const Operator rho = random_hermitian(n, rng);
      const double lhs = trace_product(a, lindblad_rhs(rho, u, sys));
      const double rhs = trace_product(lindblad_adjoint(a, u, sys), rho);
      CHECK(std::fabs(lhs - rhs) < 1e-12);
    }
  }
}

TEST_CASE("control derivative matches finite differences") {
  const auto sys = OpenSystem::levels(3, 1.0, 0.3);
  std::mt19937_64 rng(5);
  Operator rho = random_hermitian(3, rng);
  ControlVector u{{0.8, 1.7}, 0.6, 0.4};
  for (std::size_t k = 0; k < 2; ++k) {
    const double h = 1e-5;
    ControlVector up = u, dn = u;
    up.hamiltonian_params[k] += h;
    dn.hamiltonian_params[k] -= h;
    const Operator fd = (lindblad_rhs(rho, up, sys) - lindblad_rhs(rho, dn, sys)) / (2 * h);
    CHECK((lindblad_rhs_derivative(rho, u, sys, k) - fd).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("generator rejects mismatched inputs") {
  const auto sys = OpenSystem::qubit(1.0, 0.3);
  CHECK_THROWS_AS(lindblad_rhs(Operator::Identity(3, 3) / 3.0, ControlVector{{1.0}, 1.0, 0.0}, sys), ShapeError);
  CHECK_THROWS_AS(lindblad_rhs(Operator::Identity(2, 2) / 2.0, ControlVector{{1.0}, -1.0, 0.0}, sys), DomainError);
  CHECK_THROWS_AS(lindblad_rhs(Operator::Identity(2, 2) / 2.0, ControlVector{{1.0, 2.0}, 1.0, 0.0}, sys),
                  ShapeError);
}

TEST_CASE("relaxation under a single bath is exponential") {
  const auto sys = OpenSystem::qubit(1.0, 0.3);
  Protocol protocol;
  protocol.append_constant(4.0, ControlVector{{1.5}, 0.0, 1.0});
  const auto res = integrate(DensityMatrix::qubit(0.05), protocol, sys);
  const double n = qubit_gibbs_population(0.3, 1.5);
  CHECK(std::fabs(res.final_state(1, 1).real() - (n + (0.05 - n) * std::exp(-4.0))) < 1e-9);
  // heat released at fixed gap: -u dp
  CHECK(res.ledger.heat_released == doctest::Approx(-1.5 * (res.final_state(1, 1).real() - 0.05)).epsilon(1e-9));
  CHECK(std::fabs(res.first_law_residual) < 1e-10);
}

TEST_CASE("coherences decay at the total rate") {
  const auto sys = OpenSystem::levels(3, 1.0, 0.3);
  Operator m = Operator::Zero(3, 3);
  m(0, 0) = 0.5;
  m(1, 1) = 0.3;
  m(2, 2) = 0.2;
  m(0, 1) = 0.1;
  m(1, 0) = 0.1;
  Protocol protocol;
  protocol.append_constant(2.0, ControlVector{{1.0, 2.5}, 0.4, 0.6});
  const auto res = integrate(DensityMatrix{m}, protocol, sys);
  CHECK(std::abs(res.final_state(0, 1)) == doctest::Approx(0.1 * std::exp(-2.0)).epsilon(1e-8));
}

TEST_CASE("ramped gap agrees with a dense fixed-step reference") {
  const auto sys = OpenSystem::qubit(1.0, 0.3);
  auto law = [](double t) { return 1.0 + 0.8 * t + 0.3 * std::sin(2.0 * t); };
  Protocol protocol;
  protocol.append({0.0, 3.0, [&](double t) { return ControlVector{{law(t)}, 1.0, 0.0}; }, {}});
  const auto res = integrate(DensityMatrix::qubit(0.4), protocol, sys);
  const auto ref = dense_qubit(0.4, 3.0, 1.0, law, 20000);
  CHECK(std::fabs(res.final_state(1, 1).real() - ref.p) < 1e-9);
  CHECK(std::fabs(res.ledger.heat_released - ref.heat) < 1e-8);
  CHECK(std::fabs(res.first_law_residual) < 1e-8);
}

TEST_CASE("quench work is booked at piece boundaries") {
  const auto sys = OpenSystem::qubit(1.0, 0.3);
  Protocol protocol;
  protocol.append_constant(1.0, ControlVector{{1.0}, 1.0, 0.0});
  protocol.append_constant(1.0, ControlVector{{3.0}, 0.0, 1.0});
  const auto res = integrate(DensityMatrix::qubit(0.2), protocol, sys);
  const double n1 = qubit_gibbs_population(1.0, 1.0);
  const double p1 = n1 + (0.2 - n1) * std::exp(-1.0);
  const double n2 = qubit_gibbs_population(0.3, 3.0);
  const double p2 = n2 + (p1 - n2) * std::exp(-1.0);
  CHECK(res.final_state(1, 1).real() == doctest::Approx(p2).epsilon(1e-9));
  CHECK(res.ledger.work_done == doctest::Approx(-2.0 * p1).epsilon(1e-9));
  CHECK(res.ledger.heat_released == doctest::Approx(-(p1 - 0.2) - 3.0 * (p2 - p1)).epsilon(1e-9));
  CHECK(std::fabs(res.first_law_residual) < 1e-10);
}

TEST_CASE("protocols must be contiguous") {
  Protocol protocol;
  protocol.append_constant(1.0, ControlVector{{1.0}, 1.0, 0.0});
  CHECK_THROWS_AS(protocol.append({1.5, 2.0, [](double) { return ControlVector{{1.0}, 1.0, 0.0}; }, {}}),
                  DomainError);
  CHECK(protocol.t_end() == 1.0);
}
