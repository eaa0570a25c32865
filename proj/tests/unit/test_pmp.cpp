#include <cmath>
#include <random>

#include "doctest.h"
#include "pmpthermo/error.hpp"
#include "pmpthermo/planner.hpp"
#include "pmpthermo/pmp.hpp"

using namespace pmpthermo;
using namespace pmpthermo::pmp;
using qubit::Branch;

TEST_CASE("switching functional matches the two-level closed form") {
  const auto sys = OpenSystem::qubit(1.0, 0.3);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> q_dist(-4.0, 1.0), u_dist(0.1, 8.0), p_dist(0.01, 0.6);
  for (int k = 0; k < 50; ++k) {
    const double q = q_dist(rng), u = u_dist(rng);
    const auto rho = DensityMatrix::qubit(p_dist(rng)).matrix();
    const double general = switching_functional(rho, qubit_costate(q), ControlVector{{u}, 1.0, 0.0}, sys);
    CHECK(general == doctest::Approx(qubit_switching_functional(q, u, 1.0, 0.3)).epsilon(1e-12));
  }
}

TEST_CASE("bath selection with ties") {
  CHECK(select_bath(0.3, BathLabel::hot).bath == BathLabel::cold);
  CHECK(select_bath(-0.3, BathLabel::cold).bath == BathLabel::hot);
  CHECK(select_bath(1e-14, BathLabel::hot).bath == BathLabel::hot);
  CHECK(select_bath(-1e-14, BathLabel::cold).bath == BathLabel::cold);
  const auto c = select_bath(2.0, BathLabel::hot, 1.5);
  CHECK(c.gamma_c == 1.5);
  CHECK(c.gamma_h == 0.0);
}

TEST_CASE("gauge keeps the costate trace fixed") {
  const auto sys = OpenSystem::levels(3, 1.0, 0.3);
  Operator pi = Operator::Zero(3, 3);
  pi(0, 0) = 0.4;
  pi(1, 1) = -1.2;
  pi(2, 2) = 0.3;
  const ControlVector u{{1.0, 2.0}, 0.3, 0.7};
  const double lambda = gauge_lambda(pi, u, sys);
  CHECK(std::abs(costate_rhs(pi, u, sys, lambda).trace()) < 1e-14);
}

TEST_CASE("lambda from the stationary state") {
  const auto sys = OpenSystem::qubit(1.0, 0.3);
  const ControlVector u{{2.0}, 1.0, 0.0};
  const Operator pi = qubit_costate(-0.7);
  const double lambda = gauge_lambda(pi, u, sys);
  const Operator pi_dot = costate_rhs(pi, u, sys, lambda);
  const Operator rho_eq = stationary_state(u, sys);
  CHECK(lambda_from_gauge(pi_dot, rho_eq, u, sys) == doctest::Approx(lambda).epsilon(1e-12));
  CHECK_THROWS_AS(lambda_from_gauge(pi_dot, DensityMatrix::qubit(0.4).matrix(), u, sys), DomainError);
}

TEST_CASE("analytic isotherms conserve the pseudo-Hamiltonian") {
  const auto sys = OpenSystem::qubit(1.0, 0.3);
  for (double K : {-0.01, -0.05, -0.2}) {
    const double mh = qubit::mu(K, 0.3, {Branch::hot});
    const auto cold = qubit_isotherm_nodes(K, Branch::cold, 1.2, 8.0, sys, 200);
    const auto hot = qubit_isotherm_nodes(K, Branch::hot, 0.9 / mh, 1.1, sys, 200);
    for (const auto* traj : {&cold, &hot}) {
      const auto r = conserved_k_residual(*traj, sys);
      CHECK(r.nodes == 200);
      CHECK(r.max_conservation < 1e-9);
      CHECK(r.max_stationarity < 1e-9);
      CHECK(r.max_costate_ode < 1e-9);
    }
  }
}

TEST_CASE("minimal heat from boundary terms and lambda") {
  // cold segment at K = -0.05 from x = e^0.5 to e
  const auto sys = OpenSystem::qubit(1.0, 0.3);
  const auto traj = qubit_isotherm_nodes(-0.05, Branch::cold, std::exp(0.5), std::exp(1.0), sys, 4001);
  double integral = 0.0;
  for (std::size_t i = 1; i < traj.nodes.size(); ++i) {
    const auto& a = traj.nodes[i - 1];
    const auto& b = traj.nodes[i];
    integral += 0.5 * (a.lambda + b.lambda) * (b.t - a.t);
  }
  const auto& first = traj.nodes.front();
  const auto& last = traj.nodes.back();
  const double q = q_min_formula(first.pi, first.rho, last.pi, last.rho, integral);
  CHECK(q == doctest::Approx(0.2572847452).epsilon(1e-6));
}

TEST_CASE("forward co-integration follows the analytic isotherm") {
  const double K = -0.05, z = 0.3;
  const auto seg = plan::isotherm_between_gaps(Branch::cold, K, z, 1.0, 5.0);
  const auto p = plan::plan_from_segment(seg, z);
  const auto sys = plan::plan_system(z);
  const auto nodes = qubit_isotherm_nodes(K, Branch::cold, seg.x0, seg.x1, sys, 2);
  const auto traj = co_integrate(DensityMatrix{nodes.nodes.front().rho}, nodes.nodes.front().pi,
                                 plan::to_protocol(p), sys, K);
  REQUIRE(traj.nodes.size() > 2);
  const auto& end = traj.nodes.back();
  CHECK((end.pi - nodes.nodes.back().pi).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((end.rho - nodes.nodes.back().rho).cwiseAbs().maxCoeff() < 1e-8);
  double worst = 0.0;
  for (const auto& n : traj.nodes) {
    worst = std::max(worst, std::fabs(pseudo_hamiltonian(n.rho, n.pi, n.control, sys, n.lambda) - K));
  }
  CHECK(worst < 1e-6);
}
