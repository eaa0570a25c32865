#pragma once

// Costate dynamics, pseudo-Hamiltonian and residual checks for heat-optimal
// control of a two-bath open system.

#include <string>
#include <vector>

#include "pmpthermo/lindblad.hpp"
#include "pmpthermo/qubit.hpp"

namespace pmpthermo::pmp {

/// Two-level costate q (|0><0| - |1><1|).
Operator qubit_costate(double q);

/// <(pi - H_u) L_u[rho]> + lambda (tr rho - 1).
double pseudo_hamiltonian(const Operator& rho, const Operator& pi, const ControlVector& u,
                          const OpenSystem& sys, double lambda);

/// d pi/dt = -(L_u^dagger[pi - H_u] + lambda 1).
Operator costate_rhs(const Operator& pi, const ControlVector& u, const OpenSystem& sys, double lambda);

/// Multiplier that keeps tr pi fixed: -tr(L_u^dagger[pi - H_u]) / dim.
double gauge_lambda(const Operator& pi, const ControlVector& u, const OpenSystem& sys);

/// -<rho_eq d pi/dt>. Throws DomainError when rho_eq is not a fixed point of
/// L_u (residual above kFixedPointTol).
inline constexpr double kFixedPointTol = 1e-8;
double lambda_from_gauge(const Operator& pi_dot, const Operator& rho_eq, const ControlVector& u,
                         const OpenSystem& sys);

/// <pi(0) rho(0)> - <pi(tau) rho(tau)> - int lambda dt.
double q_min_formula(const Operator& pi0, const Operator& rho0, const Operator& pi_tau,
                     const Operator& rho_tau, double lambda_integral);

/// <(pi - H_u)(D_h - D_c)[rho]> with unit-rate dissipators. Positive values
/// favour the cold bath.
double switching_functional(const Operator& rho, const Operator& pi, const ControlVector& u,
                            const OpenSystem& sys);

/// Closed form for the two-level reset model:
/// (2q + u)(e^{beta_h u} - e^{beta_c u}) / ((e^{beta_c u} + 1)(e^{beta_h u} + 1)).
double qubit_switching_functional(double q, double u, double beta_c, double beta_h);

inline constexpr double kTieTolerance = 1e-12;

struct BathChoice {
  BathLabel bath = BathLabel::cold;
  double gamma_c = 0.0;
  double gamma_h = 0.0;
};

/// A > tol: cold at full rate; A < -tol: hot; otherwise keep `current`.
BathChoice select_bath(double A, BathLabel current, double gamma = 1.0, double tie_tol = kTieTolerance);

/// d H / d u_k stationarity mismatch at one point:
/// <(pi - H) dL/du_k[rho]> - <dH/du_k L[rho]>.
double stationarity_residual(const Operator& rho, const Operator& pi, const ControlVector& u,
                             const OpenSystem& sys, std::size_t k);

struct TrajectoryNode {
  double t = 0.0;
  Operator rho;
  Operator pi;
  Operator pi_dot;
  ControlVector control;
  double lambda = 0.0;
};

/// Sampled state/costate trajectory with its conserved rate K as metadata.
struct CostateTrajectory {
  double K = 0.0;
  std::vector<TrajectoryNode> nodes;
};

struct PmpResiduals {
  double max_conservation = 0.0;
  double max_stationarity = 0.0;
  double max_costate_ode = 0.0;
  std::size_t nodes = 0;
};

PmpResiduals conserved_k_residual(const CostateTrajectory& traj, const OpenSystem& sys);

std::string residuals_json(const PmpResiduals& r);

/// Nodes along an analytic two-level isotherm from x0 to x1 on `kind`, uniform
/// in x. Rates are full coupling gamma to the branch bath; times start at t0.
CostateTrajectory qubit_isotherm_nodes(double K, qubit::Branch kind, double x0, double x1,
                                       const OpenSystem& sys, std::size_t count, double gamma = 1.0,
                                       double t0 = 0.0);

/// Forward co-integration of rho and pi under `protocol` with lambda from the
/// traceless gauge. Samples at the integrator's accepted steps.
CostateTrajectory co_integrate(const DensityMatrix& rho0, const Operator& pi0, const Protocol& protocol,
                               const OpenSystem& sys, double K, const IntegratorOptions& options = {});

}  // namespace pmpthermo::pmp
