#pragma once

// Closed forms for the two-level system driven between a cold and a hot
// bath. x = e^{beta u / 2} parametrizes the gap on each branch, and mu is
// the branch constant fixed by the conserved rate K <= 0.

#include <cmath>

#include "pmpthermo/lindblad.hpp"

namespace pmpthermo::qubit {

using Branch = BathLabel;

enum class GapSign { nonneg, neg };

struct BranchSpec {
  Branch kind = Branch::cold;
  GapSign gap_sign = GapSign::nonneg;
};

const char* branch_name(Branch b);

/// Branch constant. |mu| = sqrt(-beta K / gamma); negative on the cold branch
/// and positive on the hot one for non-negative gaps, swapped otherwise.
double mu(double K, double beta, BranchSpec branch, double gamma = 1.0);

/// Excited population along an isotherm, (1 - mu x) / (1 + x^2).
double isotherm_p(double x, double mu);

/// Inverse of isotherm_p on the branch: x(p) = (sqrt(mu^2 + 4p(1-p)) - mu) / (2p).
double x_of_p(double p, double mu);
double isotherm_u_of_p(double p, double mu, double beta);

/// Implicit time and heat integrals.
double chi(double x, double mu);
double xi(double x, double mu);

/// Duration [chi(x1) - chi(x0)] / gamma. Returns +inf for mu == 0 and
/// x0 != x1. Throws DirectionError if the result is negative.
double isotherm_time(double x0, double x1, double mu, double gamma = 1.0);

/// Heat released [Xi(x1) - Xi(x0)] / beta. mu == 0 falls back to the
/// entropy form. Throws DirectionError when x0 -> x1 runs against the flow.
double isotherm_heat(double x0, double x1, double mu, double beta);

/// [H(p0) - H(p1)] / beta with H the binary entropy in nats.
double quasi_static_heat(double p0, double p1, double beta);
double binary_entropy(double p);

/// dx/dt along an isotherm.
double x_rate(double x, double mu, double gamma = 1.0);

/// dp/dx along an isotherm.
double dp_dx(double x, double mu);

/// 2q + u along an isotherm, (mu / beta)(x + 1/x), and the costate itself.
double switching_gap(double x, double mu, double beta);
double costate_q(double x, double mu, double beta);

/// Admissible x interval of a branch (non-negative gaps): cold [1, inf),
/// hot [1, 1/mu].
struct XRange {
  double lo = 1.0;
  double hi = 1.0;
  bool contains(double x, double tol = 1e-12) const { return x >= lo - tol && x <= hi + tol; }
};
XRange admissible_x_range(double mu, Branch kind);

/// Largest population reachable on a branch (value of p at x = 1).
double branch_p_max(double mu);

// ---------------------------------------------------------------------------
// Jump condition and engine. Reduced units beta_c = 1, gamma = 1, beta_h = z.

struct BranchPair {
  double mu_c = 0.0;
  double mu_h = 0.0;
};
BranchPair branch_constants(double K, double z);

/// f(p; K). Zero where state and costate can be continued across a switch
/// between the cold and the hot branch.
double adiabatic_f(double p, double K, double z);
double adiabatic_f_dp(double p, double K, double z);

/// (1 + x_c^2)/(mu_c x_c) + (1 + x_h^2)/(mu_h x_h); vanishes where the two
/// jump points merge.
double tangency_residual(double p, double K, double z);

struct JumpPoints {
  double p_ad1 = 0.0;
  double p_ad2 = 0.0;
};

/// Both roots of f(.; K). Throws NoJumpPoints below the threshold K*.
JumpPoints find_jump_points(double K, double z);

/// Minimum of f(.; K) over p and its location.
struct FMinimum {
  double p = 0.0;
  double f = 0.0;
};
FMinimum adiabatic_f_minimum(double K, double z);

struct EngineSolution {
  double z = 0.0;
  double K_star = 0.0;
  double p_star = 0.0;
  double u_c_star = 0.0;
  double u_h_star = 0.0;
  double eta_star = 0.0;
  double eta_carnot = 0.0;
  double eta_curzon_ahlborn = 0.0;
  double g = 0.0;
  double theta = 0.0;
  // not serialized
  double f_residual = 0.0;
  double tangency_residual = 0.0;
};

EngineSolution solve_engine(double z);

/// Threshold rate K*(z) alone.
double critical_rate(double z);

struct AsymptoticLimit {
  double theta = 0.0;
  double p_star_limit = 0.0;
};
/// theta = W(1/e)/4 and p*(z -> 0) = 2 theta / (1 + 4 theta).
AsymptoticLimit asymptotic_limit();

inline double x_of_u(double u, double beta) { return std::exp(0.5 * beta * u); }
inline double u_of_x(double x, double beta) { return 2.0 * std::log(x) / beta; }

}  // namespace pmpthermo::qubit
