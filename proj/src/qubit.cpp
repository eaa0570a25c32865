#include "pmpthermo/qubit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "pmpthermo/error.hpp"
#include "pmpthermo/lambert_w.hpp"
#include "pmpthermo/roots.hpp"

namespace pmpthermo::qubit {

namespace {

constexpr double kScanLo = 1e-6;
constexpr double kScanHi = 1.0 - 1e-6;
constexpr int kScanNodes = 1000;
// f at its minimum within this of zero counts as a double root
constexpr double kDoubleRootTol = 1e-12;

void require_probability(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(std::string(what) + ": p must lie in (0, 1)");
}

void require_rate(double K, double z) {
  if (!(K < 0.0) || !std::isfinite(K)) throw DomainError("K must be negative and finite");
  if (!(z > 0.0 && z <= 1.0)) throw DomainError("z must lie in (0, 1]");
}

}  // namespace

const char* branch_name(Branch b) { return b == Branch::cold ? "cold" : "hot"; }

double mu(double K, double beta, BranchSpec branch, double gamma) {
  if (K > 0.0) throw DomainError("K must be non-positive on an optimal isotherm");
  if (!(beta > 0.0) || !(gamma > 0.0)) throw DomainError("beta and gamma must be positive");
  const double m = std::sqrt(-beta * K / gamma);
  const bool negative = (branch.kind == Branch::cold) == (branch.gap_sign == GapSign::nonneg);
  return negative ? -m : m;
}

double isotherm_p(double x, double mu) {
  if (!(x > 0.0)) throw DomainError("x must be positive");
  if (std::isinf(x)) return 0.0;
  const double p = (1.0 - mu * x) / (1.0 + x * x);
  if (p < -1e-12 || p > 1.0 + 1e-12) throw DomainError("isotherm population outside [0, 1]: x out of the branch range");
  return std::clamp(p, 0.0, 1.0);
}

double x_of_p(double p, double mu) {
  require_probability(p, "x_of_p");
  const double disc = std::sqrt(mu * mu + 4.0 * p * (1.0 - p));
  // avoid cancellation on the hot branch
  if (mu > 0.0) return 2.0 * (1.0 - p) / (disc + mu);
  return (disc - mu) / (2.0 * p);
}

double isotherm_u_of_p(double p, double mu, double beta) { return u_of_x(x_of_p(p, mu), beta); }

double chi(double x, double mu) {
  if (mu == 0.0) throw DomainError("chi is singular at mu = 0");
  return -(2.0 / mu) * std::atan(x) + std::log((x * x + 1.0) / x);
}

double xi(double x, double mu) {
  const double x2 = x * x;
  return -2.0 * mu * std::atan(x) + (2.0 * x * (x + mu) / (1.0 + x2)) * std::log(x) - std::log1p(x2);
}

namespace {

double checked_chi_difference(double x0, double x1, double mu) {
  const double c0 = chi(x0, mu);
  const double c1 = chi(x1, mu);
  double d = c1 - c0;
  if (d < 0.0) {
    if (-d > 1e-12 * (1.0 + std::fabs(c0) + std::fabs(c1))) {
      throw DirectionError("segment runs against the direction of the dynamics");
    }
    d = 0.0;
  }
  return d;
}

}  // namespace

double isotherm_time(double x0, double x1, double mu, double gamma) {
  if (!(x0 > 0.0) || !(x1 > 0.0)) throw DomainError("x must be positive");
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  if (x0 == x1) return 0.0;
  if (mu == 0.0) return std::numeric_limits<double>::infinity();
  return checked_chi_difference(x0, x1, mu) / gamma;
}

double isotherm_heat(double x0, double x1, double mu, double beta) {
  if (!(x0 > 0.0) || !(x1 > 0.0)) throw DomainError("x must be positive");
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  if (x0 == x1) return 0.0;
  if (mu == 0.0) return quasi_static_heat(1.0 / (1.0 + x0 * x0), 1.0 / (1.0 + x1 * x1), beta);
  checked_chi_difference(x0, x1, mu);
  return (xi(x1, mu) - xi(x0, mu)) / beta;
}

double binary_entropy(double p) {
  if (p < 0.0 || p > 1.0) throw DomainError("entropy needs p in [0, 1]");
  auto term = [](double v) { return v > 0.0 ? -v * std::log(v) : 0.0; };
  return term(p) + term(1.0 - p);
}

double quasi_static_heat(double p0, double p1, double beta) {
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  return (binary_entropy(p0) - binary_entropy(p1)) / beta;
}

double x_rate(double x, double mu, double gamma) {
  if (mu == 0.0) return 0.0;
  return gamma * (x * x + 1.0) * x / (x * x - 2.0 * x / mu - 1.0);
}

double dp_dx(double x, double mu) {
  const double s = 1.0 + x * x;
  return -(mu * (1.0 - x * x) + 2.0 * x) / (s * s);
}

double switching_gap(double x, double mu, double beta) { return (mu / beta) * (x + 1.0 / x); }

double costate_q(double x, double mu, double beta) {
  return 0.5 * (switching_gap(x, mu, beta) - u_of_x(x, beta));
}

XRange admissible_x_range(double mu, Branch kind) {
  if (kind == Branch::hot && mu > 0.0) return {1.0, 1.0 / mu};
  return {1.0, std::numeric_limits<double>::infinity()};
}

double branch_p_max(double mu) { return 0.5 * (1.0 - mu); }

// ---------------------------------------------------------------------------

BranchPair branch_constants(double K, double z) {
  require_rate(K, z);
  return {-std::sqrt(-K), std::sqrt(-z * K)};
}

double adiabatic_f(double p, double K, double z) {
  require_probability(p, "adiabatic_f");
  const auto [mc, mh] = branch_constants(K, z);
  // Delta - mu on each branch, written without cancellation
  const double q = 4.0 * p * (1.0 - p);
  const double dc = std::sqrt(mc * mc + q) - mc;
  const double dh = q / (std::sqrt(mh * mh + q) + mh);
  const double sz = std::sqrt(z);
  return dc / dh - dh / dc + 2.0 * sz * (std::log(dc / (2.0 * p)) - std::log(dh / (2.0 * p)) / z);
}

double adiabatic_f_dp(double p, double K, double z) {
  require_probability(p, "adiabatic_f_dp");
  const auto [mc, mh] = branch_constants(K, z);
  const double xc = x_of_p(p, mc);
  const double xh = x_of_p(p, mh);
  const double sz = std::sqrt(z);
  const double df_dxc = 1.0 / xh + xh / (xc * xc) + 2.0 * sz / xc;
  const double df_dxh = -xc / (xh * xh) - 1.0 / xc - 2.0 / (sz * xh);
  return df_dxc / dp_dx(xc, mc) + df_dxh / dp_dx(xh, mh);
}

double tangency_residual(double p, double K, double z) {
  const auto [mc, mh] = branch_constants(K, z);
  const double xc = x_of_p(p, mc);
  const double xh = x_of_p(p, mh);
  return (1.0 + xc * xc) / (mc * xc) + (1.0 + xh * xh) / (mh * xh);
}

namespace {

std::vector<double> scan_nodes() {
  std::vector<double> p(kScanNodes);
  for (int i = 0; i < kScanNodes; ++i) p[i] = kScanLo + (kScanHi - kScanLo) * i / (kScanNodes - 1);
  return p;
}

struct Stationary {
  double p;
  bool minimum;
};

std::vector<Stationary> stationary_points(double K, double z) {
  static const std::vector<double> nodes = scan_nodes();
  auto fp = [&](double p) { return adiabatic_f_dp(p, K, z); };
  std::vector<Stationary> out;
  double prev = fp(nodes[0]);
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double cur = fp(nodes[i]);
    if (prev == 0.0) {
      out.push_back({nodes[i - 1], cur > 0.0});
    } else if ((prev < 0.0) != (cur < 0.0) && cur != 0.0) {
      const auto r = brent_root(fp, nodes[i - 1], nodes[i], prev, cur, 1e-15, 200);
      out.push_back({r.x, prev < 0.0});
    }
    prev = cur;
  }
  return out;
}

}  // namespace

FMinimum adiabatic_f_minimum(double K, double z) {
  require_rate(K, z);
  FMinimum best{kScanLo, adiabatic_f(kScanLo, K, z)};
  const double hi = adiabatic_f(kScanHi, K, z);
  if (hi < best.f) best = {kScanHi, hi};
  for (const auto& s : stationary_points(K, z)) {
    if (!s.minimum) continue;
    const double v = adiabatic_f(s.p, K, z);
    if (v < best.f) best = {s.p, v};
  }
  return best;
}

JumpPoints find_jump_points(double K, double z) {
  require_rate(K, z);
  auto f = [&](double p) { return adiabatic_f(p, K, z); };
  std::vector<double> breaks{kScanLo};
  for (const auto& s : stationary_points(K, z)) breaks.push_back(s.p);
  breaks.push_back(kScanHi);

  std::vector<double> roots;
  double fa = f(breaks[0]);
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    const double fb = f(breaks[i]);
    if (fa == 0.0) {
      roots.push_back(breaks[i - 1]);
    } else if ((fa < 0.0) != (fb < 0.0) && fb != 0.0) {
      roots.push_back(brent_root(f, breaks[i - 1], breaks[i], fa, fb, 1e-15, 300).x);
    }
    fa = fb;
  }

  if (roots.size() < 2) {
    // tangent case: f touches zero at its minimum
    const FMinimum m = adiabatic_f_minimum(K, z);
    if (std::fabs(m.f) <= kDoubleRootTol) return {m.p, m.p};
    throw NoJumpPoints("no adiabatic jump points at K=" + std::to_string(K) + " (below the threshold K*)");
  }
  if (roots.size() != 2) {
    throw SolverFailure("expected two jump points, found " + std::to_string(roots.size()));
  }
  return {roots.front(), roots.back()};
}

double critical_rate(double z) { return solve_engine(z).K_star; }

AsymptoticLimit asymptotic_limit() {
  const double theta = 0.25 * lambert_w0(std::exp(-1.0));
  return {theta, 2.0 * theta / (1.0 + 4.0 * theta)};
}

EngineSolution solve_engine(double z) {
  if (!(z > 0.0 && z < 1.0)) throw DomainError("z must lie in (0, 1)");
  const double theta = asymptotic_limit().theta;

  // m(g) = min_p f(p; -g) increases with g and changes sign at g = -K*
  auto m_of_log = [&](double t) { return adiabatic_f_minimum(-std::exp(t), z).f; };
  double t_hi = std::log(theta / z);
  double m_hi = m_of_log(t_hi);
  for (int i = 0; m_hi <= 0.0; ++i) {
    if (i > 60) throw SolverFailure("could not bracket K* from below");
    t_hi += std::log(4.0);
    m_hi = m_of_log(t_hi);
  }
  double t_lo = t_hi - std::log(4.0);
  double m_lo = m_of_log(t_lo);
  for (int i = 0; m_lo >= 0.0; ++i) {
    if (i > 400) throw SolverFailure("could not bracket K* from above");
    t_hi = t_lo;
    m_hi = m_lo;
    t_lo -= std::log(4.0);
    m_lo = m_of_log(t_lo);
  }
  const auto root = brent_root(m_of_log, t_lo, t_hi, m_lo, m_hi, 1e-15, 300);
  if (!root.converged) throw SolverFailure("K* search did not converge");

  double K = -std::exp(root.x);
  double p = adiabatic_f_minimum(K, z).p;

  // damped Newton polish on (f, df/dp) = 0
  auto residual = [&](double k, double q) {
    return std::array<double, 2>{adiabatic_f(q, k, z), adiabatic_f_dp(q, k, z)};
  };
  auto norm = [](const std::array<double, 2>& r) { return std::max(std::fabs(r[0]), std::fabs(r[1])); };
  auto r = residual(K, p);
  for (int it = 0; it < 20 && norm(r) > 1e-15; ++it) {
    const double hk = 1e-7 * std::fabs(K);
    const double hp = 1e-7 * std::min(p, 1.0 - p);
    const auto rk1 = residual(K + hk, p), rk0 = residual(K - hk, p);
    const auto rp1 = residual(K, p + hp), rp0 = residual(K, p - hp);
    const double a = (rk1[0] - rk0[0]) / (2 * hk), b = (rp1[0] - rp0[0]) / (2 * hp);
    const double c = (rk1[1] - rk0[1]) / (2 * hk), d = (rp1[1] - rp0[1]) / (2 * hp);
    const double det = a * d - b * c;
    if (!(std::fabs(det) > 0.0) || !std::isfinite(det)) break;
    const double dK = -(d * r[0] - b * r[1]) / det;
    const double dp = -(-c * r[0] + a * r[1]) / det;
    bool improved = false;
    for (double lam = 1.0; lam > 1e-4; lam *= 0.5) {
      const double Kn = K + lam * dK, pn = p + lam * dp;
      if (!(Kn < 0.0) || !(pn > 0.0 && pn < 1.0)) continue;
      const auto rn = residual(Kn, pn);
      if (norm(rn) < norm(r)) {
        K = Kn, p = pn, r = rn;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  const auto [mc, mh] = branch_constants(K, z);
  EngineSolution s;
  s.z = z;
  s.K_star = K;
  s.p_star = p;
  s.u_c_star = u_of_x(x_of_p(p, mc), 1.0);
  s.u_h_star = u_of_x(x_of_p(p, mh), z);
  s.eta_star = 1.0 - s.u_c_star / s.u_h_star;
  s.eta_carnot = 1.0 - z;
  s.eta_curzon_ahlborn = 1.0 - std::sqrt(z);
  s.g = -K;
  s.theta = theta;
  s.f_residual = r[0];
  s.tangency_residual = tangency_residual(p, K, z);
  if (!std::isfinite(s.eta_star) || !std::isfinite(s.f_residual)) {
    throw SolverFailure("engine solution is not finite (f residual " + std::to_string(r[0]) + ")");
  }
  return s;
}

}  // namespace pmpthermo::qubit
