#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "pmpthermo/cli.hpp"
#include "pmpthermo/error.hpp"
#include "pmpthermo/io.hpp"
#include "pmpthermo/lambert_w.hpp"
#include "pmpthermo/lindblad.hpp"
#include "pmpthermo/ode.hpp"
#include "pmpthermo/oracle.hpp"
#include "pmpthermo/planner.hpp"
#include "pmpthermo/pmp.hpp"
#include "pmpthermo/qubit.hpp"

namespace pmpthermo::cli {
namespace {

using io::format_number;
using qubit::Branch;

struct Result {
  bool passed = false;
  std::string detail;
};

Result within(double value, double limit, const char* what) {
  return {value <= limit, std::string(what) + " " + format_number(value) + " (limit " + format_number(limit) + ")"};
}

const plan::Endpoint kIn{0.07, 1.0};
const plan::Endpoint kOut{0.26, 6.0};
constexpr double kZ = 0.3;
constexpr double kK = -0.05;

Result lambert_constant() {
  const double theta = qubit::asymptotic_limit().theta;
  return within(std::fabs(4.0 * theta * std::exp(4.0 * theta) - std::exp(-1.0)), 1e-14, "residual");
}

Result gibbs_fixed_points() {
  double worst = 0.0;
  for (std::size_t levels : {2u, 3u, 4u}) {
    const auto sys = OpenSystem::levels(levels, 1.0, kZ);
    ControlVector u;
    for (std::size_t k = 1; k < levels; ++k) u.hamiltonian_params.push_back(0.7 * static_cast<double>(k));
    for (auto [gc, gh] : {std::pair{1.0, 0.0}, std::pair{0.0, 1.0}, std::pair{0.4, 0.6}}) {
      u.gamma_c = gc;
      u.gamma_h = gh;
      const Operator rho = stationary_state(u, sys);
      worst = std::max(worst, lindblad_rhs(rho, u, sys).cwiseAbs().maxCoeff());
    }
  }
  return within(worst, 1e-12, "max |L[rho_eq]|");
}

Result single_bath_relaxation() {
  const auto sys = OpenSystem::qubit(1.0, kZ);
  Protocol protocol;
  protocol.append_constant(3.0, ControlVector{{2.0}, 1.0, 0.0});
  const auto res = integrate(DensityMatrix::qubit(0.9), protocol, sys);
  const double n = qubit_gibbs_population(1.0, 2.0);
  const double expected = n + (0.9 - n) * std::exp(-3.0);
  return within(std::fabs(res.final_state(1, 1).real() - expected), 1e-8, "|p - p_exact|");
}

Result population_round_trip() {
  double worst = 0.0;
  for (double mu : {-0.3, -0.01, 0.0, 0.05, 0.2}) {
    const double p_max = qubit::branch_p_max(mu);
    for (int k = 1; k < 100; ++k) {
      const double p = p_max * k / 100.0;
      const double x = qubit::x_of_p(p, mu);
      worst = std::max(worst, std::fabs(qubit::isotherm_p(x, mu) - p) / p);
    }
  }
  return within(worst, 1e-12, "relative p error");
}

Result closed_form_vs_ode() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const double K = -0.01 - 0.2 * unit(rng);
    const Branch b = k % 2 == 0 ? Branch::cold : Branch::hot;
    const double beta = b == Branch::cold ? 1.0 : kZ;
    const double mu = qubit::mu(K, beta, {b});
    const auto range = qubit::admissible_x_range(mu, b);
    const double hi = std::min(range.hi, 20.0);
    double x0 = 1.0 + (hi - 1.0) * (0.05 + 0.4 * unit(rng));
    double x1 = 1.0 + (hi - 1.0) * (0.55 + 0.4 * unit(rng));
    if (b == Branch::hot) std::swap(x0, x1);
    const double tau = qubit::isotherm_time(x0, x1, mu);
    const double heat = qubit::isotherm_heat(x0, x1, mu, beta);
    // y = (x, Q): dx/dt from the branch, dQ = -u dp
    Eigen::VectorXd y(2);
    y << x0, 0.0;
    ode::integrate_dopri(
        [&](double, const Eigen::VectorXd& s, Eigen::VectorXd& dy) {
          const double xd = qubit::x_rate(s[0], mu);
          dy.resize(2);
          dy[0] = xd;
          dy[1] = -qubit::u_of_x(s[0], beta) * qubit::dp_dx(s[0], mu) * xd;
        },
        0.0, tau, y, {1e-11, 1e-13}, [](double, const Eigen::VectorXd&) {});
    worst = std::max({worst, std::fabs(y[0] - x1) / x1, std::fabs(y[1] - heat) / std::fabs(heat)});
  }
  return within(worst, 1e-6, "relative deviation");
}

Result worked_plan_residuals() {
  const auto p = plan::build_trajectory(kIn, kOut, kK, kZ, 1);
  const auto v = plan::validate_plan(p);
  std::ostringstream d;
  d << "conservation " << format_number(v.residuals.max_conservation) << ", stationarity "
    << format_number(v.residuals.max_stationarity) << ", jump dq " << format_number(v.max_jump_dq);
  const bool ok = v.residuals.max_conservation < 1e-9 && v.residuals.max_stationarity < 1e-9 &&
                  v.bang_bang_consistent && v.max_jump_dp < 1e-12 && v.max_jump_dq < 1e-9;
  return {ok, d.str()};
}

Result gauge_identity() {
  const auto sys = OpenSystem::qubit(1.0, kZ);
  const auto traj = pmp::qubit_isotherm_nodes(kK, Branch::cold, 1.5, 4.0, sys, 50);
  double worst = 0.0;
  for (const auto& node : traj.nodes) {
    const Operator rho_eq = stationary_state(node.control, sys);
    worst = std::max(worst, std::fabs(pmp::lambda_from_gauge(node.pi_dot, rho_eq, node.control, sys) - node.lambda));
  }
  return within(worst, 1e-10, "max |lambda + <rho_eq pi_dot>|");
}

Result forward_simulation() {
  const auto p = plan::build_trajectory(kIn, kOut, kK, kZ, 0);
  IntegratorOptions opts;
  opts.record_samples = false;
  const auto res = integrate(DensityMatrix::qubit(kIn.p), plan::to_protocol(p), plan::plan_system(kZ), opts);
  const double dq = std::fabs(res.ledger.heat_released - p.total_heat);
  std::ostringstream d;
  d << "|Q_sim - Q_plan| " << format_number(dq) << ", first law " << format_number(res.first_law_residual)
    << ", final p error " << format_number(std::fabs(res.final_state(1, 1).real() - kOut.p));
  return {dq < 1e-6 && res.first_law_residual < 1e-8 && std::fabs(res.final_state(1, 1).real() - kOut.p) < 1e-6,
          d.str()};
}

Result engine_point() {
  const auto s = qubit::solve_engine(kZ);
  std::ostringstream d;
  d << "f " << format_number(s.f_residual) << ", tangency " << format_number(s.tangency_residual) << ", eta* "
    << format_number(s.eta_star);
  const bool ok = std::fabs(s.f_residual) <= 1e-10 && std::fabs(s.tangency_residual) <= 1e-10 &&
                  s.eta_star <= s.eta_carnot && std::fabs(s.eta_star - s.eta_curzon_ahlborn) < 0.03;
  return {ok, d.str()};
}

Result engine_sweep_shape() {
  double prev_g = INFINITY, prev_yg = INFINITY;
  bool g_dec = true, yg_dec = true, eta_ok = true;
  for (int k = 0; k < 50; ++k) {
    const double z = 0.02 + 0.96 * k / 49.0;
    const auto s = qubit::solve_engine(z);
    const double yg = z / (1.0 - z) * s.g;
    g_dec = g_dec && s.g < prev_g;
    yg_dec = yg_dec && yg < prev_yg;
    eta_ok = eta_ok && s.eta_star <= s.eta_carnot;
    prev_g = s.g;
    prev_yg = yg;
  }
  return {g_dec && yg_dec && eta_ok, std::string("g decreasing ") + (g_dec ? "yes" : "no") + ", y g decreasing " +
                                         (yg_dec ? "yes" : "no") + ", eta* <= eta_C " + (eta_ok ? "yes" : "no")};
}

Result jump_bifurcation() {
  const double Ks = qubit::critical_rate(kZ);
  const auto above = qubit::find_jump_points(0.5 * Ks, kZ);
  bool none_below = false;
  try {
    qubit::find_jump_points(1.05 * Ks, kZ);
  } catch (const NoJumpPoints&) {
    none_below = true;
  }
  const auto at = qubit::find_jump_points(Ks, kZ);
  const bool ok = above.p_ad1 < above.p_ad2 && none_below && std::fabs(at.p_ad1 - at.p_ad2) < 1e-8;
  return {ok, "root split at K* " + format_number(std::fabs(at.p_ad1 - at.p_ad2))};
}

Result quasi_static_limit() {
  const auto [tau, heat] = plan::segment_time_heat({Branch::cold, 0.5, 0.1, kZ}, -1e-8);
  const double qs = qubit::quasi_static_heat(0.5, 0.1, 1.0);
  return within(std::fabs(heat - qs) / std::fabs(qs), 1e-3, "relative deviation");
}

Result cycle_decomposition() {
  const auto base = plan::build_trajectory(kIn, kOut, kK, kZ, 0);
  const auto one = plan::build_trajectory(kIn, kOut, kK, kZ, 1);
  const auto c = plan::cycle_decomposition(kK, kZ);
  const double dt = std::fabs(one.total_time - base.total_time - c.tau_cycle);
  const double dq = std::fabs(one.total_heat - base.total_heat - c.heat_cycle);
  return {dt < 1e-10 && dq < 1e-10 && c.heat_cycle < 0.0,
          "time " + format_number(dt) + ", heat " + format_number(dq) + ", cycle heat " + format_number(c.heat_cycle)};
}

Result monotonicity() {
  std::vector<double> Ks;
  for (int k = 0; k < 10; ++k) Ks.push_back(-0.02 - 0.03 * k);
  bool ok = true;
  double worst = 0.0;
  for (const plan::SegmentSpec& spec : {plan::SegmentSpec{Branch::cold, 0.3, 0.1, kZ},
                                         plan::SegmentSpec{Branch::hot, 0.05, 0.15, kZ}}) {
    for (const auto& row : plan::monotonicity_profile(Ks, spec)) {
      ok = ok && row.dtau_dK > 0.0 && row.dQ_dK < 0.0;
      worst = std::max({worst, std::fabs(row.dtau_dK - row.dtau_dK_numeric) / std::fabs(row.dtau_dK),
                        std::fabs(row.dQ_dK - row.dQ_dK_numeric) / std::fabs(row.dQ_dK)});
    }
  }
  return {ok && worst < 1e-6, "signs " + std::string(ok ? "ok" : "wrong") + ", FD deviation " + format_number(worst)};
}

Result oracle_never_beats() {
  const double tau = plan::build_trajectory(kIn, kOut, kK, kZ, 0).total_time;
  const auto grid = oracle::ProtocolGrid::uniform(4, 12, 1.0, 12.0, tau);
  const auto ref = oracle::pmp_reference(kIn.p, kIn.u, kOut.p, kOut.u, kZ, tau, 1e-3);
  oracle::SearchOptions one;
  oracle::SearchOptions two;
  two.threads = 2;
  const auto r1 = oracle::grid_search(kIn.p, kOut.p, grid, kZ, one);
  const auto r2 = oracle::grid_search(kIn.p, kOut.p, grid, kZ, two);
  const bool ok = r1.feasible && r1.q_best >= ref.q_pmp - ref.discretization_bound && r1.q_best == r2.q_best &&
                  r1.protocol.u == r2.protocol.u && r1.protocol.bath == r2.protocol.bath;
  return {ok, "Q_brute " + format_number(r1.q_best) + ", Q_pmp " + format_number(ref.q_pmp)};
}

Result bath_selection() {
  using pmp::select_bath;
  const bool ok = select_bath(1.0, BathLabel::hot).bath == BathLabel::cold &&
                  select_bath(-1.0, BathLabel::cold).bath == BathLabel::hot &&
                  select_bath(0.0, BathLabel::hot).bath == BathLabel::hot;
  return {ok, ""};
}

}  // namespace

std::vector<CheckOutcome> run_invariant_suite() {
  const std::vector<std::pair<const char*, std::function<Result()>>> checks = {
      {"lambert_constant", lambert_constant},
      {"gibbs_fixed_points", gibbs_fixed_points},
      {"single_bath_relaxation", single_bath_relaxation},
      {"population_round_trip", population_round_trip},
      {"closed_form_vs_ode", closed_form_vs_ode},
      {"worked_plan_residuals", worked_plan_residuals},
      {"gauge_identity", gauge_identity},
      {"forward_simulation", forward_simulation},
      {"engine_point", engine_point},
      {"engine_sweep_shape", engine_sweep_shape},
      {"jump_bifurcation", jump_bifurcation},
      {"quasi_static_limit", quasi_static_limit},
      {"cycle_decomposition", cycle_decomposition},
      {"monotonicity", monotonicity},
      {"oracle_never_beats", oracle_never_beats},
      {"bath_selection", bath_selection},
  };
  std::vector<CheckOutcome> out;
  for (const auto& [name, fn] : checks) {
    CheckOutcome c{name, false, ""};
    try {
      const auto r = fn();
      c.passed = r.passed;
      c.detail = r.detail;
    } catch (const std::exception& e) {
      c.detail = std::string("threw: ") + e.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace pmpthermo::cli
