#include "pmpthermo/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

#include "json.hpp"
#include "pmpthermo/error.hpp"
#include "pmpthermo/io.hpp"
#include "pmpthermo/roots.hpp"

namespace pmpthermo::plan {

namespace {

constexpr double kPTol = 1e-12;

double beta_of(Branch b, double z) { return b == Branch::cold ? 1.0 : z; }

Branch other(Branch b) { return b == Branch::cold ? Branch::hot : Branch::cold; }

double mu_of(Branch b, double K, double z) { return qubit::mu(K, beta_of(b, z), {b}); }

bool on_branch(double p, Branch b, double K, double z) {
  return p > 0.0 && p < 1.0 && p <= qubit::branch_p_max(mu_of(b, K, z)) + kPTol;
}

double u_on(Branch b, double p, double K, double z) {
  return qubit::isotherm_u_of_p(p, mu_of(b, K, z), beta_of(b, z));
}

double q_on(Branch b, double p, double K, double z) {
  const double m = mu_of(b, K, z);
  return qubit::costate_q(qubit::x_of_p(p, m), m, beta_of(b, z));
}

IsothermSegment make_segment(Branch b, double p0, double p1, double K, double z) {
  IsothermSegment s;
  s.branch = b;
  s.K = K;
  s.mu = mu_of(b, K, z);
  s.p0 = p0;
  s.p1 = p1;
  s.x0 = qubit::x_of_p(p0, s.mu);
  s.x1 = qubit::x_of_p(p1, s.mu);
  s.duration = qubit::isotherm_time(s.x0, s.x1, s.mu);
  s.heat = qubit::isotherm_heat(s.x0, s.x1, s.mu, beta_of(b, z));
  return s;
}

void check_endpoint(const Endpoint& e, const char* which) {
  if (!(e.p > 0.0 && e.p < 1.0)) throw DomainError(std::string(which) + " population must lie in (0, 1)");
  if (!std::isfinite(e.u)) throw DomainError(std::string(which) + " gap must be finite");
}

std::vector<Branch> candidates(const Endpoint& e, Attachment a, double K, double z) {
  const bool c_ok = on_branch(e.p, Branch::cold, K, z);
  const bool h_ok = on_branch(e.p, Branch::hot, K, z);
  switch (a) {
    case Attachment::cold:
      return c_ok ? std::vector<Branch>{Branch::cold} : std::vector<Branch>{};
    case Attachment::hot:
      return h_ok ? std::vector<Branch>{Branch::hot} : std::vector<Branch>{};
    case Attachment::nearest:
      break;
  }
  if (c_ok && h_ok) {
    const double uc = u_on(Branch::cold, e.p, K, z);
    const double uh = u_on(Branch::hot, e.p, K, z);
    const Branch lower = uc <= uh ? Branch::cold : Branch::hot;
    if (e.u <= std::min(uc, uh)) return {lower};
    if (e.u >= std::max(uc, uh)) return {other(lower)};
    return {Branch::cold, Branch::hot};
  }
  if (c_ok) return {Branch::cold};
  if (h_ok) return {Branch::hot};
  return {};
}

struct Route {
  std::vector<Branch> branches;
  std::vector<double> switches;  // populations of the jumps between branches
  double time = 0.0;
};

bool direction_ok(Branch b, double p_start, double p_end) {
  return b == Branch::cold ? p_start >= p_end - kPTol : p_start <= p_end + kPTol;
}

std::optional<Route> evaluate_route(std::vector<Branch> branches, std::vector<double> switches, const Endpoint& in,
                                    const Endpoint& out, double K, double z) {
  Route r{std::move(branches), std::move(switches), 0.0};
  double p = in.p;
  for (std::size_t i = 0; i < r.branches.size(); ++i) {
    const double p_end = i + 1 < r.branches.size() ? r.switches[i] : out.p;
    const Branch b = r.branches[i];
    if (!on_branch(p, b, K, z) || !on_branch(p_end, b, K, z) || !direction_ok(b, p, p_end)) return std::nullopt;
    if (p != p_end) r.time += make_segment(b, p, p_end, K, z).duration;
    p = p_end;
  }
  return r;
}

std::vector<Route> feasible_routes(const Endpoint& in, const Endpoint& out, double K, double z,
                                   const std::optional<qubit::JumpPoints>& jumps, const BuildOptions& options) {
  std::vector<double> switch_points;
  if (jumps) {
    switch_points.push_back(jumps->p_ad1);
    if (jumps->p_ad2 != jumps->p_ad1) switch_points.push_back(jumps->p_ad2);
  }
  std::vector<Route> routes;
  auto consider = [&](std::vector<Branch> b, std::vector<double> s) {
    if (auto r = evaluate_route(std::move(b), std::move(s), in, out, K, z)) routes.push_back(std::move(*r));
  };
  for (Branch first : candidates(in, options.attach_in, K, z)) {
    for (Branch last : candidates(out, options.attach_out, K, z)) {
      if (first == last) {
        consider({first}, {});
        for (double s1 : switch_points) {
          for (double s2 : switch_points) {
            if (s1 != s2) consider({first, other(first), first}, {s1, s2});
          }
        }
      } else {
        for (double s : switch_points) consider({first, last}, {s});
      }
    }
  }
  // stable: enumeration order breaks ties
  std::stable_sort(routes.begin(), routes.end(), [](const Route& a, const Route& b) { return a.time < b.time; });
  return routes;
}

std::vector<Step> route_steps(const Route& r, const Endpoint& in, const Endpoint& out, double K, double z) {
  std::vector<Step> steps;
  const Branch first = r.branches.front();
  const Branch last = r.branches.back();
  const double u_first = u_on(first, in.p, K, z);
  if (u_first != in.u) steps.push_back(BoundaryQuench{in.p, in.u, u_first, first});
  double p = in.p;
  for (std::size_t i = 0; i < r.branches.size(); ++i) {
    const Branch b = r.branches[i];
    const double p_end = i + 1 < r.branches.size() ? r.switches[i] : out.p;
    if (p != p_end) steps.push_back(make_segment(b, p, p_end, K, z));
    if (i + 1 < r.branches.size()) {
      const Branch nb = r.branches[i + 1];
      steps.push_back(AdiabaticJump{p_end, u_on(b, p_end, K, z), u_on(nb, p_end, K, z), b, nb});
    }
    p = p_end;
  }
  const double u_last = u_on(last, out.p, K, z);
  if (u_last != out.u) steps.push_back(BoundaryQuench{out.p, u_last, out.u, last});
  return steps;
}

std::vector<Step> cycle_steps(Branch start, double p_start, const qubit::JumpPoints& jp, double K, double z) {
  // walk the loop hot p_ad1 -> p_ad2 -> cold p_ad2 -> p_ad1 from the anchor
  const double a = jp.p_ad1, b = jp.p_ad2;
  struct Leg {
    Branch branch;
    double p0, p1;
  };
  const std::array<Leg, 2> legs{{{Branch::hot, a, b}, {Branch::cold, b, a}}};
  int idx = start == Branch::hot ? 0 : 1;
  std::vector<Step> out;
  auto emit_leg = [&](const Leg& leg, double from, double to) {
    if (from != to) out.push_back(make_segment(leg.branch, from, to, K, z));
  };
  auto emit_jump = [&](Branch from, double p) {
    out.push_back(AdiabaticJump{p, u_on(from, p, K, z), u_on(other(from), p, K, z), from, other(from)});
  };
  const Leg& l0 = legs[idx];
  if (p_start == l0.p0) {
    emit_leg(l0, l0.p0, l0.p1);
    emit_jump(l0.branch, l0.p1);
    const Leg& l1 = legs[1 - idx];
    emit_leg(l1, l1.p0, l1.p1);
    emit_jump(l1.branch, l1.p1);
  } else {
    // anchored at the end of this branch's leg: jump first
    emit_jump(l0.branch, l0.p1);
    const Leg& l1 = legs[1 - idx];
    emit_leg(l1, l1.p0, l1.p1);
    emit_jump(l1.branch, l1.p1);
    emit_leg(l0, l0.p0, l0.p1);
  }
  return out;
}

bool covers(const IsothermSegment& s, double p) {
  return p >= std::min(s.p0, s.p1) - kPTol && p <= std::max(s.p0, s.p1) + kPTol;
}

std::optional<std::vector<Step>> insert_cycles(const std::vector<Step>& base, int n, const qubit::JumpPoints& jp,
                                               double K, double z) {
  if (n == 0) return base;
  const std::array<std::pair<Branch, double>, 4> anchors{
      {{Branch::hot, jp.p_ad2}, {Branch::cold, jp.p_ad1}, {Branch::hot, jp.p_ad1}, {Branch::cold, jp.p_ad2}}};
  for (const auto& [branch, pa] : anchors) {
    for (std::size_t i = 0; i < base.size(); ++i) {
      std::vector<Step> before(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(i));
      std::vector<Step> after;
      bool hit = false;
      if (const auto* s = std::get_if<IsothermSegment>(&base[i]); s && s->branch == branch && covers(*s, pa)) {
        if (s->p0 != pa) before.push_back(make_segment(branch, s->p0, pa, K, z));
        if (pa != s->p1) after.push_back(make_segment(branch, pa, s->p1, K, z));
        hit = true;
      } else if (const auto* j = std::get_if<AdiabaticJump>(&base[i]); j && j->p == pa) {
        if (j->from_branch == branch) {
          after.push_back(*j);
          hit = true;
        } else if (j->to_branch == branch) {
          before.push_back(*j);
          hit = true;
        }
      } else if (const auto* q = std::get_if<BoundaryQuench>(&base[i]); q && q->branch == branch && q->p == pa) {
        // entry quench lands on the anchor; exit quench leaves from it
        if (i == 0) {
          before.push_back(*q);
        } else {
          after.push_back(*q);
        }
        hit = true;
      }
      if (!hit) continue;
      std::vector<Step> out = std::move(before);
      const auto loop = cycle_steps(branch, pa, jp, K, z);
      for (int k = 0; k < n; ++k) out.insert(out.end(), loop.begin(), loop.end());
      out.insert(out.end(), after.begin(), after.end());
      out.insert(out.end(), base.begin() + static_cast<std::ptrdiff_t>(i) + 1, base.end());
      return out;
    }
  }
  return std::nullopt;
}

void fill_totals(TrajectoryPlan& plan) {
  plan.total_time = 0.0;
  plan.total_heat = 0.0;
  for (const auto& step : plan.steps) {
    if (const auto* s = std::get_if<IsothermSegment>(&step)) {
      plan.total_time += s->duration;
      plan.total_heat += s->heat;
    }
  }
}

}  // namespace

CycleDecomposition cycle_decomposition(double K, double z) {
  qubit::JumpPoints jp;
  try {
    jp = qubit::find_jump_points(K, z);
  } catch (const NoJumpPoints&) {
    throw NoJumpPoints("no inner cycle exists at K=" + io::format_number(K) + " (below the threshold K*)");
  }
  CycleDecomposition c;
  c.p_ad1 = jp.p_ad1;
  c.p_ad2 = jp.p_ad2;
  if (jp.p_ad1 == jp.p_ad2) {
    c.rate = K;
    return c;
  }
  const auto hot = make_segment(Branch::hot, jp.p_ad1, jp.p_ad2, K, z);
  const auto cold = make_segment(Branch::cold, jp.p_ad2, jp.p_ad1, K, z);
  c.tau_hot = hot.duration;
  c.tau_cold = cold.duration;
  c.heat_hot = hot.heat;
  c.heat_cold = cold.heat;
  c.tau_cycle = c.tau_hot + c.tau_cold;
  c.heat_cycle = c.heat_hot + c.heat_cold;
  c.rate = c.heat_cycle / c.tau_cycle;
  return c;
}

TrajectoryPlan build_trajectory(Endpoint in, Endpoint out, double K, double z, int n_cycles,
                                const BuildOptions& options) {
  check_endpoint(in, "initial");
  check_endpoint(out, "final");
  if (!(K < 0.0) || !std::isfinite(K)) throw DomainError("K must be negative and finite");
  if (!(z > 0.0 && z < 1.0)) throw DomainError("z must lie in (0, 1)");
  if (n_cycles < 0) throw DomainError("n_cycles must be non-negative");

  TrajectoryPlan plan;
  plan.K = K;
  plan.z = z;
  plan.in = in;
  plan.out = out;
  plan.n_cycles = n_cycles;

  if (in.p == out.p && n_cycles == 0) {
    // a bare quench (or nothing) is already optimal
    if (in.u != out.u) {
      const Branch b = on_branch(in.p, Branch::cold, K, z) ? Branch::cold : Branch::hot;
      plan.steps.push_back(BoundaryQuench{in.p, in.u, out.u, b});
    }
    return plan;
  }

  std::optional<qubit::JumpPoints> jumps;
  try {
    jumps = qubit::find_jump_points(K, z);
  } catch (const NoJumpPoints&) {
    if (n_cycles > 0) throw Unreachable("no inner cycle exists at K=" + io::format_number(K) + " below the threshold K*");
  }

  const auto routes = feasible_routes(in, out, K, z, jumps, options);
  for (const auto& route : routes) {
    auto base = route_steps(route, in, out, K, z);
    auto steps = jumps ? insert_cycles(base, n_cycles, *jumps, K, z) : std::optional<std::vector<Step>>(base);
    if (!steps) continue;
    plan.steps = std::move(*steps);
    double p = in.p;
    for (std::size_t i = 0; i < route.branches.size(); ++i) {
      const double p_end = i + 1 < route.branches.size() ? route.switches[i] : out.p;
      if (p != p_end) {
        const auto s = make_segment(route.branches[i], p, p_end, K, z);
        (route.branches[i] == Branch::cold ? plan.tau_cold : plan.tau_hot) += s.duration;
        (route.branches[i] == Branch::cold ? plan.heat_cold : plan.heat_hot) += s.heat;
      }
      p = p_end;
    }
    if (n_cycles > 0) plan.cycle = cycle_decomposition(K, z);
    fill_totals(plan);
    return plan;
  }
  throw Unreachable("no admissible branch sequence connects (p=" + io::format_number(in.p) +
                    ", u=" + io::format_number(in.u) + ") to (p=" + io::format_number(out.p) +
                    ", u=" + io::format_number(out.u) + ") at K=" + io::format_number(K) +
                    (n_cycles > 0 ? " with inner cycles" : ""));
}

std::size_t count_isotherms(const TrajectoryPlan& plan) {
  return static_cast<std::size_t>(std::count_if(plan.steps.begin(), plan.steps.end(), [](const Step& s) {
    return std::holds_alternative<IsothermSegment>(s);
  }));
}

std::size_t count_jumps(const TrajectoryPlan& plan) {
  return static_cast<std::size_t>(std::count_if(plan.steps.begin(), plan.steps.end(), [](const Step& s) {
    return std::holds_alternative<AdiabaticJump>(s);
  }));
}

// ---------------------------------------------------------------------------
// Monotonicity in K at fixed endpoint populations

std::pair<double, double> segment_time_heat(const SegmentSpec& spec, double K) {
  const auto s = make_segment(spec.branch, spec.p0, spec.p1, K, spec.z);
  return {s.duration, s.heat};
}

std::vector<MonotonicityRow> monotonicity_profile(const std::vector<double>& K_grid, const SegmentSpec& spec) {
  std::vector<MonotonicityRow> rows;
  rows.reserve(K_grid.size());
  for (double K : K_grid) {
    const double m = mu_of(spec.branch, K, spec.z);
    const double x0 = qubit::x_of_p(spec.p0, m);
    const double x1 = qubit::x_of_p(spec.p1, m);
    MonotonicityRow r;
    r.K = K;
    r.dtau_dK = (std::atan(x1) - std::atan(x0)) / (K * m);
    r.dQ_dK = K * r.dtau_dK;
    // fourth-order central differences
    const double h = 1e-3 * std::fabs(K);
    const auto f2 = segment_time_heat(spec, K + 2 * h), f1 = segment_time_heat(spec, K + h);
    const auto b1 = segment_time_heat(spec, K - h), b2 = segment_time_heat(spec, K - 2 * h);
    r.dtau_dK_numeric = (-f2.first + 8 * f1.first - 8 * b1.first + b2.first) / (12 * h);
    r.dQ_dK_numeric = (-f2.second + 8 * f1.second - 8 * b1.second + b2.second) / (12 * h);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Deadline search

namespace {

std::optional<TrajectoryPlan> try_build(const Endpoint& in, const Endpoint& out, double K, double z, int n,
                                        const BuildOptions& opt) {
  try {
    return build_trajectory(in, out, K, z, n, opt);
  } catch (const Unreachable&) {
    return std::nullopt;
  }
}

// Smallest K in [lo, 0) for which a plan exists, assuming feasibility only
// improves as K grows toward zero.
std::optional<double> feasibility_edge(const Endpoint& in, const Endpoint& out, double z, int n,
                                       const BuildOptions& opt, double lo) {
  if (try_build(in, out, lo, z, n, opt)) return lo;
  double hi = lo;
  for (int i = 0; i < 80; ++i) {
    hi *= 0.5;
    if (try_build(in, out, hi, z, n, opt)) break;
    if (i == 79) return std::nullopt;
  }
  double a = hi * 2.0;  // infeasible
  for (int i = 0; i < 200 && std::fabs(hi - a) > 1e-14 * std::fabs(hi); ++i) {
    const double mid = 0.5 * (a + hi);
    if (try_build(in, out, mid, z, n, opt)) {
      hi = mid;
    } else {
      a = mid;
    }
  }
  return hi;
}

}  // namespace

TrajectoryPlan plan_for_deadline(Endpoint in, Endpoint out, double z, double tau_target,
                                 const DeadlineOptions& options) {
  check_endpoint(in, "initial");
  check_endpoint(out, "final");
  if (!(z > 0.0 && z < 1.0)) throw DomainError("z must lie in (0, 1)");
  if (!(tau_target > 0.0) || !std::isfinite(tau_target)) throw DomainError("deadline must be positive and finite");

  const double K_star = qubit::critical_rate(z);
  double min_time = std::numeric_limits<double>::infinity();
  std::optional<TrajectoryPlan> best;
  const double time_tol = 1e-9 * std::max(1.0, tau_target);

  for (Attachment ai : {Attachment::cold, Attachment::hot}) {
    for (Attachment ao : {Attachment::cold, Attachment::hot}) {
      const BuildOptions opt{ai, ao};
      std::optional<double> edge0 = feasibility_edge(in, out, z, 0, opt, options.K_floor);
      if (!edge0 && !feasibility_edge(in, out, z, 0, opt, K_star)) continue;
      if (!edge0) edge0 = feasibility_edge(in, out, z, 0, opt, K_star);
      const std::optional<double> edge1 = feasibility_edge(in, out, z, 1, opt, K_star);

      int since_best = 0;
      double combo_best = std::numeric_limits<double>::infinity();
      for (int n = 0; n <= options.n_max; ++n) {
        const std::optional<double> edge = n == 0 ? edge0 : edge1;
        if (!edge) break;
        auto tau_of = [&](double K) { return try_build(in, out, K, z, n, opt)->total_time - tau_target; };
        const double lo_val = tau_of(*edge);
        min_time = std::min(min_time, lo_val + tau_target);
        if (lo_val > 0.0) break;  // more cycles only take longer
        double K_hi = *edge;
        double hi_val = lo_val;
        for (int i = 0; i < 200 && hi_val <= 0.0; ++i) {
          K_hi *= 0.25;
          hi_val = tau_of(K_hi);
        }
        if (hi_val <= 0.0) continue;
        double K_sol = *edge;
        if (lo_val < 0.0) {
          K_sol = brent_root(tau_of, *edge, K_hi, lo_val, hi_val, 1e-15 * std::fabs(*edge), 300).x;
        }
        auto plan = try_build(in, out, K_sol, z, n, opt);
        if (!plan || std::fabs(plan->total_time - tau_target) > time_tol) continue;
        const double q = plan->total_heat;
        const double tie = 1e-12 * (1.0 + std::fabs(q));
        if (!best || q < best->total_heat - tie || (std::fabs(q - best->total_heat) <= tie && n > best->n_cycles)) {
          best = std::move(plan);
        }
        if (q < combo_best - tie) {
          combo_best = q;
          since_best = 0;
        } else if (++since_best > options.patience) {
          break;
        }
      }
    }
  }
  if (!best) {
    throw DeadlineInfeasible("deadline " + io::format_number(tau_target) +
                                 " is infeasible; the shortest admissible plan takes " + io::format_number(min_time),
                             min_time);
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Validation, simulation and export

OpenSystem plan_system(double z) { return OpenSystem::qubit(1.0, z); }

PlanValidation validate_plan(const TrajectoryPlan& plan, std::size_t samples_per_segment) {
  PlanValidation v;
  const OpenSystem sys = plan_system(plan.z);
  for (const auto& step : plan.steps) {
    if (const auto* s = std::get_if<IsothermSegment>(&step)) {
      const auto traj = pmp::qubit_isotherm_nodes(plan.K, s->branch, s->x0, s->x1, sys, samples_per_segment);
      const auto r = pmp::conserved_k_residual(traj, sys);
      v.residuals.max_conservation = std::max(v.residuals.max_conservation, r.max_conservation);
      v.residuals.max_stationarity = std::max(v.residuals.max_stationarity, r.max_stationarity);
      v.residuals.max_costate_ode = std::max(v.residuals.max_costate_ode, r.max_costate_ode);
      v.residuals.nodes += r.nodes;
      for (const auto& node : traj.nodes) {
        const double A = pmp::switching_functional(node.rho, node.pi, node.control, sys);
        const bool ok = s->branch == Branch::cold ? A >= -pmp::kTieTolerance : A <= pmp::kTieTolerance;
        v.bang_bang_consistent = v.bang_bang_consistent && ok;
      }
    } else if (const auto* j = std::get_if<AdiabaticJump>(&step)) {
      const double mf = mu_of(j->from_branch, plan.K, plan.z), mt = mu_of(j->to_branch, plan.K, plan.z);
      const double pf = qubit::isotherm_p(qubit::x_of_u(j->u_from, beta_of(j->from_branch, plan.z)), mf);
      const double pt = qubit::isotherm_p(qubit::x_of_u(j->u_to, beta_of(j->to_branch, plan.z)), mt);
      v.max_jump_dp = std::max(v.max_jump_dp, std::fabs(pf - pt));
      v.max_jump_dq = std::max(v.max_jump_dq, std::fabs(q_on(j->from_branch, j->p, plan.K, plan.z) -
                                                        q_on(j->to_branch, j->p, plan.K, plan.z)));
    }
  }
  return v;
}

double segment_x_at(const IsothermSegment& seg, double t) {
  if (t <= 0.0) return seg.x0;
  if (t >= seg.duration) return seg.x1;
  const double target = qubit::chi(seg.x0, seg.mu) + t;
  auto g = [&](double x) { return qubit::chi(x, seg.mu) - target; };
  const double lo = std::min(seg.x0, seg.x1), hi = std::max(seg.x0, seg.x1);
  const double glo = g(lo), ghi = g(hi);
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  if ((glo < 0.0) == (ghi < 0.0)) return std::fabs(glo) < std::fabs(ghi) ? lo : hi;
  return brent_root(g, lo, hi, glo, ghi, 4e-16 * hi, 200).x;
}

Protocol to_protocol(const TrajectoryPlan& plan) {
  Protocol protocol;
  auto constant = [](double u) {
    ControlVector c;
    c.hamiltonian_params = {u};
    c.gamma_c = 1.0;
    return c;
  };
  protocol.append_constant(0.0, constant(plan.in.u));
  double t = 0.0;
  for (const auto& step : plan.steps) {
    const auto* s = std::get_if<IsothermSegment>(&step);
    if (!s) continue;
    const double beta = beta_of(s->branch, plan.z);
    const double gc = s->branch == Branch::cold ? 1.0 : 0.0;
    const IsothermSegment seg = *s;
    const double t0 = t;
    ProtocolPiece piece;
    piece.t_begin = t0;
    piece.t_end = t0 + seg.duration;
    piece.control = [seg, beta, gc, t0](double time) {
      ControlVector c;
      c.hamiltonian_params = {qubit::u_of_x(segment_x_at(seg, time - t0), beta)};
      c.gamma_c = gc;
      c.gamma_h = 1.0 - gc;
      return c;
    };
    piece.control_rate = [seg, beta, t0](double time) {
      const double x = segment_x_at(seg, time - t0);
      return std::vector<double>{2.0 * qubit::x_rate(x, seg.mu) / (beta * x)};
    };
    protocol.append(std::move(piece));
    t += seg.duration;
  }
  protocol.append_constant(0.0, constant(plan.out.u));
  return protocol;
}

std::string plan_json(const TrajectoryPlan& plan, const OutputScale& scale) {
  using nlohmann::ordered_json;
  const auto r = io::round15;
  const double E = scale.energy, T = scale.time;
  ordered_json j;
  j["K"] = r(plan.K * E / T);
  j["z"] = r(plan.z);
  j["n_cycles"] = plan.n_cycles;
  j["total_time"] = r(plan.total_time * T);
  j["total_heat"] = r(plan.total_heat * E);
  j["p_in"] = r(plan.in.p);
  j["u_in"] = r(plan.in.u * E);
  j["p_out"] = r(plan.out.p);
  j["u_out"] = r(plan.out.u * E);
  j["n_jumps"] = count_jumps(plan);
  ordered_json segs = ordered_json::array();
  for (const auto& step : plan.steps) {
    ordered_json e;
    if (const auto* s = std::get_if<IsothermSegment>(&step)) {
      e["type"] = "isotherm";
      e["branch"] = qubit::branch_name(s->branch);
      e["p0"] = r(s->p0);
      e["p1"] = r(s->p1);
      e["x0"] = r(s->x0);
      e["x1"] = r(s->x1);
      e["duration"] = r(s->duration * T);
      e["heat"] = r(s->heat * E);
    } else if (const auto* jmp = std::get_if<AdiabaticJump>(&step)) {
      e["type"] = "jump";
      e["branch"] = std::string(qubit::branch_name(jmp->from_branch)) + "->" + qubit::branch_name(jmp->to_branch);
      e["p"] = r(jmp->p);
      e["x0"] = r(qubit::x_of_u(jmp->u_from, beta_of(jmp->from_branch, plan.z)));
      e["x1"] = r(qubit::x_of_u(jmp->u_to, beta_of(jmp->to_branch, plan.z)));
      e["u_from"] = r(jmp->u_from * E);
      e["u_to"] = r(jmp->u_to * E);
      e["duration"] = 0;
      e["heat"] = 0;
    } else {
      const auto& q = std::get<BoundaryQuench>(step);
      e["type"] = "quench";
      e["branch"] = qubit::branch_name(q.branch);
      e["p"] = r(q.p);
      e["u_from"] = r(q.u_from * E);
      e["u_to"] = r(q.u_to * E);
      e["duration"] = 0;
      e["heat"] = 0;
    }
    segs.push_back(std::move(e));
  }
  j["segments"] = std::move(segs);
  return j.dump(2) + "\n";
}

void write_plan_csv(std::ostream& out, const TrajectoryPlan& plan, std::size_t points_per_segment,
                    const OutputScale& scale) {
  using io::format_number;
  if (points_per_segment < 2) throw DomainError("need at least two points per segment");
  const double E = scale.energy, T = scale.time;
  out << "t,u,p,q,branch,Qcum\n";
  out << "0," << format_number(plan.in.u * E) << ',' << format_number(plan.in.p) << ",,in,0\n";
  double t = 0.0, heat = 0.0;
  for (const auto& step : plan.steps) {
    const auto* s = std::get_if<IsothermSegment>(&step);
    if (!s) continue;
    const double beta = beta_of(s->branch, plan.z);
    const double xi0 = qubit::xi(s->x0, s->mu);
    for (std::size_t k = 0; k < points_per_segment; ++k) {
      const double dt = s->duration * static_cast<double>(k) / static_cast<double>(points_per_segment - 1);
      const double x = segment_x_at(*s, dt);
      out << format_number((t + dt) * T) << ',' << format_number(qubit::u_of_x(x, beta) * E) << ','
          << format_number(qubit::isotherm_p(x, s->mu)) << ','
          << format_number(qubit::costate_q(x, s->mu, beta) * E) << ',' << qubit::branch_name(s->branch) << ','
          << format_number((heat + (qubit::xi(x, s->mu) - xi0) / beta) * E) << '\n';
    }
    t += s->duration;
    heat += s->heat;
  }
  out << format_number(t * T) << ',' << format_number(plan.out.u * E) << ',' << format_number(plan.out.p) << ",,out,"
      << format_number(heat * E) << '\n';
}

IsothermSegment isotherm_between_gaps(Branch branch, double K, double z, double u0, double u1) {
  if (!(K < 0.0)) throw DomainError("K must be negative");
  if (!(z > 0.0 && z < 1.0)) throw DomainError("z must lie in (0, 1)");
  const double beta = beta_of(branch, z);
  IsothermSegment s;
  s.branch = branch;
  s.K = K;
  s.mu = mu_of(branch, K, z);
  s.x0 = qubit::x_of_u(u0, beta);
  s.x1 = qubit::x_of_u(u1, beta);
  const auto range = qubit::admissible_x_range(s.mu, branch);
  if (!range.contains(s.x0) || !range.contains(s.x1)) {
    throw DomainError(std::string("gap outside the admissible range of the ") + qubit::branch_name(branch) +
                      " branch, x in [" + io::format_number(range.lo) + ", " + io::format_number(range.hi) + "]");
  }
  s.p0 = qubit::isotherm_p(s.x0, s.mu);
  s.p1 = qubit::isotherm_p(s.x1, s.mu);
  s.duration = qubit::isotherm_time(s.x0, s.x1, s.mu);
  s.heat = qubit::isotherm_heat(s.x0, s.x1, s.mu, beta);
  return s;
}

TrajectoryPlan plan_from_segment(const IsothermSegment& seg, double z) {
  TrajectoryPlan plan;
  plan.K = seg.K;
  plan.z = z;
  const double beta = beta_of(seg.branch, z);
  plan.in = {seg.p0, qubit::u_of_x(seg.x0, beta)};
  plan.out = {seg.p1, qubit::u_of_x(seg.x1, beta)};
  if (seg.duration > 0.0) plan.steps.push_back(seg);
  (seg.branch == Branch::cold ? plan.tau_cold : plan.tau_hot) = seg.duration;
  (seg.branch == Branch::cold ? plan.heat_cold : plan.heat_hot) = seg.heat;
  fill_totals(plan);
  return plan;
}

}  // namespace pmpthermo::plan
