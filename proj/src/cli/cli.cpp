#include "pmpthermo/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "pmpthermo/error.hpp"
#include "pmpthermo/io.hpp"
#include "pmpthermo/oracle.hpp"
#include "pmpthermo/planner.hpp"
#include "pmpthermo/qubit.hpp"

namespace pmpthermo::cli {
namespace {

using io::format_number;
using nlohmann::ordered_json;

// Flags every subcommand accepts.
struct Common {
  double beta_c = 1.0;
  double gamma = 1.0;
  std::string output;
  std::string config;  // already expanded into the arguments

  // reduced -> user units
  double energy() const { return 1.0 / beta_c; }
  double time() const { return 1.0 / gamma; }
  double rate() const { return gamma / beta_c; }
  plan::OutputScale scale() const { return {energy(), time()}; }

  void validate() const {
    if (!(beta_c > 0.0) || !std::isfinite(beta_c)) throw DomainError("--beta-c must be positive");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("--gamma must be positive");
  }

  std::string units_line() const {
    return "# units: energy 1/beta_c, time 1/gamma, rate gamma/beta_c; beta_c=" + format_number(beta_c) +
           " gamma=" + format_number(gamma) + "\n";
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key = value file mirroring the flags; flags win");
  sub->add_option("--beta-c", c.beta_c, "cold inverse temperature (sets the energy unit)");
  sub->add_option("--gamma", c.gamma, "total coupling rate (sets the time unit)");
  sub->add_option("-o,--output", c.output, "output file (default: stdout)");
}

// Turns `key = value` lines of the --config file into flags, skipping keys
// already given on the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read config file " + path);

  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  auto trim = [](std::string t) {
    const auto b = t.find_first_not_of(" \t\r");
    const auto e = t.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : t.substr(b, e - b + 1);
  };
  std::vector<std::string> extra;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DomainError("config line without '=': " + line);
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty() || key == "config") continue;
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value == "false") continue;
    extra.push_back(flag);
    if (value != "true") extra.push_back(value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

void emit(const Common& c, const std::string& text, std::ostream& out) {
  if (c.output.empty()) {
    out << text;
  } else {
    io::write_file_atomic(c.output, text);
  }
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

ordered_json engine_json(const qubit::EngineSolution& s, const Common& c) {
  const auto r = io::round15;
  ordered_json j;
  j["z"] = r(s.z);
  j["K_star"] = r(s.K_star * c.rate());
  j["p_star"] = r(s.p_star);
  j["u_c_star"] = r(s.u_c_star * c.energy());
  j["u_h_star"] = r(s.u_h_star * c.energy());
  j["eta_star"] = r(s.eta_star);
  j["eta_carnot"] = r(s.eta_carnot);
  j["eta_curzon_ahlborn"] = r(s.eta_curzon_ahlborn);
  j["g"] = r(s.g);
  j["theta"] = r(s.theta);
  return j;
}

// ---------------------------------------------------------------------------

struct EngineArgs {
  Common common;
  double z = 0.0;
  bool schedule = false;
  std::string schedule_out = "schedule.csv";
  double half_period = 0.01;
  int periods = 5;
};

int cmd_engine(const EngineArgs& a, std::ostream& out, std::ostream& err) {
  a.common.validate();
  if (!(a.half_period > 0.0)) throw DomainError("--half-period must be positive");
  if (a.periods < 1) throw DomainError("--periods must be at least 1");
  const auto s = qubit::solve_engine(a.z);
  err << a.common.units_line();
  emit(a.common, dump(engine_json(s, a.common)), out);
  if (a.schedule) {
    // square wave: hot contact at u_h*, cold contact at u_c*, equal halves
    std::ostringstream csv;
    csv << a.common.units_line() << "t,u,bath\n";
    const double E = a.common.energy();
    for (int k = 0; k < 2 * a.periods; ++k) {
      const bool hot = k % 2 == 0;
      const double u = (hot ? s.u_h_star : s.u_c_star) * E;
      const char* bath = hot ? "hot" : "cold";
      csv << format_number(k * a.half_period) << ',' << format_number(u) << ',' << bath << '\n';
      csv << format_number((k + 1) * a.half_period) << ',' << format_number(u) << ',' << bath << '\n';
    }
    io::write_file_atomic(a.schedule_out, csv.str());
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  Common common;
  std::string quantity = "engine";
  double z_min = 0.02;
  double z_max = 0.98;
  int steps = 50;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  a.common.validate();
  if (!(a.z_min > 0.0 && a.z_min < a.z_max && a.z_max < 1.0)) {
    throw DomainError("need 0 < z-min < z-max < 1");
  }
  if (a.steps < 2) throw DomainError("--steps must be at least 2");

  const auto n = static_cast<std::size_t>(a.steps);
  std::vector<double> zs(n);
  for (std::size_t i = 0; i < n; ++i) {
    // rounded so the solved z is the printed z
    zs[i] = io::round15(a.z_min + (a.z_max - a.z_min) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  std::vector<std::optional<qubit::EngineSolution>> solved(n);
  std::vector<std::string> failure(n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        solved[i] = qubit::solve_engine(zs[i]);
      } catch (const Error& e) {
        failure[i] = e.what();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(oracle::default_threads()), n);
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double E = a.common.energy();
  std::ostringstream csv;
  csv << a.common.units_line();
  if (a.quantity == "engine") {
    csv << "z,g,eta_star,eta_ca,eta_carnot\n";
  } else if (a.quantity == "p_star") {
    csv << "z,p_star,u_c_star,u_h_star,K_star\n";
  } else {
    csv << "y,z,y_g\n";
  }
  bool failed = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = zs[i];
    const qubit::EngineSolution s = solved[i].value_or(qubit::EngineSolution{z, nan, nan, nan, nan, nan, 1.0 - z,
                                                                             1.0 - std::sqrt(z), nan, nan, nan, nan});
    if (a.quantity == "engine") {
      csv << format_number(z) << ',' << format_number(s.g) << ',' << format_number(s.eta_star) << ','
          << format_number(s.eta_curzon_ahlborn) << ',' << format_number(s.eta_carnot) << '\n';
    } else if (a.quantity == "p_star") {
      csv << format_number(z) << ',' << format_number(s.p_star) << ',' << format_number(s.u_c_star * E) << ','
          << format_number(s.u_h_star * E) << ',' << format_number(s.K_star * a.common.rate()) << '\n';
    } else {
      const double y = z / (1.0 - z);
      csv << format_number(y) << ',' << format_number(z) << ',' << format_number(y * s.g) << '\n';
    }
    if (!solved[i]) {
      failed = true;
      csv << "# solver failure at z=" << format_number(z) << ": " << failure[i] << '\n';
      err << "solver failure at z=" << format_number(z) << ": " << failure[i] << '\n';
    }
  }
  emit(a.common, csv.str(), out);
  return failed ? kSolverFailure : kOk;
}

// ---------------------------------------------------------------------------

struct IsothermArgs {
  Common common;
  std::string branch;
  double z = 0.3;
  double K = -0.05;
  double u0 = 0.0;
  double u1 = 0.0;
  int points = 1000;
};

int cmd_isotherm(const IsothermArgs& a, std::ostream& out, std::ostream&) {
  a.common.validate();
  if (a.points < 2) throw DomainError("--points must be at least 2");
  const auto branch = a.branch == "hot" ? qubit::Branch::hot : qubit::Branch::cold;
  const double K = a.K / a.common.rate();
  const auto seg =
      plan::isotherm_between_gaps(branch, K, a.z, a.u0 * a.common.beta_c, a.u1 * a.common.beta_c);
  std::ostringstream csv;
  csv << a.common.units_line();
  plan::write_plan_csv(csv, plan::plan_from_segment(seg, a.z), static_cast<std::size_t>(a.points),
                       a.common.scale());
  emit(a.common, csv.str(), out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrajectoryArgs {
  Common common;
  double z = 0.3;
  std::optional<double> K;
  std::optional<double> deadline;
  double p_in = 0.07;
  double u_in = 1.0;
  double p_out = 0.26;
  double u_out = 6.0;
  int cycles = 0;
  int points = 1000;
  std::string plan_json;
};

int cmd_trajectory(const TrajectoryArgs& a, std::ostream& out, std::ostream& err) {
  a.common.validate();
  if (a.cycles < 0) throw DomainError("--cycles must be non-negative");
  if (a.points < 2) throw DomainError("--points must be at least 2");
  const double B = a.common.beta_c;
  const plan::Endpoint in{a.p_in, a.u_in * B};
  const plan::Endpoint out_pt{a.p_out, a.u_out * B};

  plan::TrajectoryPlan p;
  if (a.deadline) {
    p = plan::plan_for_deadline(in, out_pt, a.z, *a.deadline * a.common.gamma);
  } else {
    const double K = a.K.value_or(-0.05 * a.common.rate()) / a.common.rate();
    p = plan::build_trajectory(in, out_pt, K, a.z, a.cycles);
  }

  const auto check = plan::validate_plan(p);
  if (check.residuals.max_conservation > 1e-9 || !check.bang_bang_consistent) {
    err << "plan failed the PMP residual checks: conservation "
        << format_number(check.residuals.max_conservation) << '\n';
    return kSolverFailure;
  }

  std::ostringstream csv;
  csv << a.common.units_line();
  plan::write_plan_csv(csv, p, static_cast<std::size_t>(a.points), a.common.scale());
  emit(a.common, csv.str(), out);
  if (!a.plan_json.empty()) io::write_file_atomic(a.plan_json, plan::plan_json(p, a.common.scale()) + "\n");
  err << "isotherms " << plan::count_isotherms(p) << ", jumps " << plan::count_jumps(p) << ", cycles "
      << p.n_cycles << ", total_time " << format_number(p.total_time * a.common.time()) << ", total_heat "
      << format_number(p.total_heat * a.common.energy()) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_verify(std::ostream& out) {
  bool all = true;
  for (const auto& c : run_invariant_suite()) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) out << "  " << c.detail;
    out << '\n';
    all = all && c.passed;
  }
  return all ? kOk : kSolverFailure;
}

// ---------------------------------------------------------------------------

struct OracleArgs {
  Common common;
  double z = 0.3;
  double p_in = 0.07;
  double u_in = 1.0;
  double p_out = 0.26;
  double u_out = 6.0;
  std::optional<double> tau;
  double K = -0.05;
  int n_intervals = 8;
  int levels = 12;
  double u_min = 1.0;
  double u_max = 12.0;
  double tolerance = 1e-3;
  int threads = 0;
};

int cmd_oracle(const OracleArgs& a, std::ostream& out, std::ostream& err) {
  a.common.validate();
  const double B = a.common.beta_c;
  double tau = 0.0;
  if (a.tau) {
    tau = *a.tau * a.common.gamma;
  } else {
    // horizon of the fixed-rate plan between the same endpoints
    tau = plan::build_trajectory({a.p_in, a.u_in * B}, {a.p_out, a.u_out * B}, a.K / a.common.rate(), a.z, 0)
              .total_time;
  }
  const auto grid = oracle::ProtocolGrid::uniform(a.n_intervals, a.levels, a.u_min * B, a.u_max * B, tau);
  oracle::SearchOptions opts;
  opts.target_tolerance = a.tolerance;
  opts.threads = a.threads > 0 ? a.threads : oracle::default_threads();
  const auto ref = oracle::pmp_reference(a.p_in, a.u_in * B, a.p_out, a.u_out * B, a.z, tau, a.tolerance);
  const auto report = oracle::compare(a.p_in, a.p_out, grid, a.z, ref, opts);

  auto j = ordered_json::parse(oracle::report_json(report));
  const double E = a.common.energy();
  for (const char* key : {"q_pmp", "q_brute", "gap"}) {
    if (j[key].is_number()) j[key] = io::round15(j[key].get<double>() * E);
  }
  emit(a.common, dump(j), out);
  err << "tau " << format_number(tau * a.common.time()) << ", discretization bound "
      << format_number(report.discretization_bound * E) << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heat-optimal control of open quantum systems"};
  app.require_subcommand(1);

  EngineArgs engine;
  auto* e = app.add_subcommand("engine", "maximum-power two-level engine at temperature ratio z");
  add_common(e, engine.common);
  e->add_option("--z", engine.z, "beta_h / beta_c in (0, 1)")->required();
  e->add_flag("--schedule", engine.schedule, "also write the square-wave gap schedule");
  e->add_option("--schedule-out", engine.schedule_out, "schedule CSV path");
  e->add_option("--half-period", engine.half_period, "duration of each bath contact (1/gamma)");
  e->add_option("--periods", engine.periods, "number of periods in the schedule");

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "engine quantities over a z grid");
  add_common(s, sweep.common);
  s->add_option("--quantity", sweep.quantity)->check(CLI::IsMember({"engine", "p_star", "fixed-gradient"}));
  s->add_option("--z-min", sweep.z_min);
  s->add_option("--z-max", sweep.z_max);
  s->add_option("--steps", sweep.steps);

  IsothermArgs iso;
  auto* i = app.add_subcommand("isotherm", "single isotherm between two gaps");
  add_common(i, iso.common);
  i->add_option("--branch", iso.branch)->required()->check(CLI::IsMember({"cold", "hot"}));
  i->add_option("--z", iso.z);
  i->add_option("--K", iso.K, "rate constant (gamma/beta_c), negative");
  i->add_option("--u0", iso.u0)->required();
  i->add_option("--u1", iso.u1)->required();
  i->add_option("--points", iso.points);

  TrajectoryArgs traj;
  auto* t = app.add_subcommand("trajectory", "optimal plan between (p, u) endpoints");
  add_common(t, traj.common);
  t->add_option("--z", traj.z);
  auto* k_opt = t->add_option("--K", traj.K, "rate constant (gamma/beta_c); default -0.05");
  auto* d_opt = t->add_option("--deadline", traj.deadline, "total time (1/gamma); picks K and cycles");
  k_opt->excludes(d_opt);
  t->add_option("--p-in", traj.p_in);
  t->add_option("--u-in", traj.u_in);
  t->add_option("--p-out", traj.p_out);
  t->add_option("--u-out", traj.u_out);
  t->add_option("--cycles", traj.cycles)->excludes(d_opt);
  t->add_option("--points", traj.points, "rows per isotherm");
  t->add_option("--plan-json", traj.plan_json, "also write the plan as JSON");

  auto* v = app.add_subcommand("verify", "run the invariant suite");

  OracleArgs orc;
  auto* o = app.add_subcommand("oracle", "brute-force comparison against the planner");
  add_common(o, orc.common);
  o->add_option("--z", orc.z);
  o->add_option("--p-in", orc.p_in);
  o->add_option("--u-in", orc.u_in);
  o->add_option("--p-out", orc.p_out);
  o->add_option("--u-out", orc.u_out);
  o->add_option("--tau", orc.tau, "horizon (1/gamma); default: fixed-K plan time");
  o->add_option("--K", orc.K, "rate of the plan that sets the default horizon");
  o->add_option("--n-intervals", orc.n_intervals);
  o->add_option("--levels", orc.levels);
  o->add_option("--u-min", orc.u_min);
  o->add_option("--u-max", orc.u_max);
  o->add_option("--tolerance", orc.tolerance, "accepted |p(tau) - p_out|");
  o->add_option("--threads", orc.threads, "0: PMP_THERMO_THREADS or hardware");

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_config(std::move(args));
  } catch (const Error& ex) {
    err << "usage: " << ex.what() << '\n';
    return kUsage;
  }
  std::vector<const char*> expanded;
  for (const auto& a : args) expanded.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(expanded.size()), expanded.data());
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*e) return cmd_engine(engine, out, err);
    if (*s) return cmd_sweep(sweep, out, err);
    if (*i) return cmd_isotherm(iso, out, err);
    if (*t) return cmd_trajectory(traj, out, err);
    if (*v) return cmd_verify(out);
    if (*o) return cmd_oracle(orc, out, err);
  } catch (const DeadlineInfeasible& ex) {
    err << "infeasible: " << ex.what() << " (shortest feasible time " << format_number(ex.minimal_time()) << " in reduced units)\n";
    return kInfeasible;
  } catch (const Unreachable& ex) {
    err << "infeasible: " << ex.what() << '\n';
    return kInfeasible;
  } catch (const NoJumpPoints& ex) {
    err << "infeasible: " << ex.what() << '\n';
    return kInfeasible;
  } catch (const DirectionError& ex) {
    err << "infeasible: " << ex.what() << '\n';
    return kInfeasible;
  } catch (const DomainError& ex) {
    err << "usage: " << ex.what() << '\n';
    return kUsage;
  } catch (const ShapeError& ex) {
    err << "usage: " << ex.what() << '\n';
    return kUsage;
  } catch (const std::exception& ex) {
    err << "solver failure: " << ex.what() << '\n';
    return kSolverFailure;
  }
  return kUsage;
}

}  // namespace pmpthermo::cli
