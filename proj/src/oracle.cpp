#include "pmpthermo/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <thread>

#include "json.hpp"
#include "pmpthermo/error.hpp"
#include "pmpthermo/io.hpp"
#include "pmpthermo/lindblad.hpp"
#include "pmpthermo/planner.hpp"

namespace pmpthermo::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double beta_of(Branch b, double z) { return b == Branch::cold ? 1.0 : z; }

struct Choice {
  double u;
  double n;  // Gibbs population the interval relaxes to
  Branch bath;
};

// level-major, cold before hot
std::vector<Choice> make_choices(const std::vector<double>& levels, double z) {
  std::vector<Choice> c;
  for (double u : levels) {
    for (Branch b : {Branch::cold, Branch::hot}) c.push_back({u, qubit_gibbs_population(beta_of(b, z), u), b});
  }
  return c;
}

// Lower bound on the heat still to be released from any p in a cell, over r
// remaining intervals, under the terminal window. +inf marks cells from which
// the window cannot be reached.
class BoundTable {
 public:
  BoundTable(const std::vector<Choice>& choices, double e, int n, int cells, double lo, double hi)
      : cells_(cells), table_(static_cast<std::size_t>(n) + 1, std::vector<double>(cells, kInf)) {
    const double a = 1.0 - e;
    for (int i = 0; i < cells; ++i) {
      const double pl = edge(i), ph = edge(i + 1);
      if (ph >= lo && pl <= hi) table_[0][i] = 0.0;
    }
    for (int r = 1; r <= n; ++r) {
      const auto& prev = table_[r - 1];
      auto& cur = table_[r];
      for (int i = 0; i < cells; ++i) {
        const double pl = edge(i), ph = edge(i + 1);
        double best = kInf;
        for (const auto& c : choices) {
          const double img_lo = e * pl + a * c.n, img_hi = e * ph + a * c.n;
          double rest = kInf;
          for (int j = cell_of(img_lo); j <= cell_of(img_hi); ++j) rest = std::min(rest, prev[j]);
          if (rest == kInf) continue;
          const double h = std::min(c.u * a * (pl - c.n), c.u * a * (ph - c.n));
          best = std::min(best, h + rest);
        }
        // margin against rounding in the bound itself
        cur[i] = best == kInf ? kInf : best - 1e-12 * (1.0 + std::fabs(best));
      }
    }
  }

  double at(int remaining, double p) const { return table_[remaining][cell_of(p)]; }

 private:
  double edge(int i) const { return static_cast<double>(i) / cells_; }
  int cell_of(double p) const { return std::clamp(static_cast<int>(std::floor(p * cells_)), 0, cells_ - 1); }

  int cells_;
  std::vector<std::vector<double>> table_;
};

struct Best {
  double q = kInf;
  double p_final = 0.0;
  std::vector<int> path;
  std::uint64_t evaluated = 0;

  bool better(double q_new, const std::vector<int>& path_new) const {
    if (q_new < q) return true;
    return q_new == q && !path.empty() && path_new < path;
  }
};

struct Search {
  const std::vector<Choice>& choices;
  const BoundTable& bound;
  double e;
  int n;
  double lo, hi;

  void dfs(int depth, double p, double q, std::vector<int>& path, Best& best) const {
    const int remaining = n - depth;
    if (remaining == 1) {
      for (int c = 0; c < static_cast<int>(choices.size()); ++c) {
        const Choice& ch = choices[c];
        const double pn = ch.n + (p - ch.n) * e;
        ++best.evaluated;
        if (pn < lo || pn > hi) continue;
        const double qn = q - ch.u * (pn - p);
        path[depth] = c;
        if (best.better(qn, path)) {
          best.q = qn;
          best.p_final = pn;
          best.path = path;
        }
      }
      return;
    }
    for (int c = 0; c < static_cast<int>(choices.size()); ++c) {
      const Choice& ch = choices[c];
      const double pn = ch.n + (p - ch.n) * e;
      const double qn = q - ch.u * (pn - p);
      if (qn + bound.at(remaining - 1, pn) > best.q) continue;
      path[depth] = c;
      dfs(depth + 1, pn, qn, path, best);
    }
  }
};

PiecewiseProtocol protocol_from_path(const std::vector<int>& path, const std::vector<Choice>& choices, double dt) {
  PiecewiseProtocol p;
  for (int c : path) {
    p.u.push_back(choices[c].u);
    p.bath.push_back(choices[c].bath);
    p.durations.push_back(dt);
  }
  return p;
}

// Greedy walk down the bound table; gives a feasible incumbent quickly.
std::optional<Best> greedy_seed(const Search& s, double p_in) {
  Best b;
  std::vector<int> path(s.n);
  double p = p_in, q = 0.0;
  for (int depth = 0; depth < s.n; ++depth) {
    const int remaining = s.n - depth;
    int pick = -1;
    double score = kInf;
    for (int c = 0; c < static_cast<int>(s.choices.size()); ++c) {
      const Choice& ch = s.choices[c];
      const double pn = ch.n + (p - ch.n) * s.e;
      const double v = -ch.u * (pn - p) + s.bound.at(remaining - 1, pn);
      if (v < score) score = v, pick = c;
    }
    if (pick < 0) return std::nullopt;
    const Choice& ch = s.choices[pick];
    const double pn = ch.n + (p - ch.n) * s.e;
    q -= ch.u * (pn - p);
    p = pn;
    path[depth] = pick;
  }
  if (p < s.lo || p > s.hi) return std::nullopt;
  b.q = q;
  b.p_final = p;
  b.path = path;
  return b;
}

double closest_approach(const std::vector<Choice>& choices, double e, int n, double p_in, double target) {
  double n_min = kInf, n_max = -kInf;
  for (const auto& c : choices) n_min = std::min(n_min, c.n), n_max = std::max(n_max, c.n);
  double best = kInf;
  // depth-first on |p - target| with the reachable hull as bound
  auto rec = [&](auto&& self, int depth, double p) -> void {
    const int remaining = n - depth;
    if (remaining == 0) {
      best = std::min(best, std::fabs(p - target));
      return;
    }
    const double er = std::pow(e, remaining);
    const double lo = n_min + (p - n_min) * er, hi = n_max + (p - n_max) * er;
    const double bound = std::max({0.0, lo - target, target - hi});
    if (bound >= best) return;
    for (const auto& c : choices) self(self, depth + 1, c.n + (p - c.n) * e);
  };
  rec(rec, 0, p_in);
  return best;
}

}  // namespace

ProtocolGrid ProtocolGrid::uniform(int n_intervals, int levels, double u_lo, double u_hi, double tau) {
  ProtocolGrid g;
  g.n_intervals = n_intervals;
  g.tau = tau;
  if (levels < 1) throw DomainError("need at least one gap level");
  for (int i = 0; i < levels; ++i) {
    g.u_levels.push_back(levels == 1 ? u_lo : u_lo + (u_hi - u_lo) * i / (levels - 1));
  }
  return g;
}

void ProtocolGrid::validate() const {
  if (n_intervals < 1 || n_intervals > kMaxIntervals) {
    throw DomainError("n_intervals must lie in [1, " + std::to_string(kMaxIntervals) + "]");
  }
  if (u_levels.empty() || static_cast<int>(u_levels.size()) > kMaxLevels) {
    throw DomainError("u_levels must hold between 1 and " + std::to_string(kMaxLevels) + " values");
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("horizon must be positive");
  for (double u : u_levels) {
    if (!std::isfinite(u)) throw DomainError("gap levels must be finite");
  }
}

double PiecewiseProtocol::total_time() const {
  double t = 0.0;
  for (double d : durations) t += d;
  return t;
}

Propagation propagate(double p_in, const PiecewiseProtocol& protocol, double z) {
  if (protocol.u.size() != protocol.bath.size() || protocol.u.size() != protocol.durations.size()) {
    throw ShapeError("protocol arrays differ in length");
  }
  Propagation r{p_in, 0.0};
  for (std::size_t i = 0; i < protocol.size(); ++i) {
    const double n = qubit_gibbs_population(beta_of(protocol.bath[i], z), protocol.u[i]);
    const double pn = n + (r.p_final - n) * std::exp(-protocol.durations[i]);
    r.heat -= protocol.u[i] * (pn - r.p_final);
    r.p_final = pn;
  }
  return r;
}

int default_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("PMP_THERMO_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) return std::min(cap, hw);
  }
  return hw;
}

SearchResult grid_search(double p_in, double p_out, const ProtocolGrid& grid, double z, const SearchOptions& options) {
  grid.validate();
  if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0)) {
    throw DomainError("populations must lie in [0, 1]");
  }
  if (!(options.target_tolerance > 0.0)) throw DomainError("target tolerance must be positive");
  if (!(z > 0.0 && z <= 1.0)) throw DomainError("z must lie in (0, 1]");

  const auto choices = make_choices(grid.u_levels, z);
  const double dt = grid.tau / grid.n_intervals;
  const double e = std::exp(-dt);
  const double lo = p_out - options.target_tolerance, hi = p_out + options.target_tolerance;
  const BoundTable bound(choices, e, grid.n_intervals, std::max(16, options.bound_cells), lo, hi);
  const Search search{choices, bound, e, grid.n_intervals, lo, hi};

  SearchResult result;
  if (bound.at(grid.n_intervals, p_in) == kInf) {
    result.closest_approach = closest_approach(choices, e, grid.n_intervals, p_in, p_out);
    return result;
  }

  const std::optional<Best> seed = greedy_seed(search, p_in);
  const double seed_q = seed ? seed->q : kInf;

  // static partition of the first interval's choices; each worker keeps its
  // own incumbent, so the outcome depends only on the worker count
  const int n_first = static_cast<int>(choices.size());
  const int workers = std::clamp(options.threads, 1, n_first);
  std::vector<Best> partial(workers);
  auto run = [&](int w) {
    Best& b = partial[w];
    b.q = seed_q;
    if (seed) {
      b.path = seed->path;
      b.p_final = seed->p_final;
    }
    std::vector<int> path(grid.n_intervals);
    for (int c = w; c < n_first; c += workers) {
      const Choice& ch = choices[c];
      const double pn = ch.n + (p_in - ch.n) * e;
      const double qn = -ch.u * (pn - p_in);
      path[0] = c;
      if (grid.n_intervals == 1) {
        ++b.evaluated;
        if (pn >= lo && pn <= hi && b.better(qn, path)) b.q = qn, b.p_final = pn, b.path = path;
        continue;
      }
      if (qn + bound.at(grid.n_intervals - 1, pn) > b.q) continue;
      search.dfs(1, pn, qn, path, b);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }

  Best merged;
  for (const auto& b : partial) {
    merged.evaluated += b.evaluated;
    if (b.path.empty()) continue;
    if (merged.path.empty() || b.q < merged.q || (b.q == merged.q && b.path < merged.path)) {
      merged.q = b.q;
      merged.p_final = b.p_final;
      merged.path = b.path;
    }
  }
  result.n_protocols_evaluated = merged.evaluated;
  if (merged.path.empty()) {
    result.closest_approach = closest_approach(choices, e, grid.n_intervals, p_in, p_out);
    return result;
  }
  result.feasible = true;
  result.q_best = merged.q;
  result.p_final = merged.p_final;
  result.protocol = protocol_from_path(merged.path, choices, dt);
  result.closest_approach = std::fabs(merged.p_final - p_out);
  return result;
}

// ---------------------------------------------------------------------------

bool repair_terminal(double p_in, double p_out, PiecewiseProtocol& protocol, double z, double u_cap) {
  const std::size_t n = protocol.size();
  if (n == 0) return false;
  PiecewiseProtocol head = protocol;
  head.u.pop_back();
  head.bath.pop_back();
  head.durations.pop_back();
  const double p_before = propagate(p_in, head, z).p_final;
  const double d = protocol.durations.back();
  if (!(d > 0.0)) return false;
  const double e = std::exp(-d);
  const double n_req = (p_out - p_before * e) / (1.0 - e);
  if (!(n_req > 0.0 && n_req <= 0.5)) return false;
  const double u = std::log(1.0 / n_req - 1.0) / beta_of(protocol.bath.back(), z);
  if (!(u >= 0.0 && u <= u_cap)) return false;
  protocol.u.back() = u;
  return true;
}

RefineResult local_refine(double p_in, double p_out, const PiecewiseProtocol& seed, double z,
                          const StepSchedule& schedule) {
  RefineResult r;
  r.protocol = seed;
  r.feasible = repair_terminal(p_in, p_out, r.protocol, z, schedule.u_cap);
  if (!r.feasible) {
    r.protocol = seed;
    return r;
  }
  double q = propagate(p_in, r.protocol, z).heat;
  r.history.push_back(q);
  const std::size_t n = r.protocol.size();
  double du = schedule.u_step, dt = schedule.time_step;

  auto attempt = [&](PiecewiseProtocol cand) {
    if (!repair_terminal(p_in, p_out, cand, z, schedule.u_cap)) return false;
    const double qc = propagate(p_in, cand, z).heat;
    if (!(qc < q)) return false;
    q = qc;
    r.protocol = std::move(cand);
    return true;
  };

  for (int sweep = 0; sweep < schedule.max_sweeps; ++sweep) {
    if (du < schedule.min_step && dt < schedule.min_step) break;
    bool improved = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (double sign : {1.0, -1.0}) {
        if (du < schedule.min_step) break;
        PiecewiseProtocol cand = r.protocol;
        cand.u[i] = std::clamp(cand.u[i] + sign * du, 0.0, schedule.u_cap);
        if (cand.u[i] != r.protocol.u[i]) improved = attempt(std::move(cand)) || improved;
      }
      for (double sign : {1.0, -1.0}) {
        if (dt < schedule.min_step) break;
        PiecewiseProtocol cand = r.protocol;
        const double shift = sign * dt;
        if (cand.durations[i] + shift <= 0.0 || cand.durations[i + 1] - shift <= 0.0) continue;
        cand.durations[i] += shift;
        cand.durations[i + 1] -= shift;
        improved = attempt(std::move(cand)) || improved;
      }
    }
    if (improved) {
      r.history.push_back(q);
    } else {
      du *= 0.5;
      dt *= 0.5;
    }
  }
  return r;
}

std::string report_json(const ComparisonReport& r) {
  nlohmann::ordered_json j;
  j["q_pmp"] = io::round15(r.q_pmp);
  j["q_brute"] = io::round15(r.q_brute);
  j["gap"] = io::round15(r.gap);
  j["n_protocols_evaluated"] = r.n_protocols_evaluated;
  j["wall_time"] = io::round15(r.wall_time);
  return j.dump(2) + "\n";
}

PmpReference pmp_reference(double p_in, double u_in, double p_out, double u_out, double z, double tau,
                           double tolerance, double integration_tol) {
  auto q_at = [&](double p) { return plan::plan_for_deadline({p_in, u_in}, {p, u_out}, z, tau).total_heat; };
  PmpReference ref;
  ref.q_pmp = q_at(p_out);
  double q_min = ref.q_pmp;
  for (double p : {p_out - tolerance, p_out + tolerance}) {
    if (p > 0.0 && p < 1.0) q_min = std::min(q_min, q_at(p));
  }
  ref.discretization_bound = (ref.q_pmp - q_min) + 10.0 * integration_tol;
  return ref;
}

ComparisonReport compare(double p_in, double p_out, const ProtocolGrid& grid, double z, const PmpReference& reference,
                         const SearchOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const SearchResult s = grid_search(p_in, p_out, grid, z, options);
  ComparisonReport r;
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!s.feasible) {
    throw Unreachable("no grid protocol reaches the target; closest approach " + io::format_number(s.closest_approach));
  }
  r.q_pmp = reference.q_pmp;
  r.q_brute = s.q_best;
  r.gap = s.q_best - reference.q_pmp;
  r.n_protocols_evaluated = s.n_protocols_evaluated;
  r.discretization_bound = reference.discretization_bound;
  return r;
}

}  // namespace pmpthermo::oracle
