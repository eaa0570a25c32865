#pragma once

// Brute-force search over piecewise-constant two-bath protocols, used to
// check that planner results are not beaten at desk scale. Reduced units.

#include <cstdint>
#include <string>
#include <vector>

#include "pmpthermo/qubit.hpp"

namespace pmpthermo::oracle {

using qubit::Branch;

/// n_intervals equal intervals over [0, tau]; each picks one gap level and
/// one bath at full rate.
struct ProtocolGrid {
  static constexpr int kMaxIntervals = 8;
  static constexpr int kMaxLevels = 12;

  int n_intervals = 4;
  std::vector<double> u_levels;
  double tau = 1.0;

  /// `levels` evenly spaced values from u_lo to u_hi.
  static ProtocolGrid uniform(int n_intervals, int levels, double u_lo, double u_hi, double tau);
  void validate() const;
};

/// Piecewise-constant protocol with free interval durations.
struct PiecewiseProtocol {
  std::vector<double> u;
  std::vector<Branch> bath;
  std::vector<double> durations;

  std::size_t size() const { return u.size(); }
  double total_time() const;
};

struct Propagation {
  double p_final = 0.0;
  double heat = 0.0;
};

/// Exact propagation: on each interval p relaxes to the Gibbs value of its
/// bath at rate 1 and the heat is -u dp.
Propagation propagate(double p_in, const PiecewiseProtocol& protocol, double z);

struct SearchResult {
  bool feasible = false;
  double q_best = 0.0;
  double p_final = 0.0;
  PiecewiseProtocol protocol;
  std::uint64_t n_protocols_evaluated = 0;
  // smallest |p(tau) - p_out| over the grid, filled when infeasible
  double closest_approach = 0.0;
};

struct SearchOptions {
  double target_tolerance = 1e-3;
  int threads = 1;
  int bound_cells = 4096;
};

/// Exhaustive lexicographic enumeration over (u level, bath) per interval
/// with bound-based pruning; the result is the minimum heat among protocols
/// ending within tolerance of p_out, ties going to the first in order.
SearchResult grid_search(double p_in, double p_out, const ProtocolGrid& grid, double z,
                         const SearchOptions& options = {});

struct StepSchedule {
  double u_step = 0.5;
  double time_step = 0.1;
  double min_step = 1e-6;
  int max_sweeps = 2000;
  double u_cap = 50.0;
};

struct RefineResult {
  PiecewiseProtocol protocol;
  // heat after each improving sweep, starting with the seed value
  std::vector<double> history;
  bool feasible = false;
};

/// Re-solves the last interval's gap so the protocol ends exactly at p_out.
/// Returns false if no gap in [0, u_cap] reaches it.
bool repair_terminal(double p_in, double p_out, PiecewiseProtocol& protocol, double z, double u_cap);

/// Coordinate descent on gap levels and on duration transfers between
/// neighbouring intervals, keeping the terminal population fixed.
RefineResult local_refine(double p_in, double p_out, const PiecewiseProtocol& seed, double z,
                          const StepSchedule& schedule = {});

struct ComparisonReport {
  double q_pmp = 0.0;
  double q_brute = 0.0;
  double gap = 0.0;
  std::uint64_t n_protocols_evaluated = 0;
  double wall_time = 0.0;
  // not serialized
  double discretization_bound = 0.0;
};

std::string report_json(const ComparisonReport& r);

/// Planner reference for a comparison: the deadline-optimal heat at tau and
/// the allowance for ending anywhere within `tolerance` of p_out,
/// Q(p_out) - min Q(p_out +- tolerance) plus 10 integration tolerances.
struct PmpReference {
  double q_pmp = 0.0;
  double discretization_bound = 0.0;
};
PmpReference pmp_reference(double p_in, double u_in, double p_out, double u_out, double z, double tau,
                           double tolerance, double integration_tol = 1e-9);

/// Runs grid_search and fills the report against `reference`.
ComparisonReport compare(double p_in, double p_out, const ProtocolGrid& grid, double z,
                         const PmpReference& reference, const SearchOptions& options = {});

/// Threads from PMP_THERMO_THREADS (default: hardware concurrency).
int default_threads();

}  // namespace pmpthermo::oracle
