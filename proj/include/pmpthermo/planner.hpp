#pragma once

// Heat-optimal two-level protocols between arbitrary (p, u) endpoints,
// assembled from cold/hot isotherms and adiabatic jumps. Reduced units:
// beta_c = 1, gamma = 1, beta_h = z.

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pmpthermo/lindblad.hpp"
#include "pmpthermo/pmp.hpp"
#include "pmpthermo/qubit.hpp"

namespace pmpthermo::plan {

using qubit::Branch;

struct IsothermSegment {
  Branch branch = Branch::cold;
  double K = 0.0;
  double mu = 0.0;
  double p0 = 0.0;
  double p1 = 0.0;
  double x0 = 1.0;
  double x1 = 1.0;
  double duration = 0.0;
  double heat = 0.0;
};

/// Instantaneous branch change at a root of f(.; K).
struct AdiabaticJump {
  double p = 0.0;
  double u_from = 0.0;
  double u_to = 0.0;
  Branch from_branch = Branch::cold;
  Branch to_branch = Branch::hot;
};

/// Gap quench joining a prescribed endpoint to the first or last isotherm.
struct BoundaryQuench {
  double p = 0.0;
  double u_from = 0.0;
  double u_to = 0.0;
  Branch branch = Branch::cold;  // branch of the adjoining isotherm
};

using Step = std::variant<IsothermSegment, AdiabaticJump, BoundaryQuench>;

struct Endpoint {
  double p = 0.0;
  double u = 0.0;
};

/// Inner cycle at rate K: hot p_ad1 -> p_ad2, jump, cold p_ad2 -> p_ad1, jump.
struct CycleDecomposition {
  double p_ad1 = 0.0;
  double p_ad2 = 0.0;
  double tau_hot = 0.0;
  double tau_cold = 0.0;
  double heat_hot = 0.0;
  double heat_cold = 0.0;
  double tau_cycle = 0.0;
  double heat_cycle = 0.0;
  /// heat_cycle / tau_cycle; K* itself for the degenerate cycle.
  double rate = 0.0;
};

CycleDecomposition cycle_decomposition(double K, double z);

struct TrajectoryPlan {
  double K = 0.0;
  double z = 0.0;
  std::vector<Step> steps;
  int n_cycles = 0;
  double total_time = 0.0;
  double total_heat = 0.0;
  Endpoint in;
  Endpoint out;
  // split of the totals: base path on each branch plus n_cycles inner cycles
  double tau_cold = 0.0;
  double tau_hot = 0.0;
  double heat_cold = 0.0;
  double heat_hot = 0.0;
  std::optional<CycleDecomposition> cycle;
};

/// Which branch an endpoint quench lands on. `nearest` lands on a branch
/// only if the quench does not cross the other branch's curve.
enum class Attachment { nearest, cold, hot };

struct BuildOptions {
  Attachment attach_in = Attachment::nearest;
  Attachment attach_out = Attachment::nearest;
};

/// Shortest admissible plan IN -> OUT at rate K with n_cycles inner cycles.
/// Throws Unreachable when no branch sequence connects the endpoints.
TrajectoryPlan build_trajectory(Endpoint in, Endpoint out, double K, double z, int n_cycles,
                                const BuildOptions& options = {});

/// Number of isotherm segments and of adiabatic jumps in a plan.
std::size_t count_isotherms(const TrajectoryPlan& plan);
std::size_t count_jumps(const TrajectoryPlan& plan);

/// Fixed-population segment whose endpoints stay put while K varies.
struct SegmentSpec {
  Branch branch = Branch::cold;
  double p0 = 0.0;
  double p1 = 0.0;
  double z = 1.0;
};

struct MonotonicityRow {
  double K = 0.0;
  double dtau_dK = 0.0;
  double dtau_dK_numeric = 0.0;
  double dQ_dK = 0.0;
  double dQ_dK_numeric = 0.0;
};

/// Segment duration and heat at rate K.
std::pair<double, double> segment_time_heat(const SegmentSpec& spec, double K);

std::vector<MonotonicityRow> monotonicity_profile(const std::vector<double>& K_grid, const SegmentSpec& spec);

struct DeadlineOptions {
  int n_max = 1024;
  // stop scanning N after this many consecutive non-improving values
  int patience = 64;
  double K_floor = -1e4;
};

/// Minimum-heat plan with total time tau_target over (K, N, endpoint
/// attachments). Throws DeadlineInfeasible with the shortest feasible time.
TrajectoryPlan plan_for_deadline(Endpoint in, Endpoint out, double z, double tau_target,
                                 const DeadlineOptions& options = {});

/// Residual checks on a plan: conservation, stationarity and costate ODE on
/// every isotherm, bang-bang sign consistency and continuity at jumps.
struct PlanValidation {
  pmp::PmpResiduals residuals;
  bool bang_bang_consistent = true;
  double max_jump_dp = 0.0;
  double max_jump_dq = 0.0;
};
PlanValidation validate_plan(const TrajectoryPlan& plan, std::size_t samples_per_segment = 200);

/// Control schedule of the plan for forward simulation; endpoint quenches
/// become zero-length pieces.
Protocol to_protocol(const TrajectoryPlan& plan);
OpenSystem plan_system(double z);

/// x on an isotherm segment at time t after its start.
double segment_x_at(const IsothermSegment& seg, double t);

/// Isotherm on `branch` between two gaps at rate K. Throws DirectionError
/// when u0 -> u1 runs against the flow and DomainError outside the branch.
IsothermSegment isotherm_between_gaps(Branch branch, double K, double z, double u0, double u1);

/// Single-segment plan wrapping an isotherm, for export.
TrajectoryPlan plan_from_segment(const IsothermSegment& seg, double z);

/// Conversion of reduced values on output: energies are multiplied by
/// `energy` (1/beta_c) and times by `time` (1/gamma).
struct OutputScale {
  double energy = 1.0;
  double time = 1.0;
};

std::string plan_json(const TrajectoryPlan& plan, const OutputScale& scale = {});

/// `t,u,p,q,branch,Qcum`, `points_per_segment` rows per isotherm plus the
/// two endpoints (empty q there).
void write_plan_csv(std::ostream& out, const TrajectoryPlan& plan, std::size_t points_per_segment = 1000,
                    const OutputScale& scale = {});

}  // namespace pmpthermo::plan
