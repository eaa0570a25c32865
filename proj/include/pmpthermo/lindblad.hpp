#pragma once

// Finite-dimensional GKSL forward simulation with a control-dependent
// Hamiltonian and thermalizing dissipators for a cold and a hot bath.

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace pmpthermo {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;

/// Hermitian, unit-trace, positive semidefinite operator. Invariants are
/// checked on construction.
class DensityMatrix {
 public:
  static constexpr double kHermiticityTol = 1e-12;
  static constexpr double kTraceTol = 1e-10;
  static constexpr double kEigenTol = 1e-10;

  explicit DensityMatrix(Operator m);
  static DensityMatrix diagonal(std::span<const double> populations);
  /// Two-level state diag(1 - p, p) in the {|0>, |1>} basis.
  static DensityMatrix qubit(double excited_population);

  const Operator& matrix() const noexcept { return m_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  std::vector<double> populations() const;

 private:
  Operator m_;
};

/// Hamiltonian parameters u(t) plus the two bath couplings.
struct ControlVector {
  std::vector<double> hamiltonian_params;
  double gamma_c = 0.0;
  double gamma_h = 0.0;

  /// gamma_c + gamma_h == gamma within `tol`, both non-negative.
  bool satisfies_total_rate(double gamma, double tol = 0.0) const;
  bool finite() const;
};

enum class BathLabel { cold, hot };

struct BathSpec {
  double beta = 1.0;
  BathLabel label = BathLabel::cold;
};

struct BathPair {
  BathSpec cold{1.0, BathLabel::cold};
  BathSpec hot{1.0, BathLabel::hot};

  /// Requires beta_cold >= beta_hot > 0.
  static BathPair make(double beta_cold, double beta_hot);
};

/// Q is the heat released by the system, W the work done by it, `energy`
/// the final <H>. The first law reads E(tau) - E(0) + W + Q = 0.
struct ThermoLedger {
  double heat_released = 0.0;
  double work_done = 0.0;
  double energy = 0.0;
};

/// Hamiltonian and per-bath unit-rate dissipators of a model. Implementations
/// must be linear in rho (no hidden trace normalization) so that the adjoint
/// is well defined.
class DissipatorModel {
 public:
  virtual ~DissipatorModel() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t num_controls() const = 0;
  virtual Operator hamiltonian(std::span<const double> u) const = 0;
  virtual Operator hamiltonian_derivative(std::span<const double> u, std::size_t k) const = 0;

  virtual Operator dissipator(const Operator& rho, const BathSpec& bath,
                              std::span<const double> u) const = 0;
  virtual Operator dissipator_derivative(const Operator& rho, const BathSpec& bath,
                                         std::span<const double> u, std::size_t k) const = 0;
  virtual Operator adjoint_dissipator(const Operator& a, const BathSpec& bath,
                                      std::span<const double> u) const = 0;
};

/// Thermal reset toward the instantaneous Gibbs state, D[rho] = eta tr(rho) - rho,
/// for a diagonal Hamiltonian diag(0, u_1, ..., u_{N-1}).
class LevelResetModel : public DissipatorModel {
 public:
  explicit LevelResetModel(std::size_t levels);

  std::size_t dim() const override { return levels_; }
  std::size_t num_controls() const override { return levels_ - 1; }
  Operator hamiltonian(std::span<const double> u) const override;
  Operator hamiltonian_derivative(std::span<const double> u, std::size_t k) const override;
  Operator dissipator(const Operator& rho, const BathSpec& bath,
                      std::span<const double> u) const override;
  Operator dissipator_derivative(const Operator& rho, const BathSpec& bath,
                                 std::span<const double> u, std::size_t k) const override;
  Operator adjoint_dissipator(const Operator& a, const BathSpec& bath,
                              std::span<const double> u) const override;

  /// Gibbs populations of the level energies at inverse temperature beta.
  virtual Eigen::VectorXd gibbs_populations(double beta, std::span<const double> u) const;

 protected:
  void check_controls(std::span<const double> u) const;

 private:
  std::size_t levels_;
};

/// Two-level thermal reset with H = u |1><1| and Gibbs excited population
/// 1 / (1 + e^{beta u}).
class QubitResetModel final : public LevelResetModel {
 public:
  QubitResetModel() : LevelResetModel(2) {}
  Eigen::VectorXd gibbs_populations(double beta, std::span<const double> u) const override;
};

/// A model coupled to a cold and a hot bath.
struct OpenSystem {
  std::shared_ptr<const DissipatorModel> model;
  BathPair baths;

  static OpenSystem qubit(double beta_c, double beta_h);
  static OpenSystem levels(std::size_t n, double beta_c, double beta_h);
};

/// Excited population of the two-level Gibbs state, 1 / (1 + e^{beta u}).
double qubit_gibbs_population(double beta, double gap);

/// Single-bath two-level reset dissipator D[rho] = eta_beta tr(rho) - rho.
/// Throws DomainError when beta * gap is not finite.
Operator thermal_dissipator(const Operator& rho, const BathSpec& bath, double gap);

/// -i[H_u, rho] + gamma_c D_c[rho] + gamma_h D_h[rho].
Operator lindblad_rhs(const Operator& rho, const ControlVector& u, const OpenSystem& sys);

/// Partial derivative of the generator action with respect to u_k.
Operator lindblad_rhs_derivative(const Operator& rho, const ControlVector& u,
                                 const OpenSystem& sys, std::size_t k);

/// Heisenberg-picture adjoint L_u^dagger[a].
Operator lindblad_adjoint(const Operator& a, const ControlVector& u, const OpenSystem& sys);

/// Normalized fixed point of L_u, from the null space of the Liouvillian.
Operator stationary_state(const ControlVector& u, const OpenSystem& sys);

/// Re tr(a b).
double trace_product(const Operator& a, const Operator& b);

// ---------------------------------------------------------------------------
// Protocols and integration

/// Control law on [t_begin, t_end]; smooth inside, possibly discontinuous at
/// the ends. `control_rate` returns du/dt of the Hamiltonian parameters; when
/// empty a five-point difference is used.
struct ProtocolPiece {
  double t_begin = 0.0;
  double t_end = 0.0;
  std::function<ControlVector(double)> control;
  std::function<std::vector<double>(double)> control_rate;
};

class Protocol {
 public:
  Protocol() = default;
  explicit Protocol(std::vector<ProtocolPiece> pieces);

  /// Appends a piece; it must start where the previous one ended.
  void append(ProtocolPiece piece);
  /// Appends a constant control of the given duration.
  void append_constant(double duration, ControlVector control);

  const std::vector<ProtocolPiece>& pieces() const noexcept { return pieces_; }
  double t_begin() const;
  double t_end() const;
  bool empty() const noexcept { return pieces_.empty(); }

 private:
  std::vector<ProtocolPiece> pieces_;
};

struct IntegratorOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double trace_tolerance = 1e-8;
  long max_steps = 10'000'000;
  bool record_samples = true;
};

struct TrajectorySample {
  double t = 0.0;
  ControlVector control;
  Operator rho;
  double heat = 0.0;  // cumulative Q
  double work = 0.0;  // cumulative W
};

struct IntegrationResult {
  std::vector<TrajectorySample> samples;
  Operator final_state;
  ThermoLedger ledger;
  double initial_energy = 0.0;
  double first_law_residual = 0.0;
  long steps_accepted = 0;
  long steps_rejected = 0;
};

/// Adaptive Dormand-Prince integration of the master equation with heat and
/// work accumulated as extra state components (same adaptive grid). Piece
/// boundaries are mandatory step boundaries; the state is continuous across
/// them and the quench work -<rho (H_after - H_before)> is booked there.
/// Throws IntegrationFailure on step underflow or trace drift.
IntegrationResult integrate(const DensityMatrix& rho0, const Protocol& protocol,
                            const OpenSystem& sys, const IntegratorOptions& options = {});

/// CSV `t,u,gamma_c,gamma_h,p0..p{N-1},Qcum,Wcum` (u0.. when several
/// Hamiltonian parameters), 15 significant digits.
void write_trajectory_csv(std::ostream& out, const IntegrationResult& result);

}  // namespace pmpthermo
