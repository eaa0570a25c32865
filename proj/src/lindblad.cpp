#include "pmpthermo/lindblad.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <ostream>
#include <string>

#include "pmpthermo/error.hpp"
#include "pmpthermo/io.hpp"
#include "pmpthermo/ode.hpp"

namespace pmpthermo {

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(Operator m) : m_(std::move(m)) {
  if (m_.rows() == 0 || m_.rows() != m_.cols()) {
    throw ShapeError("density matrix must be square and non-empty");
  }
  if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kHermiticityTol) {
    throw DomainError("density matrix is not Hermitian");
  }
  if (std::abs(m_.trace() - Complex(1.0, 0.0)) > kTraceTol) {
    throw DomainError("density matrix trace differs from 1");
  }
  Eigen::SelfAdjointEigenSolver<Operator> es(m_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -kEigenTol) {
    throw DomainError("density matrix has a negative eigenvalue");
  }
}

DensityMatrix DensityMatrix::diagonal(std::span<const double> populations) {
  Operator m = Operator::Zero(static_cast<Eigen::Index>(populations.size()),
                              static_cast<Eigen::Index>(populations.size()));
  for (std::size_t i = 0; i < populations.size(); ++i) {
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = populations[i];
  }
  return DensityMatrix(std::move(m));
}

DensityMatrix DensityMatrix::qubit(double excited_population) {
  const double pops[2] = {1.0 - excited_population, excited_population};
  return diagonal(pops);
}

std::vector<double> DensityMatrix::populations() const {
  std::vector<double> p(dim());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Controls and baths

bool ControlVector::satisfies_total_rate(double gamma, double tol) const {
  return gamma_c >= 0.0 && gamma_h >= 0.0 && std::fabs(gamma_c + gamma_h - gamma) <= tol;
}

bool ControlVector::finite() const {
  for (double v : hamiltonian_params) {
    if (!std::isfinite(v)) return false;
  }
  return std::isfinite(gamma_c) && std::isfinite(gamma_h);
}

BathPair BathPair::make(double beta_cold, double beta_hot) {
  if (!(beta_hot > 0.0) || !(beta_cold >= beta_hot)) {
    throw DomainError("baths require beta_cold >= beta_hot > 0");
  }
  return {{beta_cold, BathLabel::cold}, {beta_hot, BathLabel::hot}};
}

// ---------------------------------------------------------------------------
// Reset models

LevelResetModel::LevelResetModel(std::size_t levels) : levels_(levels) {
  if (levels < 2) throw DomainError("reset model needs at least two levels");
}

void LevelResetModel::check_controls(std::span<const double> u) const {
  if (u.size() != num_controls()) {
    throw ShapeError("expected " + std::to_string(num_controls()) + " Hamiltonian parameters, got " +
                     std::to_string(u.size()));
  }
}

Operator LevelResetModel::hamiltonian(std::span<const double> u) const {
  check_controls(u);
  const auto n = static_cast<Eigen::Index>(levels_);
  Operator h = Operator::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) h(k, k) = u[static_cast<std::size_t>(k - 1)];
  return h;
}

Operator LevelResetModel::hamiltonian_derivative(std::span<const double> u, std::size_t k) const {
  check_controls(u);
  if (k >= num_controls()) throw ShapeError("control index out of range");
  const auto n = static_cast<Eigen::Index>(levels_);
  Operator d = Operator::Zero(n, n);
  d(static_cast<Eigen::Index>(k + 1), static_cast<Eigen::Index>(k + 1)) = 1.0;
  return d;
}

Eigen::VectorXd LevelResetModel::gibbs_populations(double beta, std::span<const double> u) const {
  check_controls(u);
  const auto n = static_cast<Eigen::Index>(levels_);
  Eigen::VectorXd e(n);
  e[0] = 0.0;
  for (Eigen::Index k = 1; k < n; ++k) e[k] = u[static_cast<std::size_t>(k - 1)];
  const Eigen::VectorXd be = beta * e;
  if (!be.allFinite()) throw DomainError("beta * u is not finite");
  const double emin = be.minCoeff();
  Eigen::VectorXd w = (-(be.array() - emin)).exp();
  return w / w.sum();
}

Operator LevelResetModel::dissipator(const Operator& rho, const BathSpec& bath,
                                     std::span<const double> u) const {
  const Eigen::VectorXd eta = gibbs_populations(bath.beta, u);
  Operator out = -rho;
  const Complex tr = rho.trace();
  for (Eigen::Index i = 0; i < eta.size(); ++i) out(i, i) += eta[i] * tr;
  return out;
}

Operator LevelResetModel::dissipator_derivative(const Operator& rho, const BathSpec& bath,
                                                std::span<const double> u, std::size_t k) const {
  if (k >= num_controls()) throw ShapeError("control index out of range");
  const Eigen::VectorXd eta = gibbs_populations(bath.beta, u);
  const auto level = static_cast<Eigen::Index>(k + 1);
  const Complex tr = rho.trace();
  Operator out = Operator::Zero(rho.rows(), rho.cols());
  // d eta_j / d E_k = -beta eta_j (delta_jk - eta_k)
  for (Eigen::Index j = 0; j < eta.size(); ++j) {
    const double delta = j == level ? 1.0 : 0.0;
    out(j, j) = -bath.beta * eta[j] * (delta - eta[level]) * tr;
  }
  return out;
}

Operator LevelResetModel::adjoint_dissipator(const Operator& a, const BathSpec& bath,
                                             std::span<const double> u) const {
  const Eigen::VectorXd eta = gibbs_populations(bath.beta, u);
  Complex expect = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) expect += eta[i] * a(i, i);
  Operator out = -a;
  for (Eigen::Index i = 0; i < eta.size(); ++i) out(i, i) += expect;
  return out;
}

double qubit_gibbs_population(double beta, double gap) {
  const double x = beta * gap;
  if (!std::isfinite(x)) throw DomainError("beta * u is not finite");
  return 0.5 * (1.0 - std::tanh(0.5 * x));
}

Eigen::VectorXd QubitResetModel::gibbs_populations(double beta, std::span<const double> u) const {
  check_controls(u);
  const double n = qubit_gibbs_population(beta, u[0]);
  Eigen::VectorXd eta(2);
  eta << 1.0 - n, n;
  return eta;
}

OpenSystem OpenSystem::qubit(double beta_c, double beta_h) {
  return {std::make_shared<QubitResetModel>(), BathPair::make(beta_c, beta_h)};
}

OpenSystem OpenSystem::levels(std::size_t n, double beta_c, double beta_h) {
  return {std::make_shared<LevelResetModel>(n), BathPair::make(beta_c, beta_h)};
}

Operator thermal_dissipator(const Operator& rho, const BathSpec& bath, double gap) {
  if (rho.rows() != 2 || rho.cols() != 2) throw ShapeError("two-level dissipator needs a 2x2 state");
  static const QubitResetModel model;
  const double u[1] = {gap};
  return model.dissipator(rho, bath, u);
}

// ---------------------------------------------------------------------------
// Generator

namespace {

void check_inputs(const Operator& rho, const ControlVector& u, const OpenSystem& sys) {
  if (!sys.model) throw DomainError("open system has no model");
  const auto d = static_cast<Eigen::Index>(sys.model->dim());
  if (rho.rows() != d || rho.cols() != d) {
    throw ShapeError("operator dimension " + std::to_string(rho.rows()) + " does not match model dimension " +
                     std::to_string(d));
  }
  if (u.gamma_c < 0.0 || u.gamma_h < 0.0) throw DomainError("negative damping rate");
}

Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

}  // namespace

double trace_product(const Operator& a, const Operator& b) {
  // Re tr(ab) without forming the product
  return (a.transpose().cwiseProduct(b)).sum().real();
}

Operator lindblad_rhs(const Operator& rho, const ControlVector& u, const OpenSystem& sys) {
  check_inputs(rho, u, sys);
  const auto& m = *sys.model;
  const std::span<const double> params(u.hamiltonian_params);
  Operator out = Complex(0.0, -1.0) * commutator(m.hamiltonian(params), rho);
  if (u.gamma_c != 0.0) out += u.gamma_c * m.dissipator(rho, sys.baths.cold, params);
  if (u.gamma_h != 0.0) out += u.gamma_h * m.dissipator(rho, sys.baths.hot, params);
  return out;
}

Operator lindblad_rhs_derivative(const Operator& rho, const ControlVector& u, const OpenSystem& sys,
                                 std::size_t k) {
  check_inputs(rho, u, sys);
  const auto& m = *sys.model;
  const std::span<const double> params(u.hamiltonian_params);
  Operator out = Complex(0.0, -1.0) * commutator(m.hamiltonian_derivative(params, k), rho);
  if (u.gamma_c != 0.0) out += u.gamma_c * m.dissipator_derivative(rho, sys.baths.cold, params, k);
  if (u.gamma_h != 0.0) out += u.gamma_h * m.dissipator_derivative(rho, sys.baths.hot, params, k);
  return out;
}

Operator lindblad_adjoint(const Operator& a, const ControlVector& u, const OpenSystem& sys) {
  check_inputs(a, u, sys);
  const auto& m = *sys.model;
  const std::span<const double> params(u.hamiltonian_params);
  Operator out = Complex(0.0, 1.0) * commutator(m.hamiltonian(params), a);
  if (u.gamma_c != 0.0) out += u.gamma_c * m.adjoint_dissipator(a, sys.baths.cold, params);
  if (u.gamma_h != 0.0) out += u.gamma_h * m.adjoint_dissipator(a, sys.baths.hot, params);
  return out;
}

Operator stationary_state(const ControlVector& u, const OpenSystem& sys) {
  const auto d = static_cast<Eigen::Index>(sys.model->dim());
  const Eigen::Index n = d * d;
  Eigen::MatrixXcd liouv(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Operator basis = Operator::Zero(d, d);
    basis(c % d, c / d) = 1.0;
    const Operator img = lindblad_rhs(basis, u, sys);
    liouv.col(c) = Eigen::Map<const Eigen::VectorXcd>(img.data(), n);
  }
  // replace the first equation by the trace condition
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  liouv.row(0).setZero();
  for (Eigen::Index i = 0; i < d; ++i) liouv(0, i * d + i) = 1.0;
  rhs[0] = 1.0;
  const Eigen::VectorXcd sol = liouv.fullPivLu().solve(rhs);
  Operator rho = Eigen::Map<const Operator>(sol.data(), d, d);
  return 0.5 * (rho + rho.adjoint());
}

// ---------------------------------------------------------------------------
// Protocol

Protocol::Protocol(std::vector<ProtocolPiece> pieces) {
  for (auto& p : pieces) append(std::move(p));
}

void Protocol::append(ProtocolPiece piece) {
  if (!(piece.t_end >= piece.t_begin)) throw DomainError("protocol piece ends before it begins");
  if (!piece.control) throw DomainError("protocol piece has no control law");
  if (!pieces_.empty() && std::fabs(piece.t_begin - pieces_.back().t_end) >
                              1e-12 * std::max(1.0, std::fabs(piece.t_begin))) {
    throw DomainError("protocol pieces must be contiguous");
  }
  if (!pieces_.empty()) piece.t_begin = pieces_.back().t_end;
  pieces_.push_back(std::move(piece));
}

void Protocol::append_constant(double duration, ControlVector control) {
  const double t0 = pieces_.empty() ? 0.0 : pieces_.back().t_end;
  const std::size_t nu = control.hamiltonian_params.size();
  append({t0, t0 + duration, [control](double) { return control; },
          [nu](double) { return std::vector<double>(nu, 0.0); }});
}

double Protocol::t_begin() const { return pieces_.empty() ? 0.0 : pieces_.front().t_begin; }
double Protocol::t_end() const { return pieces_.empty() ? 0.0 : pieces_.back().t_end; }

// ---------------------------------------------------------------------------
// Integration

namespace {

struct StateLayout {
  Eigen::Index d;
  Eigen::Index n2;
  Eigen::Index size() const { return 2 * n2 + 2; }
  Eigen::Index heat() const { return 2 * n2; }
  Eigen::Index work() const { return 2 * n2 + 1; }

  void pack(const Operator& rho, Eigen::VectorXd& y) const {
    for (Eigen::Index i = 0; i < n2; ++i) {
      y[i] = rho.data()[i].real();
      y[n2 + i] = rho.data()[i].imag();
    }
  }
  Operator unpack(const Eigen::VectorXd& y) const {
    Operator rho(d, d);
    for (Eigen::Index i = 0; i < n2; ++i) rho.data()[i] = Complex(y[i], y[n2 + i]);
    return rho;
  }
};

std::vector<double> numeric_rate(const ProtocolPiece& piece, double t) {
  const double len = piece.t_end - piece.t_begin;
  double h = 1e-4 * std::max(len, 1e-12);
  // keep the stencil inside the piece
  const double lo = piece.t_begin, hi = piece.t_end;
  double c = std::clamp(t, lo + 2 * h, hi - 2 * h);
  if (hi - lo < 4 * h) c = 0.5 * (lo + hi), h = 0.25 * (hi - lo);
  const auto um2 = piece.control(c - 2 * h).hamiltonian_params;
  const auto um1 = piece.control(c - h).hamiltonian_params;
  const auto up1 = piece.control(c + h).hamiltonian_params;
  const auto up2 = piece.control(c + 2 * h).hamiltonian_params;
  std::vector<double> r(um1.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    r[k] = (um2[k] - 8.0 * um1[k] + 8.0 * up1[k] - up2[k]) / (12.0 * h);
  }
  return r;
}

}  // namespace

IntegrationResult integrate(const DensityMatrix& rho0, const Protocol& protocol, const OpenSystem& sys,
                            const IntegratorOptions& options) {
  if (protocol.empty()) throw DomainError("empty protocol");
  if (!(options.rtol > 0.0) || !(options.atol > 0.0)) throw DomainError("tolerances must be positive");
  if (!sys.model) throw DomainError("open system has no model");
  const auto d = static_cast<Eigen::Index>(sys.model->dim());
  if (static_cast<Eigen::Index>(rho0.dim()) != d) throw ShapeError("initial state dimension mismatch");

  const auto& model = *sys.model;
  const StateLayout layout{d, d * d};
  Eigen::VectorXd y(layout.size());
  layout.pack(rho0.matrix(), y);
  y[layout.heat()] = 0.0;
  y[layout.work()] = 0.0;

  IntegrationResult result;
  const auto& pieces = protocol.pieces();
  const ControlVector c0 = pieces.front().control(pieces.front().t_begin);
  if (!c0.finite()) throw DomainError("non-finite control");
  result.initial_energy = trace_product(rho0.matrix(), model.hamiltonian(c0.hamiltonian_params));

  auto record = [&](double t, const ControlVector& c, const Eigen::VectorXd& state) {
    if (!options.record_samples) return;
    result.samples.push_back({t, c, layout.unpack(state), state[layout.heat()], state[layout.work()]});
  };
  record(pieces.front().t_begin, c0, y);

  ode::Options ode_opts;
  ode_opts.rtol = options.rtol;
  ode_opts.atol = options.atol;
  ode_opts.max_step = options.max_step;
  ode_opts.max_steps = options.max_steps;

  ControlVector previous = c0;
  for (std::size_t ip = 0; ip < pieces.size(); ++ip) {
    const ProtocolPiece& piece = pieces[ip];
    const ControlVector start = piece.control(piece.t_begin);
    if (!start.finite()) throw IntegrationFailure("non-finite control", piece.t_begin);
    if (ip > 0) {
      // instantaneous quench: state fixed, work -<rho dH>
      const Operator rho = layout.unpack(y);
      const Operator dh = model.hamiltonian(start.hamiltonian_params) -
                          model.hamiltonian(previous.hamiltonian_params);
      y[layout.work()] -= trace_product(rho, dh);
      record(piece.t_begin, start, y);
    }

    auto rhs = [&](double t, const Eigen::VectorXd& state, Eigen::VectorXd& dy) {
      const ControlVector c = piece.control(t);
      const Operator rho = layout.unpack(state);
      const Operator drho = lindblad_rhs(rho, c, sys);
      const std::span<const double> params(c.hamiltonian_params);
      const Operator h = model.hamiltonian(params);
      const std::vector<double> rate = piece.control_rate ? piece.control_rate(t) : numeric_rate(piece, t);
      double dwork = 0.0;
      for (std::size_t k = 0; k < rate.size(); ++k) {
        if (rate[k] != 0.0) dwork -= rate[k] * trace_product(rho, model.hamiltonian_derivative(params, k));
      }
      layout.pack(drho, dy);
      dy[layout.heat()] = -trace_product(h, drho);
      dy[layout.work()] = dwork;
    };
    auto observe = [&](double t, const Eigen::VectorXd& state) {
      double tr = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) tr += state[i * d + i];
      if (std::fabs(tr - 1.0) > options.trace_tolerance) throw IntegrationFailure("trace drift", t);
      if (options.record_samples) record(t, piece.control(t), state);
    };

    const auto stats = ode::integrate_dopri(rhs, piece.t_begin, piece.t_end, y, ode_opts, observe);
    result.steps_accepted += stats.accepted;
    result.steps_rejected += stats.rejected;
    previous = piece.control(piece.t_end);
  }

  result.final_state = layout.unpack(y);
  result.ledger.heat_released = y[layout.heat()];
  result.ledger.work_done = y[layout.work()];
  result.ledger.energy = trace_product(result.final_state, model.hamiltonian(previous.hamiltonian_params));
  result.first_law_residual =
      result.ledger.energy - result.initial_energy + result.ledger.work_done + result.ledger.heat_released;
  return result;
}

void write_trajectory_csv(std::ostream& out, const IntegrationResult& result) {
  if (result.samples.empty()) return;
  const std::size_t nu = result.samples.front().control.hamiltonian_params.size();
  const auto d = result.samples.front().rho.rows();
  out << "t";
  if (nu == 1) {
    out << ",u";
  } else {
    for (std::size_t k = 0; k < nu; ++k) out << ",u" << k;
  }
  out << ",gamma_c,gamma_h";
  for (Eigen::Index i = 0; i < d; ++i) out << ",p" << i;
  out << ",Qcum,Wcum\n";
  for (const auto& s : result.samples) {
    out << io::format_number(s.t);
    for (double u : s.control.hamiltonian_params) out << ',' << io::format_number(u);
    out << ',' << io::format_number(s.control.gamma_c) << ',' << io::format_number(s.control.gamma_h);
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << io::format_number(s.rho(i, i).real());
    out << ',' << io::format_number(s.heat) << ',' << io::format_number(s.work) << '\n';
  }
}

}  // namespace pmpthermo
