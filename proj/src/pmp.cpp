#include "pmpthermo/pmp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "pmpthermo/error.hpp"
#include "pmpthermo/io.hpp"
#include "pmpthermo/ode.hpp"

namespace pmpthermo::pmp {

namespace {

Operator hamiltonian_of(const ControlVector& u, const OpenSystem& sys) {
  return sys.model->hamiltonian(std::span<const double>(u.hamiltonian_params));
}

void check_shape(const Operator& a, const OpenSystem& sys, const char* what) {
  if (!sys.model) throw DomainError("open system has no model");
  const auto d = static_cast<Eigen::Index>(sys.model->dim());
  if (a.rows() != d || a.cols() != d) throw ShapeError(std::string(what) + " has the wrong dimension");
}

}  // namespace

Operator qubit_costate(double q) {
  Operator pi = Operator::Zero(2, 2);
  pi(0, 0) = q;
  pi(1, 1) = -q;
  return pi;
}

double pseudo_hamiltonian(const Operator& rho, const Operator& pi, const ControlVector& u,
                          const OpenSystem& sys, double lambda) {
  check_shape(pi, sys, "costate");
  const Operator drho = lindblad_rhs(rho, u, sys);
  return trace_product(pi - hamiltonian_of(u, sys), drho) + lambda * (rho.trace().real() - 1.0);
}

Operator costate_rhs(const Operator& pi, const ControlVector& u, const OpenSystem& sys, double lambda) {
  check_shape(pi, sys, "costate");
  Operator out = lindblad_adjoint(pi - hamiltonian_of(u, sys), u, sys);
  out.diagonal().array() += lambda;
  return -out;
}

double gauge_lambda(const Operator& pi, const ControlVector& u, const OpenSystem& sys) {
  check_shape(pi, sys, "costate");
  const Operator a = lindblad_adjoint(pi - hamiltonian_of(u, sys), u, sys);
  return -a.trace().real() / static_cast<double>(a.rows());
}

double lambda_from_gauge(const Operator& pi_dot, const Operator& rho_eq, const ControlVector& u,
                         const OpenSystem& sys) {
  check_shape(pi_dot, sys, "costate derivative");
  const double residual = lindblad_rhs(rho_eq, u, sys).cwiseAbs().maxCoeff();
  if (residual > kFixedPointTol) {
    throw DomainError("rho_eq is not a fixed point of the generator (residual " + io::format_number(residual) + ")");
  }
  return -trace_product(rho_eq, pi_dot);
}

double q_min_formula(const Operator& pi0, const Operator& rho0, const Operator& pi_tau,
                     const Operator& rho_tau, double lambda_integral) {
  return trace_product(pi0, rho0) - trace_product(pi_tau, rho_tau) - lambda_integral;
}

double switching_functional(const Operator& rho, const Operator& pi, const ControlVector& u,
                            const OpenSystem& sys) {
  check_shape(rho, sys, "state");
  check_shape(pi, sys, "costate");
  const std::span<const double> params(u.hamiltonian_params);
  const Operator diff = sys.model->dissipator(rho, sys.baths.hot, params) -
                        sys.model->dissipator(rho, sys.baths.cold, params);
  return trace_product(pi - hamiltonian_of(u, sys), diff);
}

double qubit_switching_functional(double q, double u, double beta_c, double beta_h) {
  // n_c - n_h, which equals the quotient of exponentials but stays finite for large u
  const double nc = qubit_gibbs_population(beta_c, u);
  const double nh = qubit_gibbs_population(beta_h, u);
  return (2.0 * q + u) * (nc - nh);
}

BathChoice select_bath(double A, BathLabel current, double gamma, double tie_tol) {
  BathLabel bath = current;
  if (A > tie_tol) {
    bath = BathLabel::cold;
  } else if (A < -tie_tol) {
    bath = BathLabel::hot;
  }
  return bath == BathLabel::cold ? BathChoice{bath, gamma, 0.0} : BathChoice{bath, 0.0, gamma};
}

double stationarity_residual(const Operator& rho, const Operator& pi, const ControlVector& u,
                             const OpenSystem& sys, std::size_t k) {
  const std::span<const double> params(u.hamiltonian_params);
  const Operator dl = lindblad_rhs_derivative(rho, u, sys, k);
  const Operator dh = sys.model->hamiltonian_derivative(params, k);
  return trace_product(pi - hamiltonian_of(u, sys), dl) - trace_product(dh, lindblad_rhs(rho, u, sys));
}

PmpResiduals conserved_k_residual(const CostateTrajectory& traj, const OpenSystem& sys) {
  PmpResiduals r;
  r.nodes = traj.nodes.size();
  for (const auto& node : traj.nodes) {
    const double h = pseudo_hamiltonian(node.rho, node.pi, node.control, sys, node.lambda);
    r.max_conservation = std::max(r.max_conservation, std::fabs(h - traj.K));
    for (std::size_t k = 0; k < sys.model->num_controls(); ++k) {
      r.max_stationarity =
          std::max(r.max_stationarity, std::fabs(stationarity_residual(node.rho, node.pi, node.control, sys, k)));
    }
    const Operator expected = costate_rhs(node.pi, node.control, sys, node.lambda);
    r.max_costate_ode = std::max(r.max_costate_ode, (node.pi_dot - expected).cwiseAbs().maxCoeff());
  }
  return r;
}

std::string residuals_json(const PmpResiduals& r) {
  return "{\"max_conservation\": " + io::format_number(r.max_conservation) +
         ", \"max_stationarity\": " + io::format_number(r.max_stationarity) +
         ", \"max_costate_ode\": " + io::format_number(r.max_costate_ode) +
         ", \"nodes\": " + std::to_string(r.nodes) + "}";
}

CostateTrajectory qubit_isotherm_nodes(double K, qubit::Branch kind, double x0, double x1,
                                       const OpenSystem& sys, std::size_t count, double gamma, double t0) {
  if (sys.model->dim() != 2) throw ShapeError("qubit isotherm needs a two-level model");
  if (count < 2) throw DomainError("need at least two nodes");
  const BathSpec& bath = kind == qubit::Branch::cold ? sys.baths.cold : sys.baths.hot;
  const double beta = bath.beta;
  const double m = qubit::mu(K, beta, {kind}, gamma);
  const double chi0 = m == 0.0 ? 0.0 : qubit::chi(x0, m);

  CostateTrajectory traj;
  traj.K = K;
  traj.nodes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(count - 1);
    TrajectoryNode node;
    node.t = t0 + (m == 0.0 ? 0.0 : (qubit::chi(x, m) - chi0) / gamma);
    const double p = qubit::isotherm_p(x, m);
    node.rho = DensityMatrix::qubit(p).matrix();
    node.pi = qubit_costate(qubit::costate_q(x, m, beta));
    node.control.hamiltonian_params = {qubit::u_of_x(x, beta)};
    node.control.gamma_c = kind == qubit::Branch::cold ? gamma : 0.0;
    node.control.gamma_h = kind == qubit::Branch::cold ? 0.0 : gamma;
    node.lambda = gauge_lambda(node.pi, node.control, sys);
    // chain rule through x(t)
    const double xdot = qubit::x_rate(x, m, gamma);
    const double sdot = (m / beta) * (1.0 - 1.0 / (x * x)) * xdot;
    const double udot = 2.0 * xdot / (beta * x);
    node.pi_dot = qubit_costate(0.5 * (sdot - udot));
    traj.nodes.push_back(std::move(node));
  }
  return traj;
}

CostateTrajectory co_integrate(const DensityMatrix& rho0, const Operator& pi0, const Protocol& protocol,
                               const OpenSystem& sys, double K, const IntegratorOptions& options) {
  if (protocol.empty()) throw DomainError("empty protocol");
  check_shape(pi0, sys, "costate");
  const auto d = static_cast<Eigen::Index>(sys.model->dim());
  if (rho0.matrix().rows() != d) throw ShapeError("initial state dimension mismatch");
  const Eigen::Index n2 = d * d;

  auto pack = [&](const Operator& rho, const Operator& pi, Eigen::VectorXd& y) {
    for (Eigen::Index i = 0; i < n2; ++i) {
      y[i] = rho.data()[i].real();
      y[n2 + i] = rho.data()[i].imag();
      y[2 * n2 + i] = pi.data()[i].real();
      y[3 * n2 + i] = pi.data()[i].imag();
    }
  };
  auto unpack = [&](const Eigen::VectorXd& y, Operator& rho, Operator& pi) {
    rho.resize(d, d);
    pi.resize(d, d);
    for (Eigen::Index i = 0; i < n2; ++i) {
      rho.data()[i] = Complex(y[i], y[n2 + i]);
      pi.data()[i] = Complex(y[2 * n2 + i], y[3 * n2 + i]);
    }
  };

  Eigen::VectorXd y(4 * n2);
  pack(rho0.matrix(), pi0, y);

  ode::Options opts;
  opts.rtol = options.rtol;
  opts.atol = options.atol;
  opts.max_step = options.max_step;
  opts.max_steps = options.max_steps;

  CostateTrajectory traj;
  traj.K = K;
  auto record = [&](double t, const ControlVector& c, const Eigen::VectorXd& state) {
    TrajectoryNode node;
    node.t = t;
    unpack(state, node.rho, node.pi);
    node.control = c;
    node.lambda = gauge_lambda(node.pi, c, sys);
    node.pi_dot = costate_rhs(node.pi, c, sys, node.lambda);
    traj.nodes.push_back(std::move(node));
  };

  for (const auto& piece : protocol.pieces()) {
    record(piece.t_begin, piece.control(piece.t_begin), y);
    auto rhs = [&](double t, const Eigen::VectorXd& state, Eigen::VectorXd& dy) {
      const ControlVector c = piece.control(t);
      Operator rho, pi;
      unpack(state, rho, pi);
      const Operator drho = lindblad_rhs(rho, c, sys);
      const Operator dpi = costate_rhs(pi, c, sys, gauge_lambda(pi, c, sys));
      pack(drho, dpi, dy);
    };
    auto observe = [&](double t, const Eigen::VectorXd& state) {
      if (options.record_samples) record(t, piece.control(t), state);
    };
    ode::integrate_dopri(rhs, piece.t_begin, piece.t_end, y, opts, observe);
  }
  return traj;
}

}  // namespace pmpthermo::pmp
