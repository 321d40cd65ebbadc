#include "rkocp/oracle.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "rkocp/discretization.hpp"
#include "rkocp/error.hpp"
#include "rkocp/ilqr.hpp"

namespace rkocp::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

QPSolution qp_solve(const LQProblem& prob, const ButcherTableau& tab, int steps) {
  if (steps < 1) throw Error(ErrorKind::InvalidProblem, "step count must be at least 1");
  const int s = tab.stages();
  const int n = prob.n();
  const int m = prob.m();
  const int N = steps;
  const double h = prob.tf() / N;
  const auto [Qh, Sh, Rh] = stage_cost_blocks(tab, h, prob.Q(), prob.S(), prob.R());

  const int nu = s * m * N;
  const int nX = s * n * N;
  const int nx = n * (N + 1);
  const int nz = nu + nX + nx;
  const int nc = n + N * n + N * s * n;
  auto u_off = [&](int k, int i) { return k * s * m + i * m; };
  auto X_off = [&](int k, int i) { return nu + k * s * n + i * n; };
  auto x_off = [&](int k) { return nu + nX + k * n; };

  MatrixXd kkt = MatrixXd::Zero(nz + nc, nz + nc);
  VectorXd rhs = VectorXd::Zero(nz + nc);

  for (int k = 0; k < N; ++k) {
    kkt.block(X_off(k, 0), X_off(k, 0), s * n, s * n) = Qh;
    kkt.block(u_off(k, 0), u_off(k, 0), s * m, s * m) = Rh;
    kkt.block(X_off(k, 0), u_off(k, 0), s * n, s * m) = Sh;
    kkt.block(u_off(k, 0), X_off(k, 0), s * m, s * n) = Sh.transpose();
  }
  kkt.block(x_off(N), x_off(N), n, n) = prob.M();

  const MatrixXd I = MatrixXd::Identity(n, n);
  MatrixXd cons = MatrixXd::Zero(nc, nz);
  int row = 0;
  cons.block(row, x_off(0), n, n) = I;
  rhs.segment(nz + row, n) = prob.x0();
  row += n;
  const int step_rows = row;
  for (int k = 0; k < N; ++k) {
    cons.block(row, x_off(k), n, n) += I;
    cons.block(row, x_off(k + 1), n, n) -= I;
    for (int i = 0; i < s; ++i) {
      const double w = h * tab.b()(i);
      cons.block(row, X_off(k, i), n, n) += w * prob.A();
      cons.block(row, u_off(k, i), n, m) += w * prob.B();
    }
    row += n;
  }
  const int stage_rows = row;
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < s; ++i) {
      cons.block(row, x_off(k), n, n) += I;
      cons.block(row, X_off(k, i), n, n) -= I;
      for (int j = 0; j < s; ++j) {
        const double w = h * tab.a()(i, j);
        if (w == 0.0) continue;
        cons.block(row, X_off(k, j), n, n) += w * prob.A();
        cons.block(row, u_off(k, j), n, m) += w * prob.B();
      }
      row += n;
    }
  }
  kkt.block(nz, 0, nc, nz) = cons;
  kkt.block(0, nz, nz, nc) = cons.transpose();

  Eigen::PartialPivLU<MatrixXd> lu(kkt);
  if (!(lu.rcond() > 1e-15))
    throw Error(ErrorKind::OracleFailure, "KKT matrix is numerically singular");
  const VectorXd sol = lu.solve(rhs);

  QPSolution out;
  out.kkt_residual = (kkt * sol - rhs).cwiseAbs().maxCoeff();
  const double data_norm = kkt.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff();
  const double scale = 1.0 + data_norm * (1.0 + sol.cwiseAbs().maxCoeff());
  if (!(out.kkt_residual < 1e-10 * scale)) {
    std::ostringstream msg;
    msg << "KKT residual " << out.kkt_residual << " too large";
    throw Error(ErrorKind::OracleFailure, msg.str());
  }
  out.U = sol.segment(0, nu);
  out.X = sol.segment(nu, nX);
  out.xd = sol.segment(nu + nX, nx);
  out.initial_multiplier = sol.segment(nz, n);
  for (int k = 0; k < N; ++k) {
    out.step_multipliers.push_back(sol.segment(nz + step_rows + k * n, n));
    out.stage_multipliers.push_back(sol.segment(nz + stage_rows + k * s * n, s * n));
  }
  return out;
}

VectorXd grad_fd(const NonlinearProblem& prob, const ButcherTableau& tab, int steps,
                 const VectorXd& U, std::optional<double> eps) {
  const double step = eps.value_or(1e-6 * (1.0 + (U.size() ? U.cwiseAbs().maxCoeff() : 0.0)));
  VectorXd grad(U.size());
  VectorXd probe = U;
  for (Eigen::Index i = 0; i < U.size(); ++i) {
    probe(i) = U(i) + step;
    const double up = ilqr::rollout(prob, tab, steps, probe).cost;
    probe(i) = U(i) - step;
    const double dn = ilqr::rollout(prob, tab, steps, probe).cost;
    probe(i) = U(i);
    grad(i) = (up - dn) / (2.0 * step);
  }
  return grad;
}

VectorXd grad_exact(const NonlinearProblem& prob, const ButcherTableau& tab, int steps,
                    const VectorXd& U) {
  const auto state = ilqr::rollout(prob, tab, steps, U);
  return ilqr::gradient(prob, tab, state, ilqr::linearize(prob, tab, state));
}

QuasiNewtonData quasi_newton(const NonlinearProblem& prob, const ButcherTableau& tab, int steps,
                             const VectorXd& U) {
  const auto state = ilqr::rollout(prob, tab, steps, U);
  const auto lin = ilqr::linearize(prob, tab, state);
  const int s = state.stages;
  const int n = state.n;
  const int m = state.m;
  const int sm = s * m;
  const int sn = s * n;
  const auto nu = U.size();

  QuasiNewtonData out;
  out.stage_sensitivity = MatrixXd::Zero(static_cast<Eigen::Index>(sn) * steps, nu);
  MatrixXd dx = MatrixXd::Zero(n, nu);
  for (int k = 0; k < steps; ++k) {
    const auto& st = lin[static_cast<std::size_t>(k)];
    MatrixXd dX = st.E * dx;
    dX.middleCols(k * sm, sm) += st.F;
    out.stage_sensitivity.middleRows(k * sn, sn) = dX;
    MatrixXd next = st.G * dx;
    next.middleCols(k * sm, sm) += st.H;
    dx = std::move(next);
  }
  out.terminal_sensitivity = dx;

  const auto [Qh, Sh, Rh] = stage_cost_blocks(tab, state.h, prob.Q(), prob.S(), prob.R());
  MatrixXd Qbig = MatrixXd::Zero(static_cast<Eigen::Index>(sn) * steps, static_cast<Eigen::Index>(sn) * steps);
  MatrixXd Sbig = MatrixXd::Zero(static_cast<Eigen::Index>(sn) * steps, nu);
  MatrixXd Rbig = MatrixXd::Zero(nu, nu);
  for (int k = 0; k < steps; ++k) {
    Qbig.block(k * sn, k * sn, sn, sn) = Qh;
    Sbig.block(k * sn, k * sm, sn, sm) = Sh;
    Rbig.block(k * sm, k * sm, sm, sm) = Rh;
  }
  const MatrixXd& Fp = out.stage_sensitivity;
  const MatrixXd& FN = out.terminal_sensitivity;
  const MatrixXd FtS = Fp.transpose() * Sbig;
  out.W = Fp.transpose() * Qbig * Fp + FtS + FtS.transpose() + Rbig +
          FN.transpose() * prob.M() * FN;
  out.W = 0.5 * (out.W + out.W.transpose());
  const VectorXd xN = state.x(steps);
  out.Y = Fp.transpose() * (Qbig * state.X + Sbig * state.U) + Sbig.transpose() * state.X +
          Rbig * state.U + FN.transpose() * (prob.M() * xN);
  out.C = state.cost;

  Eigen::LLT<MatrixXd> llt(out.W);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::OracleFailure, "quasi-Newton metric W is not positive definite");
  out.direction = -llt.solve(out.Y);
  return out;
}

GradientComparison compare_gradients(const VectorXd& exact, const VectorXd& fd) {
  GradientComparison cmp;
  if (exact.size() == 0) return cmp;
  const VectorXd diff = (exact - fd).cwiseAbs();
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  cmp.max_relative_error = diff.maxCoeff(&cmp.worst_index) / scale;
  return cmp;
}

VectorXd random_controls(Eigen::Index dim, std::uint64_t seed) {
  // Built from raw engine bits so the sequence does not depend on the
  // standard library's distribution implementation.
  std::mt19937_64 gen(seed);
  VectorXd out(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double unit = static_cast<double>(gen() >> 11) * 0x1p-53;
    out(i) = 2.0 * unit - 1.0;
  }
  return out;
}

std::vector<ScalarCurveIterate> scalar_curve_demo(double u0, const ScalarCurveOptions& opts) {
  std::vector<ScalarCurveIterate> trace;
  double u = u0;
  trace.push_back({0, u, ScalarCurve::shifted_cost(u), 0.0});
  for (int it = 1; it <= opts.max_iter; ++it) {
    const double grad = ScalarCurve::gradient(u);
    if (std::abs(grad) < opts.tol) break;
    const double dir = -grad / ScalarCurve::metric(u);
    double alpha = 1.0;
    if (!opts.full_step) {
      const double base = u;
      alpha = ilqr::armijo_backtrack(
                  [&](double a) { return ScalarCurve::shifted_cost(base + a * dir); },
                  ScalarCurve::shifted_cost(u), grad * dir)
                  .alpha;
    }
    u += alpha * dir;
    trace.push_back({it, u, ScalarCurve::shifted_cost(u), alpha});
  }
  return trace;
}

}  // namespace rkocp::oracle
