#include "rkocp/ilqr.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "rkocp/discretization.hpp"

namespace rkocp::ilqr {

namespace {

constexpr int kFixedPointMaxIter = 100;
constexpr double kFixedPointTol = 1e-12;
constexpr int kNewtonMaxIter = 50;
constexpr double kNewtonTol = 1e-12;

using Eigen::MatrixXd;
using Eigen::VectorXd;

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Stage states of one step for explicit or implicit tableaus.
VectorXd stage_states(const Dynamics& dyn, const ButcherTableau& tab, double h,
                      const VectorXd& xk, const VectorXd& Uk, int k) {
  const int s = tab.stages();
  const auto n = xk.size();
  const auto m = Uk.size() / s;
  const auto& a = tab.a();
  VectorXd X(s * n);
  std::vector<VectorXd> rates(static_cast<std::size_t>(s), VectorXd::Zero(n));

  if (tab.is_explicit()) {
    for (int i = 0; i < s; ++i) {
      VectorXd xi = xk;
      for (int j = 0; j < i; ++j)
        if (a(i, j) != 0.0) xi += h * a(i, j) * rates[static_cast<std::size_t>(j)];
      rates[static_cast<std::size_t>(i)] = dyn.f(xi, Uk.segment(i * m, m));
      X.segment(i * n, n) = xi;
    }
    return X;
  }

  for (int i = 0; i < s; ++i) X.segment(i * n, n) = xk;
  const double tol = kFixedPointTol * (1.0 + inf_norm(xk));
  for (int sweep = 0; sweep < kFixedPointMaxIter; ++sweep) {
    for (int j = 0; j < s; ++j)
      rates[static_cast<std::size_t>(j)] = dyn.f(X.segment(j * n, n), Uk.segment(j * m, m));
    VectorXd next(s * n);
    for (int i = 0; i < s; ++i) {
      VectorXd xi = xk;
      for (int j = 0; j < s; ++j)
        if (a(i, j) != 0.0) xi += h * a(i, j) * rates[static_cast<std::size_t>(j)];
      next.segment(i * n, n) = xi;
    }
    const double change = inf_norm(next - X);
    X = std::move(next);
    if (!X.allFinite()) break;
    if (change <= tol) return X;
  }
  std::ostringstream msg;
  msg << "stage fixed-point iteration did not converge at step " << k << " (h = " << h << ")";
  throw Error(ErrorKind::RolloutDiverged, msg.str());
}

}  // namespace

NotConverged::NotConverged(SolveResult last)
    : Error(ErrorKind::NotConverged,
            [&] {
              std::ostringstream msg;
              msg << "gradient norm " << last.grad_inf_norm << " after " << last.iterations
                  << " iterations";
              return msg.str();
            }()),
      last_(std::move(last)) {}

IterateState rollout(const NonlinearProblem& prob, const ButcherTableau& tab, int steps,
                     const VectorXd& U) {
  if (steps < 1) throw Error(ErrorKind::InvalidProblem, "step count must be at least 1");
  const int s = tab.stages();
  const int n = prob.n();
  const int m = prob.m();
  if (U.size() != static_cast<Eigen::Index>(s) * m * steps)
    throw Error(ErrorKind::InvalidProblem, "control vector has the wrong length");

  IterateState st;
  st.steps = steps;
  st.stages = s;
  st.n = n;
  st.m = m;
  st.h = prob.tf() / steps;
  st.U = U;
  st.X.resize(static_cast<Eigen::Index>(s) * n * steps);
  st.xd.resize(static_cast<Eigen::Index>(n) * (steps + 1));
  st.xd.head(n) = prob.x0();

  const auto& dyn = prob.dynamics();
  const auto& [Q, S, R] = std::tie(prob.Q(), prob.S(), prob.R());
  const double h = st.h;
  double cost = 0.0;
  for (int k = 0; k < steps; ++k) {
    const VectorXd xk = st.x(k);
    const VectorXd Uk = st.U_k(k);
    const VectorXd Xk = stage_states(dyn, tab, h, xk, Uk, k);
    VectorXd next = xk;
    for (int i = 0; i < s; ++i) {
      const VectorXd xi = Xk.segment(i * n, n);
      const VectorXd ui = Uk.segment(i * m, m);
      next += h * tab.b()(i) * dyn.f(xi, ui);
      cost += h * tab.b()(i) * (0.5 * xi.dot(Q * xi) + xi.dot(S * ui) + 0.5 * ui.dot(R * ui));
    }
    if (!next.allFinite()) {
      std::ostringstream msg;
      msg << "state became non-finite at step " << k;
      throw Error(ErrorKind::RolloutDiverged, msg.str());
    }
    st.X.segment(k * s * n, s * n) = Xk;
    st.xd.segment((k + 1) * n, n) = next;
  }
  const VectorXd xN = st.x(steps);
  st.cost = cost + 0.5 * xN.dot(prob.M() * xN);
  return st;
}

std::vector<LinearizedStep> linearize(const NonlinearProblem& prob, const ButcherTableau& tab,
                                      const IterateState& state) {
  const int s = tab.stages();
  const int n = state.n;
  const int m = state.m;
  const double h = state.h;
  const auto& dyn = prob.dynamics();
  const MatrixXd Z = stacked_identity(s, n);

  std::vector<LinearizedStep> out;
  out.reserve(static_cast<std::size_t>(state.steps));
  std::vector<MatrixXd> jx(static_cast<std::size_t>(s));
  std::vector<MatrixXd> ju(static_cast<std::size_t>(s));
  for (int k = 0; k < state.steps; ++k) {
    const VectorXd Xk = state.X_k(k);
    const VectorXd Uk = state.U_k(k);
    for (int j = 0; j < s; ++j) {
      jx[static_cast<std::size_t>(j)] = dyn.jx(Xk.segment(j * n, n), Uk.segment(j * m, m));
      ju[static_cast<std::size_t>(j)] = dyn.ju(Xk.segment(j * n, n), Uk.segment(j * m, m));
    }
    LinearizedStep step;
    step.A1 = coupled_blocks(tab.a(), jx, h);
    step.A2 = coupled_blocks(tab.a(), ju, h);
    step.B = weighted_row(tab.b(), jx, h);
    step.C = weighted_row(tab.b(), ju, h);
    std::tie(step.E, step.F) = solve_stage_system(step.A1, Z, step.A2, h);
    step.G = MatrixXd::Identity(n, n) + step.B * step.E;
    step.H = step.B * step.F + step.C;
    const VectorXd xk = state.x(k);
    step.D1 = Xk - step.E * xk - step.F * Uk;
    step.D2 = state.x(k + 1) - step.G * xk - step.H * Uk;
    out.push_back(std::move(step));
  }
  return out;
}

VectorXd gradient(const NonlinearProblem& prob, const ButcherTableau& tab,
                  const IterateState& state, const std::vector<LinearizedStep>& steps) {
  const auto [Qh, Sh, Rh] = stage_cost_blocks(tab, state.h, prob.Q(), prob.S(), prob.R());
  const int sm = state.stages * state.m;
  VectorXd grad(state.U.size());
  VectorXd lambda = prob.M() * state.x(state.steps);
  for (int k = state.steps - 1; k >= 0; --k) {
    const auto& st = steps[static_cast<std::size_t>(k)];
    const VectorXd Xk = state.X_k(k);
    const VectorXd Uk = state.U_k(k);
    const VectorXd dX = Qh * Xk + Sh * Uk;
    grad.segment(k * sm, sm) =
        st.H.transpose() * lambda + st.F.transpose() * dX + Sh.transpose() * Xk + Rh * Uk;
    lambda = st.G.transpose() * lambda + st.E.transpose() * dX;
  }
  return grad;
}

AffineBackwardPass backward(const std::vector<LinearizedStep>& steps, const NonlinearProblem& prob,
                            const ButcherTableau& tab, double h) {
  const auto [Qh, Sh, Rh] = stage_cost_blocks(tab, h, prob.Q(), prob.S(), prob.R());
  const auto N = steps.size();
  const int n = prob.n();

  AffineBackwardPass pass;
  pass.M.resize(N + 1);
  pass.Y.resize(N + 1);
  pass.U1.resize(N);
  pass.U2.resize(N);
  pass.M[N] = prob.M();
  pass.Y[N] = VectorXd::Zero(n);

  // With Sh = 0 every expression below is the plain tangent-plane recursion;
  // the Sh terms come from the x'Su running cost.
  for (std::size_t idx = N; idx-- > 0;) {
    const auto& st = steps[idx];
    const auto& Mn = pass.M[idx + 1];
    const auto& Yn = pass.Y[idx + 1];
    const MatrixXd FtQh = st.F.transpose() * Qh;
    const MatrixXd HtM = st.H.transpose() * Mn;
    const MatrixXd huu = FtQh * st.F + st.F.transpose() * Sh + Sh.transpose() * st.F + Rh +
                         HtM * st.H;
    const MatrixXd hux = FtQh * st.E + Sh.transpose() * st.E + HtM * st.G;
    const VectorXd hu0 = FtQh * st.D1 + Sh.transpose() * st.D1 + HtM * st.D2 +
                         st.H.transpose() * Yn;
    Eigen::LLT<MatrixXd> llt(huu);
    if (llt.info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "stage Hessian is not positive definite at step " << idx;
      throw Error(ErrorKind::BackwardFailure, msg.str());
    }
    MatrixXd U1 = -llt.solve(hux);
    VectorXd U2 = -llt.solve(hu0);

    const MatrixXd stage_gain = st.E + st.F * U1;
    const VectorXd stage_offset = st.F * U2 + st.D1;
    const MatrixXd closed = st.G + st.H * U1;
    const VectorXd closed_offset = st.H * U2 + st.D2;

    const MatrixXd cross = stage_gain.transpose() * Sh * U1;
    MatrixXd Mk = stage_gain.transpose() * Qh * stage_gain + cross + cross.transpose() +
                  U1.transpose() * Rh * U1 + closed.transpose() * Mn * closed;
    pass.M[idx] = 0.5 * (Mk + Mk.transpose());
    pass.Y[idx] = stage_gain.transpose() * Qh * stage_offset +
                  stage_gain.transpose() * Sh * U2 + U1.transpose() * Sh.transpose() * stage_offset +
                  U1.transpose() * Rh * U2 + closed.transpose() * Mn * closed_offset +
                  closed.transpose() * Yn;
    pass.U1[idx] = std::move(U1);
    pass.U2[idx] = std::move(U2);
  }
  return pass;
}

VectorXd direction(const IterateState& state, const AffineBackwardPass& pass,
                   const std::vector<LinearizedStep>& steps, const VectorXd& x0) {
  const int sm = state.stages * state.m;
  VectorXd dU(state.U.size());
  VectorXd x = x0;
  for (int k = 0; k < state.steps; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const VectorXd Uk = pass.U1[idx] * x + pass.U2[idx];
    dU.segment(k * sm, sm) = Uk - state.U_k(k);
    x = steps[idx].G * x + steps[idx].H * Uk + steps[idx].D2;
  }
  return dU;
}

ArmijoResult armijo_backtrack(const std::function<double(double)>& phi, double phi0,
                              double slope) {
  ArmijoResult res;
  for (double alpha = 1.0; alpha >= kMinStep; alpha *= 0.5) {
    const double value = phi(alpha);
    ++res.evaluations;
    if (std::isfinite(value) && value <= phi0 + kArmijoC1 * alpha * slope) {
      res.alpha = alpha;
      res.value = value;
      return res;
    }
  }
  std::ostringstream msg;
  msg << "no sufficient decrease down to alpha = 2^-30 (slope " << slope << ")";
  throw Error(ErrorKind::LineSearchFailed, msg.str());
}

LineSearchResult line_search(const NonlinearProblem& prob, const ButcherTableau& tab,
                             const IterateState& state, const VectorXd& dU, const VectorXd& grad) {
  if (dU.size() == 0 || dU.isZero(0.0)) return {1.0, state};
  std::optional<IterateState> trial;
  auto phi = [&](double alpha) {
    try {
      trial = rollout(prob, tab, state.steps, state.U + alpha * dU);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::RolloutDiverged) throw;
      return std::numeric_limits<double>::infinity();
    }
    return trial->cost;
  };
  const auto res = armijo_backtrack(phi, state.cost, grad.dot(dU));
  return {res.alpha, std::move(*trial)};
}

SolveResult solve(const NonlinearProblem& prob, const ButcherTableau& tab, int steps,
                  const std::optional<VectorXd>& U0, const SolveOptions& opts) {
  const VectorXd start =
      U0 ? *U0 : VectorXd::Zero(static_cast<Eigen::Index>(tab.stages()) * prob.m() * steps);
  SolveResult out;
  out.state = rollout(prob, tab, steps, start);
  auto lin = linearize(prob, tab, out.state);
  VectorXd grad = gradient(prob, tab, out.state, lin);
  out.grad_inf_norm = inf_norm(grad);
  out.log.push_back({0, out.state.cost, out.grad_inf_norm, 0.0, 0.0, 0.0});

  while (!(out.grad_inf_norm < opts.tol)) {
    if (out.iterations >= opts.max_iter) throw NotConverged(std::move(out));
    const auto pass = backward(lin, prob, tab, out.state.h);
    const VectorXd dU = direction(out.state, pass, lin, prob.x0());
    const double slope = grad.dot(dU);
    auto ls = line_search(prob, tab, out.state, dU, grad);
    out.state = std::move(ls.state);
    lin = linearize(prob, tab, out.state);
    grad = gradient(prob, tab, out.state, lin);
    out.grad_inf_norm = inf_norm(grad);
    ++out.iterations;
    out.log.push_back({out.iterations, out.state.cost, out.grad_inf_norm,
                       ls.alpha * inf_norm(dU), ls.alpha, slope});
  }
  return out;
}

CostateTrajectory costates(const NonlinearProblem& prob, const ButcherTableau& tab,
                           const IterateState& state) {
  const auto adj = adjoint(tab);
  const int s = state.stages;
  const int n = state.n;
  const int m = state.m;
  const double h = state.h;
  const auto& dyn = prob.dynamics();
  const auto N = static_cast<std::size_t>(state.steps);

  CostateTrajectory out;
  out.p.resize(N + 1);
  out.p_stage.resize(N);
  out.p[N] = prob.M() * state.x(state.steps);

  // Unknowns (p_k, p_k1, ..., p_ks). Rows 0..n-1:
  //   p_k - h sum_i b_i Jx_i' p_ki = p_{k+1} + h sum_i b_i q_i,
  // rows for stage i:
  //   p_ki - p_k + h sum_j abar_ij Jx_j' p_kj = -h sum_j abar_ij q_j,
  // with q_i = Q x_ki + S u_ki.
  const int dim = (s + 1) * n;
  std::vector<MatrixXd> jxt(static_cast<std::size_t>(s));
  std::vector<VectorXd> q(static_cast<std::size_t>(s));
  for (std::size_t idx = N; idx-- > 0;) {
    const int k = static_cast<int>(idx);
    const VectorXd Xk = state.X_k(k);
    const VectorXd Uk = state.U_k(k);
    for (int j = 0; j < s; ++j) {
      const VectorXd xj = Xk.segment(j * n, n);
      const VectorXd uj = Uk.segment(j * m, m);
      jxt[static_cast<std::size_t>(j)] = dyn.jx(xj, uj).transpose();
      q[static_cast<std::size_t>(j)] = prob.Q() * xj + prob.S() * uj;
    }
    MatrixXd sys = MatrixXd::Zero(dim, dim);
    VectorXd rhs = VectorXd::Zero(dim);
    sys.block(0, 0, n, n).setIdentity();
    rhs.head(n) = out.p[idx + 1];
    for (int i = 0; i < s; ++i) {
      const double w = h * tab.b()(i);
      sys.block(0, (i + 1) * n, n, n) = -w * jxt[static_cast<std::size_t>(i)];
      rhs.head(n) += w * q[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < s; ++i) {
      const int row = (i + 1) * n;
      sys.block(row, 0, n, n) = -MatrixXd::Identity(n, n);
      sys.block(row, row, n, n) += MatrixXd::Identity(n, n);
      for (int j = 0; j < s; ++j) {
        const double w = h * adj.abar(i, j);
        if (w == 0.0) continue;
        sys.block(row, (j + 1) * n, n, n) += w * jxt[static_cast<std::size_t>(j)];
        rhs.segment(row, n) -= w * q[static_cast<std::size_t>(j)];
      }
    }
    Eigen::PartialPivLU<MatrixXd> lu(sys);
    if (!(lu.rcond() > 1e-13)) {
      std::ostringstream msg;
      msg << "costate system is singular at step " << k << " (h = " << h << ")";
      throw Error(ErrorKind::CostateFailure, msg.str());
    }
    const VectorXd sol = lu.solve(rhs);
    out.p[idx] = sol.head(n);
    out.p_stage[idx] = sol.tail(s * n);
  }
  return out;
}

std::vector<VectorXd> node_controls(const NonlinearProblem& prob, const IterateState& state,
                                    const CostateTrajectory& costates) {
  const auto& dyn = prob.dynamics();
  const int m = state.m;
  const Eigen::LLT<MatrixXd> rfac(prob.R());
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(state.steps) + 1);

  for (int k = 0; k <= state.steps; ++k) {
    const VectorXd xk = state.x(k);
    const VectorXd& pk = costates.p[static_cast<std::size_t>(k)];
    const VectorXd sx = prob.S().transpose() * xk;
    if (auto B = dyn.input_matrix(xk)) {
      out.push_back(-rfac.solve(B->transpose() * pk + sx));
      continue;
    }
    // Newton on g(u) = Ju(x,u)'p + Ru + S'x; the derivative of Ju(x,u)'p in u
    // is taken by central differences.
    const int guess_step = std::min(k, state.steps - 1);
    const int guess_stage = k < state.steps ? 0 : state.stages - 1;
    VectorXd u = state.U_k(guess_step).segment(guess_stage * m, m);
    auto residual = [&](const VectorXd& v) -> VectorXd {
      return dyn.ju(xk, v).transpose() * pk + prob.R() * v + sx;
    };
    bool converged = false;
    for (int it = 0; it < kNewtonMaxIter; ++it) {
      const VectorXd g = residual(u);
      MatrixXd jac = prob.R();
      for (int c = 0; c < m; ++c) {
        const double eps = 1e-6 * (1.0 + std::abs(u(c)));
        VectorXd up = u;
        VectorXd dn = u;
        up(c) += eps;
        dn(c) -= eps;
        jac.col(c) += (dyn.ju(xk, up).transpose() * pk - dyn.ju(xk, dn).transpose() * pk) /
                      (2.0 * eps);
      }
      const VectorXd delta = jac.partialPivLu().solve(g);
      u -= delta;
      if (!u.allFinite()) break;
      if (inf_norm(delta) <= kNewtonTol * (1.0 + inf_norm(u))) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "Newton iteration for the node control did not converge at k = " << k;
      throw Error(ErrorKind::NodeControlFailure, msg.str());
    }
    out.push_back(std::move(u));
  }
  return out;
}

DiscreteTrajectory to_trajectory(const IterateState& state, const CostateTrajectory& costates,
                                 std::vector<VectorXd> node_u) {
  DiscreteTrajectory traj;
  traj.h = state.h;
  traj.stages = state.stages;
  for (int k = 0; k <= state.steps; ++k) traj.x.emplace_back(state.x(k));
  for (int k = 0; k < state.steps; ++k) {
    traj.X.emplace_back(state.X_k(k));
    traj.U.emplace_back(state.U_k(k));
  }
  traj.p = costates.p;
  traj.u = std::move(node_u);
  return traj;
}

}  // namespace rkocp::ilqr
