#include "rkocp/dlqr.hpp"

#include <sstream>

#include "rkocp/error.hpp"

namespace rkocp {

Eigen::VectorXd DiscreteTrajectory::stage_control(int k, int stage) const {
  const auto& Uk = U[static_cast<std::size_t>(k)];
  const auto m = Uk.size() / stages;
  return Uk.segment(stage * m, m);
}

namespace dlqr {

DiscreteLQSystem assemble(const LQProblem& prob, const ButcherTableau& tab, int steps) {
  if (steps < 1) throw Error(ErrorKind::InvalidProblem, "step count must be at least 1");
  const int s = tab.stages();
  const int n = prob.n();
  const double h = prob.tf() / steps;

  const std::vector<Eigen::MatrixXd> As(static_cast<std::size_t>(s), prob.A());
  const std::vector<Eigen::MatrixXd> Bs(static_cast<std::size_t>(s), prob.B());
  const Eigen::MatrixXd coupling = coupled_blocks(tab.a(), As, h);
  const Eigen::MatrixXd input = coupled_blocks(tab.a(), Bs, h);

  DiscreteLQSystem sys;
  sys.steps = steps;
  sys.h = h;
  sys.stages = s;
  std::tie(sys.E, sys.F) = solve_stage_system(coupling, stacked_identity(s, n), input, h);
  const Eigen::MatrixXd bA = weighted_row(tab.b(), As, h);
  sys.G = Eigen::MatrixXd::Identity(n, n) + bA * sys.E;
  sys.H = bA * sys.F + weighted_row(tab.b(), Bs, h);
  sys.cost = stage_cost_blocks(tab, h, prob.Q(), prob.S(), prob.R());
  return sys;
}

RiccatiPass riccati_backward(const DiscreteLQSystem& sys, const LQProblem& prob) {
  const auto& [Qh, Sh, Rh] = sys.cost;
  const auto& E = sys.E;
  const auto& F = sys.F;
  const auto& G = sys.G;
  const auto& H = sys.H;

  // U-independent parts of the stage Hessian and cross term. With Sh = 0 these
  // are F'QhF + Rh and F'QhE.
  const Eigen::MatrixXd stage_uu = F.transpose() * Qh * F + F.transpose() * Sh +
                                   Sh.transpose() * F + Rh;
  const Eigen::MatrixXd stage_ux = F.transpose() * Qh * E + Sh.transpose() * E;

  RiccatiPass pass;
  pass.M.resize(static_cast<std::size_t>(sys.steps) + 1);
  pass.L.resize(static_cast<std::size_t>(sys.steps));
  pass.M.back() = prob.M();
  for (int k = sys.steps - 1; k >= 0; --k) {
    const auto& next = pass.M[static_cast<std::size_t>(k) + 1];
    const Eigen::MatrixXd huu = stage_uu + H.transpose() * next * H;
    const Eigen::MatrixXd hux = stage_ux + H.transpose() * next * G;
    Eigen::LLT<Eigen::MatrixXd> llt(huu);
    if (llt.info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "stage Hessian is not positive definite at step " << k;
      throw Error(ErrorKind::RiccatiFailure, msg.str());
    }
    Eigen::MatrixXd L = -llt.solve(hux);
    const Eigen::MatrixXd stage_state = E + F * L;
    const Eigen::MatrixXd closed = G + H * L;
    const Eigen::MatrixXd cross = stage_state.transpose() * Sh * L;
    Eigen::MatrixXd Mk = stage_state.transpose() * Qh * stage_state + cross + cross.transpose() +
                         L.transpose() * Rh * L + closed.transpose() * next * closed;
    pass.M[static_cast<std::size_t>(k)] = 0.5 * (Mk + Mk.transpose());
    pass.L[static_cast<std::size_t>(k)] = std::move(L);
  }
  return pass;
}

DiscreteTrajectory rollout(const DiscreteLQSystem& sys, const RiccatiPass& pass,
                           const LQProblem& prob, const Eigen::VectorXd& x0) {
  const auto N = static_cast<std::size_t>(sys.steps);
  DiscreteTrajectory traj;
  traj.h = sys.h;
  traj.stages = sys.stages;
  traj.x.reserve(N + 1);
  traj.X.reserve(N);
  traj.U.reserve(N);
  traj.x.push_back(x0);
  for (std::size_t k = 0; k < N; ++k) {
    const auto& xk = traj.x[k];
    Eigen::VectorXd Uk = pass.L[k] * xk;
    traj.X.push_back(sys.E * xk + sys.F * Uk);
    traj.x.push_back(sys.G * xk + sys.H * Uk);
    traj.U.push_back(std::move(Uk));
  }
  const Eigen::LLT<Eigen::MatrixXd> rfac(prob.R());
  traj.p.reserve(N + 1);
  traj.u.reserve(N + 1);
  for (std::size_t k = 0; k <= N; ++k) {
    traj.p.push_back(pass.M[k] * traj.x[k]);
    traj.u.push_back(-rfac.solve(prob.B().transpose() * traj.p[k] +
                                 prob.S().transpose() * traj.x[k]));
  }
  return traj;
}

DiscreteTrajectory solve(const LQProblem& prob, const ButcherTableau& tab, int steps) {
  const auto sys = assemble(prob, tab, steps);
  const auto pass = riccati_backward(sys, prob);
  return rollout(sys, pass, prob, prob.x0());
}

double discrete_cost(const DiscreteLQSystem& sys, const LQProblem& prob,
                     const DiscreteTrajectory& traj) {
  const auto& [Qh, Sh, Rh] = sys.cost;
  double cost = 0.0;
  for (int k = 0; k < traj.steps(); ++k) {
    const auto& X = traj.X[static_cast<std::size_t>(k)];
    const auto& U = traj.U[static_cast<std::size_t>(k)];
    cost += 0.5 * X.dot(Qh * X) + X.dot(Sh * U) + 0.5 * U.dot(Rh * U);
  }
  const auto& xN = traj.x.back();
  return cost + 0.5 * xN.dot(prob.M() * xN);
}

}  // namespace dlqr
}  // namespace rkocp
