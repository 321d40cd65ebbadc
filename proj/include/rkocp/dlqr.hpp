#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rkocp/discretization.hpp"
#include "rkocp/problem.hpp"
#include "rkocp/tableau.hpp"

namespace rkocp {

/// Node states, stage states/controls, costates and node controls of a
/// discretized solution. Stage stacks are ordered (stage 1, ..., stage s).
struct DiscreteTrajectory {
  double h = 0.0;
  int stages = 0;
  std::vector<Eigen::VectorXd> x;  // N + 1 node states
  std::vector<Eigen::VectorXd> X;  // N stage-state stacks (sn)
  std::vector<Eigen::VectorXd> U;  // N stage-control stacks (sm)
  std::vector<Eigen::VectorXd> p;  // N + 1 node costates
  std::vector<Eigen::VectorXd> u;  // N + 1 node controls

  [[nodiscard]] int steps() const noexcept { return static_cast<int>(U.size()); }
  /// Control of stage `stage` (zero-based) at step k.
  [[nodiscard]] Eigen::VectorXd stage_control(int k, int stage) const;
};

namespace dlqr {

/// One-step linear maps X_k = E x_k + F U_k, x_{k+1} = G x_k + H U_k and the
/// stage cost blocks.
struct DiscreteLQSystem {
  int steps = 0;
  double h = 0.0;
  int stages = 0;
  Eigen::MatrixXd E, F, G, H;
  StageCostBlocks cost;
};

struct RiccatiPass {
  std::vector<Eigen::MatrixXd> M;  // N + 1 value-function Hessians, M[N] = terminal M
  std::vector<Eigen::MatrixXd> L;  // N gains, U_k = L_k x_k
};

/// Throws Error(StepTooLarge) when I - hA (x) A is singular.
DiscreteLQSystem assemble(const LQProblem& prob, const ButcherTableau& tab, int steps);

/// Throws Error(RiccatiFailure) when the stage Hessian is not positive definite.
RiccatiPass riccati_backward(const DiscreteLQSystem& sys, const LQProblem& prob);

/// Closes the loop from x0 and recovers costates p_k = M_k x_k and node
/// controls u_k = -R^{-1}(B'p_k + S'x_k), including k = N.
DiscreteTrajectory rollout(const DiscreteLQSystem& sys, const RiccatiPass& pass,
                           const LQProblem& prob, const Eigen::VectorXd& x0);

/// assemble + riccati_backward + rollout from prob.x0().
DiscreteTrajectory solve(const LQProblem& prob, const ButcherTableau& tab, int steps);

/// Discrete cost J_d of a trajectory (stage quadrature plus terminal term).
double discrete_cost(const DiscreteLQSystem& sys, const LQProblem& prob,
                     const DiscreteTrajectory& traj);

}  // namespace dlqr
}  // namespace rkocp
