#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rkocp/dlqr.hpp"
#include "rkocp/error.hpp"
#include "rkocp/problem.hpp"
#include "rkocp/tableau.hpp"

namespace rkocp::ilqr {

/// A point (U, X, x_d) on the constraint manifold together with its cost.
/// Stage stacks are step-major: U = (U_0, ..., U_{N-1}), U_k = (u_k1, ..., u_ks).
struct IterateState {
  int steps = 0;
  int stages = 0;
  int n = 0;
  int m = 0;
  double h = 0.0;
  Eigen::VectorXd U;   // s*m*N
  Eigen::VectorXd X;   // s*n*N
  Eigen::VectorXd xd;  // n*(N+1)
  double cost = 0.0;

  [[nodiscard]] auto U_k(int k) const { return U.segment(k * stages * m, stages * m); }
  [[nodiscard]] auto X_k(int k) const { return X.segment(k * stages * n, stages * n); }
  [[nodiscard]] auto x(int k) const { return xd.segment(k * n, n); }
};

/// Tangent-plane data of one step, in the affine form
/// X_k = E x_k + F U_k + D1 and x_{k+1} = G x_k + H U_k + D2.
struct LinearizedStep {
  Eigen::MatrixXd A1, A2, B, C;
  Eigen::MatrixXd E, F, G, H;
  Eigen::VectorXd D1, D2;
};

/// V_k(x) = 1/2 x'M_k x + Y_k'x + const, with feedback U_k = U1_k x_k + U2_k.
struct AffineBackwardPass {
  std::vector<Eigen::MatrixXd> M;   // N + 1
  std::vector<Eigen::VectorXd> Y;   // N + 1
  std::vector<Eigen::MatrixXd> U1;  // N
  std::vector<Eigen::VectorXd> U2;  // N
};

struct CostateTrajectory {
  std::vector<Eigen::VectorXd> p;        // N + 1 node costates
  std::vector<Eigen::VectorXd> p_stage;  // N stage-costate stacks (sn)
};

struct IterateRecord {
  int iter = 0;
  double cost = 0.0;
  double grad_inf_norm = 0.0;
  double step_norm = 0.0;
  double alpha = 0.0;
  /// Directional derivative (J_d)'(U)'dU of the search direction; 0 for the
  /// initial record.
  double slope = 0.0;
};

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 200;
};

struct SolveResult {
  IterateState state;
  std::vector<IterateRecord> log;  // log[0] describes U0; log[l] the l-th accepted step
  int iterations = 0;
  double grad_inf_norm = 0.0;
};

/// Thrown by solve() when max_iter steps do not reach the gradient tolerance.
class NotConverged : public Error {
 public:
  explicit NotConverged(SolveResult last);
  [[nodiscard]] const SolveResult& result() const noexcept { return last_; }

 private:
  SolveResult last_;
};

/// Evaluates the stage equations for controls U. Explicit tableaus are swept
/// stage by stage; implicit ones use fixed-point iteration (tolerance 1e-12,
/// at most 100 sweeps, else Error(RolloutDiverged)).
IterateState rollout(const NonlinearProblem& prob, const ButcherTableau& tab, int steps,
                     const Eigen::VectorXd& U);

/// Throws Error(StepTooLarge) when I - A1_k is singular.
std::vector<LinearizedStep> linearize(const NonlinearProblem& prob, const ButcherTableau& tab,
                                      const IterateState& state);

/// Exact gradient (J_d)'(U) by a reverse sweep through the step sensitivities.
Eigen::VectorXd gradient(const NonlinearProblem& prob, const ButcherTableau& tab,
                         const IterateState& state, const std::vector<LinearizedStep>& steps);

/// Riccati-type recursion for the tangent-plane subproblem. Throws
/// Error(BackwardFailure) when a stage Hessian is not positive definite.
AffineBackwardPass backward(const std::vector<LinearizedStep>& steps, const NonlinearProblem& prob,
                            const ButcherTableau& tab, double h);

/// Minimizer of the tangent-plane subproblem minus the current controls.
Eigen::VectorXd direction(const IterateState& state, const AffineBackwardPass& pass,
                          const std::vector<LinearizedStep>& steps, const Eigen::VectorXd& x0);

struct ArmijoResult {
  double alpha = 1.0;
  double value = 0.0;
  int evaluations = 0;
};

inline constexpr double kArmijoC1 = 1e-4;
inline constexpr double kMinStep = 0x1p-30;

/// Backtracking on alpha in {1, 1/2, 1/4, ...} until
/// phi(alpha) <= phi0 + 1e-4 * alpha * slope. Throws Error(LineSearchFailed)
/// once alpha drops below 2^-30.
ArmijoResult armijo_backtrack(const std::function<double(double)>& phi, double phi0, double slope);

struct LineSearchResult {
  double alpha = 1.0;
  IterateState state;
};

/// Armijo search along U + alpha*dU, re-rolling out each trial point.
LineSearchResult line_search(const NonlinearProblem& prob, const ButcherTableau& tab,
                             const IterateState& state, const Eigen::VectorXd& dU,
                             const Eigen::VectorXd& grad);

/// Iterates until ||(J_d)'(U)||_inf < tol. U0 defaults to zero.
SolveResult solve(const NonlinearProblem& prob, const ButcherTableau& tab, int steps,
                  const std::optional<Eigen::VectorXd>& U0 = std::nullopt,
                  const SolveOptions& opts = {});

/// Discrete costates from p_N = M x_N backwards, one (s+1)n linear solve per
/// step. Throws Error(CostateFailure) when a step system is singular.
CostateTrajectory costates(const NonlinearProblem& prob, const ButcherTableau& tab,
                           const IterateState& state);

/// Solves D_u f(x_k, u)'p_k + R u + S'x_k = 0 for every node k = 0..N.
/// Closed form for control-affine dynamics, Newton otherwise
/// (Error(NodeControlFailure) after 50 iterations).
std::vector<Eigen::VectorXd> node_controls(const NonlinearProblem& prob, const IterateState& state,
                                           const CostateTrajectory& costates);

/// Packs a solved state into the common trajectory layout.
DiscreteTrajectory to_trajectory(const IterateState& state, const CostateTrajectory& costates,
                                 std::vector<Eigen::VectorXd> node_u);

}  // namespace rkocp::ilqr
