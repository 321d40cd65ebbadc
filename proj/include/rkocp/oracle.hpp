#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rkocp/problem.hpp"
#include "rkocp/tableau.hpp"

namespace rkocp::oracle {

/// Direct solution of the discretized LQ problem over all (U, X, x_d).
struct QPSolution {
  Eigen::VectorXd U;   // s*m*N, step-major
  Eigen::VectorXd X;   // s*n*N
  Eigen::VectorXd xd;  // n*(N+1)
  /// Multiplier of x_k + h sum_i b_i f_ki - x_{k+1} = 0, k = 0..N-1 (this is p_{k+1}).
  std::vector<Eigen::VectorXd> step_multipliers;
  /// Multipliers of the stage equations, stacked per step (sn).
  std::vector<Eigen::VectorXd> stage_multipliers;
  /// Multiplier of x_0 - x0 = 0 (this is -p_0).
  Eigen::VectorXd initial_multiplier;
  double kkt_residual = 0.0;
};

/// One dense KKT factorization. Throws Error(OracleFailure) when the KKT
/// matrix is singular or the residual exceeds 1e-10 (1 + data norm).
QPSolution qp_solve(const LQProblem& prob, const ButcherTableau& tab, int steps);

/// Central differences of J_d(U) through ilqr::rollout; eps defaults to
/// 1e-6 (1 + ||U||_inf).
Eigen::VectorXd grad_fd(const NonlinearProblem& prob, const ButcherTableau& tab, int steps,
                        const Eigen::VectorXd& U, std::optional<double> eps = std::nullopt);

/// (J_d)'(U) from the linearized step sensitivities.
Eigen::VectorXd grad_exact(const NonlinearProblem& prob, const ButcherTableau& tab, int steps,
                           const Eigen::VectorXd& U);

struct QuasiNewtonData {
  Eigen::MatrixXd W;
  Eigen::VectorXd Y;
  double C = 0.0;
  Eigen::VectorXd direction;  // -W^{-1} Y
  Eigen::MatrixXd stage_sensitivity;     // F'(U), (s*n*N) x (s*m*N)
  Eigen::MatrixXd terminal_sensitivity;  // (F_d^N)'(U), n x (s*m*N)
};

/// Dense metric and gradient of the ILQR tangent-plane model at U, with the
/// sensitivities accumulated forward through the step chain.
QuasiNewtonData quasi_newton(const NonlinearProblem& prob, const ButcherTableau& tab, int steps,
                             const Eigen::VectorXd& U);

struct GradientComparison {
  double max_relative_error = 0.0;  // max_i |exact_i - fd_i| / ||fd||_inf
  Eigen::Index worst_index = 0;
};

GradientComparison compare_gradients(const Eigen::VectorXd& exact, const Eigen::VectorXd& fd);

/// Deterministic controls in [-1, 1]^dim from a 64-bit seed.
Eigen::VectorXd random_controls(Eigen::Index dim, std::uint64_t seed);

/// min 1/2 x^2 + 1/2 u^2 subject to x = u^2 + 1.
struct ScalarCurve {
  static double g(double u) { return u * u + 1.0; }
  static double dg(double u) { return 2.0 * u; }
  static double d2g(double) { return 2.0; }
  /// j(u) - 1/2, evaluated without cancellation near u = 0.
  static double shifted_cost(double u) { return 1.5 * u * u + 0.5 * u * u * u * u; }
  static double gradient(double u) { return u + dg(u) * g(u); }
  static double metric(double u) { return 1.0 + dg(u) * dg(u); }
  static double hessian(double u) { return metric(u) + d2g(u) * g(u); }
};

struct ScalarCurveIterate {
  int iter = 0;
  double u = 0.0;
  double j = 0.0;      // shifted cost j(u) - 1/2
  double alpha = 0.0;  // step length that produced this iterate (0 for the start)
};

struct ScalarCurveOptions {
  bool full_step = false;  // skip the line search and take alpha = 1
  double tol = 1e-12;      // stop when |j'(u)| < tol
  int max_iter = 200;
};

/// ILQR iteration u <- u - alpha W(u)^{-1} j'(u) on the scalar curve.
std::vector<ScalarCurveIterate> scalar_curve_demo(double u0, const ScalarCurveOptions& opts = {});

}  // namespace rkocp::oracle
