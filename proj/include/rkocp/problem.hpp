#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace rkocp {

/// min  int_0^tf (1/2 x'Qx + x'Su + 1/2 u'Ru) dt + 1/2 x(tf)'M x(tf)
/// s.t. xdot = Ax + Bu, x(0) = x0.
class LQProblem {
 public:
  /// Validates shapes, symmetry, Q and M positive semidefinite, R positive
  /// definite and tf > 0; throws Error(InvalidProblem). An empty S means zero.
  LQProblem(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd Q, Eigen::MatrixXd S,
            Eigen::MatrixXd R, Eigen::MatrixXd M, Eigen::VectorXd x0, double tf);

  [[nodiscard]] int n() const noexcept { return static_cast<int>(A_.rows()); }
  [[nodiscard]] int m() const noexcept { return static_cast<int>(B_.cols()); }
  [[nodiscard]] const Eigen::MatrixXd& A() const noexcept { return A_; }
  [[nodiscard]] const Eigen::MatrixXd& B() const noexcept { return B_; }
  [[nodiscard]] const Eigen::MatrixXd& Q() const noexcept { return Q_; }
  [[nodiscard]] const Eigen::MatrixXd& S() const noexcept { return S_; }
  [[nodiscard]] const Eigen::MatrixXd& R() const noexcept { return R_; }
  [[nodiscard]] const Eigen::MatrixXd& M() const noexcept { return M_; }
  [[nodiscard]] const Eigen::VectorXd& x0() const noexcept { return x0_; }
  [[nodiscard]] double tf() const noexcept { return tf_; }

 private:
  Eigen::MatrixXd A_, B_, Q_, S_, R_, M_;
  Eigen::VectorXd x0_;
  double tf_;
};

/// Right-hand side f(x, u) with its Jacobians. Implementations must be pure:
/// the solvers call them concurrently and in arbitrary order.
class Dynamics {
 public:
  virtual ~Dynamics() = default;

  [[nodiscard]] virtual int state_dim() const = 0;
  [[nodiscard]] virtual int control_dim() const = 0;
  [[nodiscard]] virtual Eigen::VectorXd f(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& u) const = 0;
  [[nodiscard]] virtual Eigen::MatrixXd jx(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& u) const = 0;
  [[nodiscard]] virtual Eigen::MatrixXd ju(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& u) const = 0;
  /// Input matrix B(x) when f(x, u) = f0(x) + B(x) u; nullopt otherwise.
  [[nodiscard]] virtual std::optional<Eigen::MatrixXd> input_matrix(
      const Eigen::VectorXd& /*x*/) const {
    return std::nullopt;
  }
};

/// xdot = Ax + Bu.
class LinearDynamics final : public Dynamics {
 public:
  LinearDynamics(Eigen::MatrixXd A, Eigen::MatrixXd B);

  [[nodiscard]] int state_dim() const override { return static_cast<int>(A_.rows()); }
  [[nodiscard]] int control_dim() const override { return static_cast<int>(B_.cols()); }
  [[nodiscard]] Eigen::VectorXd f(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u) const override;
  [[nodiscard]] Eigen::MatrixXd jx(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u) const override;
  [[nodiscard]] Eigen::MatrixXd ju(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u) const override;
  [[nodiscard]] std::optional<Eigen::MatrixXd> input_matrix(
      const Eigen::VectorXd& x) const override;

 private:
  Eigen::MatrixXd A_, B_;
};

/// Inverted pendulum: thetadot = omega, omegadot = sin(theta) + u.
class PendulumDynamics final : public Dynamics {
 public:
  [[nodiscard]] int state_dim() const override { return 2; }
  [[nodiscard]] int control_dim() const override { return 1; }
  [[nodiscard]] Eigen::VectorXd f(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u) const override;
  [[nodiscard]] Eigen::MatrixXd jx(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u) const override;
  [[nodiscard]] Eigen::MatrixXd ju(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u) const override;
  [[nodiscard]] std::optional<Eigen::MatrixXd> input_matrix(
      const Eigen::VectorXd& x) const override;
};

/// Quadratic-cost problem with general dynamics. The cross term S is zero for
/// every genuinely nonlinear problem; it is carried so that an LQProblem can be
/// wrapped without changing its cost.
class NonlinearProblem {
 public:
  NonlinearProblem(std::shared_ptr<const Dynamics> dynamics, Eigen::MatrixXd Q,
                   Eigen::MatrixXd R, Eigen::MatrixXd M, Eigen::VectorXd x0, double tf,
                   Eigen::MatrixXd S = {});

  [[nodiscard]] int n() const noexcept { return dynamics_->state_dim(); }
  [[nodiscard]] int m() const noexcept { return dynamics_->control_dim(); }
  [[nodiscard]] const Dynamics& dynamics() const noexcept { return *dynamics_; }
  [[nodiscard]] const std::shared_ptr<const Dynamics>& dynamics_ptr() const noexcept {
    return dynamics_;
  }
  [[nodiscard]] const Eigen::MatrixXd& Q() const noexcept { return Q_; }
  [[nodiscard]] const Eigen::MatrixXd& S() const noexcept { return S_; }
  [[nodiscard]] const Eigen::MatrixXd& R() const noexcept { return R_; }
  [[nodiscard]] const Eigen::MatrixXd& M() const noexcept { return M_; }
  [[nodiscard]] const Eigen::VectorXd& x0() const noexcept { return x0_; }
  [[nodiscard]] double tf() const noexcept { return tf_; }

 private:
  std::shared_ptr<const Dynamics> dynamics_;
  Eigen::MatrixXd Q_, S_, R_, M_;
  Eigen::VectorXd x0_;
  double tf_;
};

/// Same problem, dynamics behind the Dynamics interface.
NonlinearProblem as_nonlinear(const LQProblem& prob);

/// Closed-form optimal solution of a problem, where one is known.
struct AnalyticReference {
  std::function<Eigen::VectorXd(double)> u_star;
  std::function<Eigen::VectorXd(double)> x_star;  // may be empty
  std::function<Eigen::VectorXd(double)> p_star;  // may be empty
  std::string label;
};

struct Example31 {
  LQProblem problem;
  AnalyticReference reference;
};

/// Scalar problem min int_0^1 (x^2/2 + xu/2 + u^2/2) dt, xdot = u, x(0) = 1.
Example31 example31();

/// Controlled linear oscillator on [0, 40] with terminal weight 5|x(tf)|^2.
LQProblem spring_oscillator();

/// Inverted pendulum on [0, 4], running cost 0.025u^2, terminal 2.5|x(tf)|^2.
NonlinearProblem pendulum();

}  // namespace rkocp
