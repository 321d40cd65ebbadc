#include "rkocp/problem.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "rkocp/error.hpp"

namespace rkocp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidProblem, what);
}

void require_shape(const Eigen::MatrixXd& mat, Eigen::Index rows, Eigen::Index cols,
                   const char* name) {
  if (mat.rows() != rows || mat.cols() != cols) {
    std::ostringstream msg;
    msg << name << " is " << mat.rows() << "x" << mat.cols() << ", expected " << rows << "x"
        << cols;
    throw Error(ErrorKind::InvalidProblem, msg.str());
  }
}

bool is_symmetric(const Eigen::MatrixXd& mat) {
  const double scale = 1.0 + mat.cwiseAbs().maxCoeff();
  return (mat - mat.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

bool is_psd(const Eigen::MatrixXd& mat) {
  if (mat.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mat);
  const double scale = 1.0 + mat.cwiseAbs().maxCoeff();
  return eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() >= -1e-12 * scale;
}

bool is_pd(const Eigen::MatrixXd& mat) {
  Eigen::LLT<Eigen::MatrixXd> llt(mat);
  return llt.info() == Eigen::Success;
}

void validate_costs(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, const Eigen::MatrixXd& M,
                    const Eigen::VectorXd& x0, double tf, int n, int m) {
  require_shape(Q, n, n, "Q");
  require_shape(R, m, m, "R");
  require_shape(M, n, n, "M");
  require(x0.size() == n, "x0 has the wrong length");
  require(std::isfinite(tf) && tf > 0.0, "tf must be positive");
  require(is_symmetric(Q) && is_psd(Q), "Q must be symmetric positive semidefinite");
  require(is_symmetric(M) && is_psd(M), "M must be symmetric positive semidefinite");
  require(is_symmetric(R) && is_pd(R), "R must be symmetric positive definite");
}

}  // namespace

LQProblem::LQProblem(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd Q, Eigen::MatrixXd S,
                     Eigen::MatrixXd R, Eigen::MatrixXd M, Eigen::VectorXd x0, double tf)
    : A_(std::move(A)),
      B_(std::move(B)),
      Q_(std::move(Q)),
      S_(std::move(S)),
      R_(std::move(R)),
      M_(std::move(M)),
      x0_(std::move(x0)),
      tf_(tf) {
  require(A_.rows() > 0 && A_.rows() == A_.cols(), "A must be square and non-empty");
  const auto n = A_.rows();
  require(B_.rows() == n && B_.cols() > 0, "B must have n rows and at least one column");
  const auto m = B_.cols();
  if (S_.size() == 0) S_ = Eigen::MatrixXd::Zero(n, m);
  require_shape(S_, n, m, "S");
  validate_costs(Q_, R_, M_, x0_, tf_, static_cast<int>(n), static_cast<int>(m));
}

LinearDynamics::LinearDynamics(Eigen::MatrixXd A, Eigen::MatrixXd B)
    : A_(std::move(A)), B_(std::move(B)) {}

Eigen::VectorXd LinearDynamics::f(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  return A_ * x + B_ * u;
}

Eigen::MatrixXd LinearDynamics::jx(const Eigen::VectorXd&, const Eigen::VectorXd&) const {
  return A_;
}

Eigen::MatrixXd LinearDynamics::ju(const Eigen::VectorXd&, const Eigen::VectorXd&) const {
  return B_;
}

std::optional<Eigen::MatrixXd> LinearDynamics::input_matrix(const Eigen::VectorXd&) const {
  return B_;
}

Eigen::VectorXd PendulumDynamics::f(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  return Eigen::Vector2d(x(1), std::sin(x(0)) + u(0));
}

Eigen::MatrixXd PendulumDynamics::jx(const Eigen::VectorXd& x, const Eigen::VectorXd&) const {
  Eigen::Matrix2d j;
  j << 0.0, 1.0,
       std::cos(x(0)), 0.0;
  return j;
}

Eigen::MatrixXd PendulumDynamics::ju(const Eigen::VectorXd&, const Eigen::VectorXd&) const {
  return Eigen::Vector2d(0.0, 1.0);
}

std::optional<Eigen::MatrixXd> PendulumDynamics::input_matrix(const Eigen::VectorXd&) const {
  return Eigen::MatrixXd(Eigen::Vector2d(0.0, 1.0));
}

NonlinearProblem::NonlinearProblem(std::shared_ptr<const Dynamics> dynamics, Eigen::MatrixXd Q,
                                   Eigen::MatrixXd R, Eigen::MatrixXd M, Eigen::VectorXd x0,
                                   double tf, Eigen::MatrixXd S)
    : dynamics_(std::move(dynamics)),
      Q_(std::move(Q)),
      S_(std::move(S)),
      R_(std::move(R)),
      M_(std::move(M)),
      x0_(std::move(x0)),
      tf_(tf) {
  require(dynamics_ != nullptr, "dynamics must not be null");
  const int n = dynamics_->state_dim();
  const int m = dynamics_->control_dim();
  require(n > 0 && m > 0, "dynamics dimensions must be positive");
  if (S_.size() == 0) S_ = Eigen::MatrixXd::Zero(n, m);
  require_shape(S_, n, m, "S");
  validate_costs(Q_, R_, M_, x0_, tf_, n, m);
}

NonlinearProblem as_nonlinear(const LQProblem& prob) {
  return NonlinearProblem(std::make_shared<LinearDynamics>(prob.A(), prob.B()), prob.Q(),
                          prob.R(), prob.M(), prob.x0(), prob.tf(), prob.S());
}

Example31 example31() {
  Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  LQProblem problem(Eigen::MatrixXd::Zero(1, 1), one, one, 0.5 * one, one,
                    Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1), 1.0);

  // Canonical system: xdot = u, u = -(p + x/2), pdot = -(x + u/2), p(1) = 0.
  const double e2 = std::exp(2.0);
  const double denom = 0.5 + 1.5 * e2;
  auto u_star = [denom](double t) {
    return Eigen::VectorXd::Constant(1, (0.5 * std::exp(t) - 1.5 * std::exp(2.0 - t)) / denom);
  };
  auto x_star = [denom](double t) {
    return Eigen::VectorXd::Constant(1, (0.5 * std::exp(t) + 1.5 * std::exp(2.0 - t)) / denom);
  };
  auto p_star = [u_star, x_star](double t) -> Eigen::VectorXd {
    return -u_star(t) - 0.5 * x_star(t);
  };
  return {std::move(problem), AnalyticReference{u_star, x_star, p_star, "example31 closed form"}};
}

LQProblem spring_oscillator() {
  Eigen::MatrixXd A(2, 2);
  A << 0.0, 1.0,
       -1.0, 0.0;
  Eigen::MatrixXd B(2, 1);
  B << 1.0, 0.0;
  // 1.5u^2 = u'(3)u/2 and 5|x(tf)|^2 = x'(10 I)x/2. The terminal time is the
  // horizon end tf = 40.
  return LQProblem(A, B, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 1),
                   Eigen::MatrixXd::Constant(1, 1, 3.0), 10.0 * Eigen::MatrixXd::Identity(2, 2),
                   Eigen::Vector2d(1.0, 1.0), 40.0);
}

NonlinearProblem pendulum() {
  return NonlinearProblem(std::make_shared<PendulumDynamics>(), Eigen::MatrixXd::Zero(2, 2),
                          Eigen::MatrixXd::Constant(1, 1, 0.05),
                          5.0 * Eigen::MatrixXd::Identity(2, 2),
                          Eigen::Vector2d(std::numbers::pi / 3.0, 0.0), 4.0);
}

}  // namespace rkocp
