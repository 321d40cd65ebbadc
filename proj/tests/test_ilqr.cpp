#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>

#include "helpers.hpp"
#include "rkocp/dlqr.hpp"
#include "rkocp/ilqr.hpp"
#include "rkocp/oracle.hpp"

using rkocp::ErrorKind;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace ilqr = rkocp::ilqr;

namespace {

/// x' = u^2 with one euler step of length 1 from x0 = 1: the discrete cost is
/// 1/2 u^2 + 1/2 (u^2 + 1)^2, the scalar curve problem.
class SquareInput final : public rkocp::Dynamics {
 public:
  int state_dim() const override { return 1; }
  int control_dim() const override { return 1; }
  VectorXd f(const VectorXd&, const VectorXd& u) const override { return u.cwiseProduct(u); }
  MatrixXd jx(const VectorXd&, const VectorXd&) const override { return MatrixXd::Zero(1, 1); }
  MatrixXd ju(const VectorXd&, const VectorXd& u) const override { return 2.0 * u; }
};

/// x' = -x + sin(u), not control affine.
class SineInput final : public rkocp::Dynamics {
 public:
  int state_dim() const override { return 1; }
  int control_dim() const override { return 1; }
  VectorXd f(const VectorXd& x, const VectorXd& u) const override {
    return (VectorXd(1) << -x(0) + std::sin(u(0))).finished();
  }
  MatrixXd jx(const VectorXd&, const VectorXd&) const override { return MatrixXd::Constant(1, 1, -1.0); }
  MatrixXd ju(const VectorXd&, const VectorXd& u) const override {
    return MatrixXd::Constant(1, 1, std::cos(u(0)));
  }
};

rkocp::NonlinearProblem scalar_curve_problem() {
  const MatrixXd one = MatrixXd::Identity(1, 1);
  return {std::make_shared<SquareInput>(), MatrixXd::Zero(1, 1), one, one, VectorXd::Ones(1), 1.0};
}

rkocp::NonlinearProblem sine_problem() {
  const MatrixXd one = MatrixXd::Identity(1, 1);
  return {std::make_shared<SineInput>(), one, one, 2.0 * one, VectorXd::Constant(1, 1.5), 2.0};
}

rkocp::NonlinearProblem pendulum_at(const VectorXd& x0, const MatrixXd& M) {
  const auto p = rkocp::pendulum();
  return {p.dynamics_ptr(), p.Q(), p.R(), M, x0, p.tf()};
}

/// Explicit RK step with the tableau written out by hand.
VectorXd rk_step(const rkocp::Dynamics& dyn, const VectorXd& x, double h, const MatrixXd& a,
                 const VectorXd& b) {
  const auto s = b.size();
  std::vector<VectorXd> k(static_cast<std::size_t>(s));
  const VectorXd u = VectorXd::Zero(dyn.control_dim());
  for (Eigen::Index i = 0; i < s; ++i) {
    VectorXd xi = x;
    for (Eigen::Index j = 0; j < i; ++j) xi += h * a(i, j) * k[static_cast<std::size_t>(j)];
    k[static_cast<std::size_t>(i)] = dyn.f(xi, u);
  }
  VectorXd out = x;
  for (Eigen::Index i = 0; i < s; ++i) out += h * b(i) * k[static_cast<std::size_t>(i)];
  return out;
}

double costate_residual(const rkocp::NonlinearProblem& prob, const rkocp::ButcherTableau& tab,
                        const ilqr::IterateState& st, const ilqr::CostateTrajectory& co) {
  const auto adj = rkocp::adjoint(tab);
  const int s = tab.stages();
  const int n = st.n;
  const int m = st.m;
  const auto& dyn = prob.dynamics();
  double worst = (co.p.back() - prob.M() * st.x(st.steps)).cwiseAbs().maxCoeff();
  for (int k = 0; k < st.steps; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    std::vector<VectorXd> rate(static_cast<std::size_t>(s));
    for (int j = 0; j < s; ++j) {
      const VectorXd xj = st.X_k(k).segment(j * n, n);
      const VectorXd uj = st.U_k(k).segment(j * m, m);
      const VectorXd pj = co.p_stage[kk].segment(j * n, n);
      rate[static_cast<std::size_t>(j)] = dyn.jx(xj, uj).transpose() * pj + prob.Q() * xj + prob.S() * uj;
    }
    VectorXd next = co.p[kk];
    for (int i = 0; i < s; ++i) next -= st.h * tab.b()(i) * rate[static_cast<std::size_t>(i)];
    worst = std::max(worst, (next - co.p[kk + 1]).cwiseAbs().maxCoeff());
    for (int i = 0; i < s; ++i) {
      VectorXd pi = co.p[kk];
      for (int j = 0; j < s; ++j) pi -= st.h * adj.abar(i, j) * rate[static_cast<std::size_t>(j)];
      worst = std::max(worst, (pi - co.p_stage[kk].segment(i * n, n)).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("ilqr") {

TEST_CASE("rollout of linear dynamics satisfies the stage relations") {
  const auto lq = rkocp::spring_oscillator();
  const auto prob = rkocp::as_nonlinear(lq);
  for (const char* name : {"euler", "methodA", "methodB", "methodC", "trapezoidal"}) {
    const auto tab = rkocp::builtin(name);
    const int N = 80;
    const VectorXd U = rkocp::oracle::random_controls(tab.stages() * N, 7);
    const auto st = ilqr::rollout(prob, tab, N, U);
    const auto sys = rkocp::dlqr::assemble(lq, tab, N);
    CAPTURE(name);
    for (int k = 0; k < N; ++k) {
      CHECK((st.X_k(k) - sys.E * st.x(k) - sys.F * st.U_k(k)).norm() < 1e-11);
      CHECK((st.x(k + 1) - sys.G * st.x(k) - sys.H * st.U_k(k)).norm() < 1e-11);
    }
  }
}

TEST_CASE("uncontrolled pendulum rollout matches a hand-written integrator") {
  const auto prob = rkocp::pendulum();
  const auto tab = rkocp::builtin("methodB");
  MatrixXd a = MatrixXd::Zero(3, 3);
  a(1, 0) = 0.5;
  a(2, 0) = -1.0;
  a(2, 1) = 2.0;
  const VectorXd b = (VectorXd(3) << 1.0 / 6, 2.0 / 3, 1.0 / 6).finished();
  const auto st = ilqr::rollout(prob, tab, 4, VectorXd::Zero(12));
  VectorXd x = prob.x0();
  for (int k = 0; k < 4; ++k) {
    x = rk_step(prob.dynamics(), x, 1.0, a, b);
    CHECK((st.x(k + 1) - x).norm() < 1e-13);
  }
}

TEST_CASE("constant state when the dynamics vanish") {
  const MatrixXd Q = (MatrixXd(2, 2) << 2, 0.5, 0.5, 1).finished();
  const MatrixXd M = MatrixXd::Identity(2, 2) * 3;
  const VectorXd x0 = (VectorXd(2) << 1, -2).finished();
  const rkocp::LQProblem lq(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1), Q, {}, MatrixXd::Identity(1, 1), M, x0, 2.5);
  const auto st = ilqr::rollout(rkocp::as_nonlinear(lq), rkocp::builtin("methodC"), 5, VectorXd::Zero(20));
  for (int k = 0; k <= 5; ++k) CHECK(st.x(k) == x0);
  const double expected = 0.5 * 2.5 * x0.dot(Q * x0) + 0.5 * x0.dot(M * x0);
  CHECK(st.cost == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("implicit rollout reports divergence for large steps") {
  CHECK_THROWS_KIND(ilqr::rollout(rkocp::pendulum(), rkocp::builtin("trapezoidal"), 1, VectorXd::Zero(2)),
                    ErrorKind::RolloutDiverged);
  CHECK_NOTHROW(ilqr::rollout(rkocp::pendulum(), rkocp::builtin("trapezoidal"), 40, VectorXd::Zero(80)));
}

TEST_CASE("linearization") {
  SUBCASE("linear dynamics have no offsets") {
    const auto prob = rkocp::as_nonlinear(testing::short_spring(4.0));
    for (const char* name : {"methodB", "trapezoidal"}) {
      const auto tab = rkocp::builtin(name);
      const auto st = ilqr::rollout(prob, tab, 10, rkocp::oracle::random_controls(tab.stages() * 10, 3));
      for (const auto& step : ilqr::linearize(prob, tab, st)) {
        CHECK(step.D1.cwiseAbs().maxCoeff() < 1e-12);
        CHECK(step.D2.cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
  SUBCASE("euler at the upright pendulum") {
    const auto prob = pendulum_at(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
    const auto st = ilqr::rollout(prob, rkocp::builtin("euler"), 8, VectorXd::Zero(8));
    const MatrixXd Jx = (MatrixXd(2, 2) << 0, 1, 1, 0).finished();
    for (const auto& step : ilqr::linearize(prob, rkocp::builtin("euler"), st)) {
      CHECK(step.A1.isZero());
      CHECK(step.E == MatrixXd::Identity(2, 2));
      CHECK(step.F.isZero());
      CHECK(testing::max_abs_diff(step.G, MatrixXd::Identity(2, 2) + 0.5 * Jx) < 1e-15);
      CHECK(testing::max_abs_diff(step.H, (MatrixXd(2, 1) << 0, 0.5).finished()) < 1e-15);
    }
  }
  SUBCASE("method A blocks carry the state jacobian") {
    const auto prob = pendulum_at(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
    const auto tab = rkocp::builtin("methodA");
    const auto st = ilqr::rollout(prob, tab, 4, VectorXd::Zero(8));
    const MatrixXd Jx = (MatrixXd(2, 2) << 0, 1, 1, 0).finished();
    const auto lin = ilqr::linearize(prob, tab, st);
    MatrixXd A1 = MatrixXd::Zero(4, 4);
    A1.block(2, 0, 2, 2) = 1.0 * Jx;  // h a21 Jx with h = 1, a21 = 1
    CHECK(testing::max_abs_diff(lin[0].A1, A1) < 1e-15);
  }
}

TEST_CASE("backward pass on a linear problem reproduces the riccati gains") {
  const auto lq = rkocp::spring_oscillator();
  const auto prob = rkocp::as_nonlinear(lq);
  const auto tab = rkocp::builtin("methodB");
  const int N = 40;
  const auto sys = rkocp::dlqr::assemble(lq, tab, N);
  const auto pass = rkocp::dlqr::riccati_backward(sys, lq);
  const auto traj = rkocp::dlqr::rollout(sys, pass, lq, lq.x0());
  VectorXd U(3 * N);
  for (int k = 0; k < N; ++k) U.segment(3 * k, 3) = traj.U[static_cast<std::size_t>(k)];
  const auto st = ilqr::rollout(prob, tab, N, U);
  const auto lin = ilqr::linearize(prob, tab, st);
  const auto bp = ilqr::backward(lin, prob, tab, st.h);
  for (int k = 0; k < N; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    CHECK(testing::max_abs_diff(bp.U1[kk], pass.L[kk]) < 1e-9);
    CHECK(bp.U2[kk].cwiseAbs().maxCoeff() < 1e-9);
    CHECK(testing::max_abs_diff(bp.M[kk], pass.M[kk]) < 1e-9);
  }
  CHECK(bp.Y.back().isZero());
  CHECK(ilqr::direction(st, bp, lin, prob.x0()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("backward pass with zero cost") {
  const auto p = rkocp::pendulum();
  const rkocp::NonlinearProblem prob(p.dynamics_ptr(), MatrixXd::Zero(2, 2), p.R(), MatrixXd::Zero(2, 2), p.x0(), 2.0);
  const auto tab = rkocp::builtin("methodA");
  const auto st = ilqr::rollout(prob, tab, 6, VectorXd::Zero(12));
  const auto bp = ilqr::backward(ilqr::linearize(prob, tab, st), prob, tab, st.h);
  for (const auto& U1 : bp.U1) CHECK(U1.cwiseAbs().maxCoeff() < 1e-15);
  for (const auto& U2 : bp.U2) CHECK(U2.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("backward pass with a singular stage hessian") {
  MatrixXd a = MatrixXd::Zero(2, 2);
  a(1, 0) = 1.0;
  const rkocp::ButcherTableau lazy("lazy", a, (VectorXd(2) << 1.0, 0.0).finished());
  const auto prob = rkocp::pendulum();
  const auto st = ilqr::rollout(prob, lazy, 4, VectorXd::Zero(8));
  CHECK_THROWS_KIND(ilqr::backward(ilqr::linearize(prob, lazy, st), prob, lazy, st.h), ErrorKind::BackwardFailure);
}

TEST_CASE("single step subproblem matches a direct solve") {
  const auto prob = rkocp::pendulum();
  for (const char* name : {"euler", "methodA", "methodB"}) {
    const auto tab = rkocp::builtin(name);
    const VectorXd U0 = rkocp::oracle::random_controls(tab.stages(), 11);
    const auto st = ilqr::rollout(prob, tab, 1, U0);
    const auto lin = ilqr::linearize(prob, tab, st);
    const auto& L = lin[0];
    // Q = 0 and S = 0: minimize 1/2 U'Rh U + 1/2 |G x0 + H U + D2|_M^2.
    const MatrixXd Rh = MatrixXd(tab.b().asDiagonal()) * (prob.tf() * prob.R()(0, 0));
    const MatrixXd hess = Rh + L.H.transpose() * prob.M() * L.H;
    const VectorXd U = hess.ldlt().solve(-L.H.transpose() * prob.M() * (L.G * prob.x0() + L.D2));
    const auto bp = ilqr::backward(lin, prob, tab, st.h);
    CAPTURE(name);
    CHECK(testing::rel_diff(U0 + ilqr::direction(st, bp, lin, prob.x0()), U) < 1e-12);
  }
}

TEST_CASE("direction on the scalar curve") {
  const auto prob = scalar_curve_problem();
  const auto tab = rkocp::builtin("euler");
  for (double u0 : {0.1, -0.4, 1.3}) {
    const auto st = ilqr::rollout(prob, tab, 1, VectorXd::Constant(1, u0));
    CHECK(st.cost == doctest::Approx(0.5 * u0 * u0 + 0.5 * std::pow(u0 * u0 + 1, 2)).epsilon(1e-15));
    const auto lin = ilqr::linearize(prob, tab, st);
    const auto dU = ilqr::direction(st, ilqr::backward(lin, prob, tab, st.h), lin, prob.x0());
    const double g = u0 * u0 + 1, dg = 2 * u0;
    CHECK(dU(0) == doctest::Approx(-(u0 + dg * g) / (1 + dg * dg)).epsilon(1e-13));
  }
}

TEST_CASE("line search") {
  SUBCASE("full step on a linear problem") {
    const auto prob = rkocp::as_nonlinear(rkocp::spring_oscillator());
    const auto tab = rkocp::builtin("methodA");
    const auto st = ilqr::rollout(prob, tab, 40, VectorXd::Zero(80));
    const auto lin = ilqr::linearize(prob, tab, st);
    const VectorXd g = ilqr::gradient(prob, tab, st, lin);
    const VectorXd dU = ilqr::direction(st, ilqr::backward(lin, prob, tab, st.h), lin, prob.x0());
    CHECK(ilqr::line_search(prob, tab, st, dU, g).alpha == 1.0);
  }
  SUBCASE("zero direction") {
    const auto prob = rkocp::pendulum();
    const auto st = ilqr::rollout(prob, rkocp::builtin("euler"), 5, VectorXd::Ones(5));
    const auto ls = ilqr::line_search(prob, rkocp::builtin("euler"), st, VectorXd::Zero(5), VectorXd::Ones(5));
    CHECK(ls.alpha == 1.0);
    CHECK(ls.state.U == st.U);
    CHECK(ls.state.cost == st.cost);
  }
  SUBCASE("scalar curve rejects the full step") {
    const auto prob = scalar_curve_problem();
    const auto tab = rkocp::builtin("euler");
    const auto st = ilqr::rollout(prob, tab, 1, VectorXd::Constant(1, 0.1));
    const auto lin = ilqr::linearize(prob, tab, st);
    const VectorXd g = ilqr::gradient(prob, tab, st, lin);
    const VectorXd dU = ilqr::direction(st, ilqr::backward(lin, prob, tab, st.h), lin, prob.x0());
    CHECK(0.1 + dU(0) < -0.1);
    const auto ls = ilqr::line_search(prob, tab, st, dU, g);
    CHECK(ls.alpha < 1.0);
    CHECK(ls.state.cost < st.cost);
  }
  SUBCASE("ascent direction fails") {
    const auto prob = rkocp::pendulum();
    const auto tab = rkocp::builtin("euler");
    const auto st = ilqr::rollout(prob, tab, 5, VectorXd::Zero(5));
    const VectorXd g = ilqr::gradient(prob, tab, st, ilqr::linearize(prob, tab, st));
    CHECK_THROWS_KIND(ilqr::line_search(prob, tab, st, g, g), ErrorKind::LineSearchFailed);
  }
}

TEST_CASE("solve on a linear problem takes one full step") {
  const auto lq = rkocp::spring_oscillator();
  const auto prob = rkocp::as_nonlinear(lq);
  for (const char* name : {"euler", "methodB", "trapezoidal"}) {
    const auto tab = rkocp::builtin(name);
    const auto res = ilqr::solve(prob, tab, 200);
    const auto ref = rkocp::dlqr::solve(lq, tab, 200);
    CAPTURE(name);
    CHECK(res.iterations == 1);
    CHECK(res.log[1].alpha == 1.0);
    for (int k = 0; k < 200; ++k)
      CHECK((res.state.U_k(k) - ref.U[static_cast<std::size_t>(k)]).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("solve on the pendulum") {
  const auto prob = rkocp::pendulum();
  const auto res = ilqr::solve(prob, rkocp::builtin("methodB"), 200);
  CHECK(res.grad_inf_norm < 1e-8);
  REQUIRE(res.log.size() == static_cast<std::size_t>(res.iterations) + 1);
  for (std::size_t i = 1; i < res.log.size(); ++i) {
    CHECK(res.log[i].cost <= res.log[i - 1].cost);
    CHECK(res.log[i].slope < 0.0);
    CHECK(res.log[i].alpha > 0.0);
  }
  // stationarity seen by finite differences
  const auto fd = rkocp::oracle::grad_fd(prob, rkocp::builtin("methodB"), 200, res.state.U);
  CHECK(fd.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("solve termination") {
  const auto prob = rkocp::pendulum();
  const auto res = ilqr::solve(prob, rkocp::builtin("euler"), 20, std::nullopt,
                               {std::numeric_limits<double>::infinity(), 200});
  CHECK(res.iterations == 0);
  CHECK(res.state.U.isZero());

  try {
    ilqr::solve(prob, rkocp::builtin("euler"), 20, std::nullopt, {1e-8, 1});
    FAIL("expected NotConverged");
  } catch (const ilqr::NotConverged& e) {
    CHECK(e.kind() == ErrorKind::NotConverged);
    CHECK(e.result().iterations == 1);
    CHECK(e.result().log.size() == 2);
  }
}

TEST_CASE("costates of a linear problem are the value gradients") {
  const auto ex = rkocp::example31();
  for (const auto& lq : {ex.problem, rkocp::spring_oscillator()}) {
    for (const char* name : {"euler", "methodA", "methodB", "methodC", "trapezoidal"}) {
      const auto tab = rkocp::builtin(name);
      // Coarse explicit steps on the spring amplify rounding beyond the
      // gradient tolerance, so it gets a finer grid.
      const int N = lq.n() == 2 ? 200 : 20;
      const auto prob = rkocp::as_nonlinear(lq);
      const auto res = ilqr::solve(prob, tab, N);
      const auto co = ilqr::costates(prob, tab, res.state);
      const auto sys = rkocp::dlqr::assemble(lq, tab, N);
      const auto pass = rkocp::dlqr::riccati_backward(sys, lq);
      const auto ref = rkocp::dlqr::rollout(sys, pass, lq, lq.x0());
      const auto nodes = ilqr::node_controls(prob, res.state, co);
      CAPTURE(name);
      for (int k = 0; k <= N; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        CHECK((co.p[kk] - pass.M[kk] * res.state.x(k)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((nodes[kk] - ref.u[kk]).cwiseAbs().maxCoeff() < 1e-9);
      }
      CHECK(costate_residual(prob, tab, res.state, co) < 1e-10 * (1 + co.p[0].norm()));
    }
  }
}

TEST_CASE("costates with zero cost vanish") {
  const auto p = rkocp::pendulum();
  const rkocp::NonlinearProblem prob(p.dynamics_ptr(), MatrixXd::Zero(2, 2), p.R(), MatrixXd::Zero(2, 2), p.x0(), 2.0);
  const auto st = ilqr::rollout(prob, rkocp::builtin("methodC"), 8, rkocp::oracle::random_controls(32, 5));
  const auto co = ilqr::costates(prob, rkocp::builtin("methodC"), st);
  for (const auto& pk : co.p) CHECK(pk.isZero());
  for (const auto& u : ilqr::node_controls(prob, st, co)) CHECK(u.isZero());
}

TEST_CASE("pendulum costates and node controls") {
  const auto prob = rkocp::pendulum();
  for (const char* name : {"euler", "methodB", "trapezoidal"}) {
    const auto tab = rkocp::builtin(name);
    const auto res = ilqr::solve(prob, tab, 100);
    const auto co = ilqr::costates(prob, tab, res.state);
    CAPTURE(name);
    CHECK(costate_residual(prob, tab, res.state, co) < 1e-10 * (1 + co.p[0].norm()));
    const auto u = ilqr::node_controls(prob, res.state, co);
    for (std::size_t k = 0; k < u.size(); ++k) CHECK(u[k](0) == doctest::Approx(-20.0 * co.p[k](1)).epsilon(1e-13));
  }
}

TEST_CASE("example 3.1 initial costate converges at fourth order") {
  const auto ex = rkocp::example31();
  const auto prob = rkocp::as_nonlinear(ex.problem);
  const auto tab = rkocp::builtin("methodC");
  auto err = [&](int N) {
    const auto res = ilqr::solve(prob, tab, N);
    return std::abs(ilqr::costates(prob, tab, res.state).p[0](0) - ex.reference.p_star(0.0)(0));
  };
  CHECK(std::log2(err(10) / err(20)) == doctest::Approx(4.0).epsilon(0.08));
}

TEST_CASE("newton node controls for dynamics that are not control affine") {
  const auto prob = sine_problem();
  for (const char* name : {"euler", "methodB"}) {
    const auto tab = rkocp::builtin(name);
    const auto res = ilqr::solve(prob, tab, 40);
    const auto co = ilqr::costates(prob, tab, res.state);
    const auto u = ilqr::node_controls(prob, res.state, co);
    for (std::size_t k = 0; k < u.size(); ++k) {
      // root of cos(u) p + u by bisection
      const double p = co.p[k](0);
      double lo = -std::abs(p) - 1, hi = std::abs(p) + 1;
      auto g = [p](double v) { return std::cos(v) * p + v; };
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0 ? lo : hi) = mid;
      }
      CHECK(std::abs(u[k](0) - 0.5 * (lo + hi)) < 1e-12);
    }
  }
}

TEST_CASE("trajectory packing") {
  const auto prob = rkocp::pendulum();
  const auto tab = rkocp::builtin("methodA");
  const auto res = ilqr::solve(prob, tab, 20);
  const auto co = ilqr::costates(prob, tab, res.state);
  const auto traj = ilqr::to_trajectory(res.state, co, ilqr::node_controls(prob, res.state, co));
  CHECK(traj.steps() == 20);
  CHECK(traj.x.size() == 21);
  CHECK(traj.u.size() == 21);
  CHECK(traj.stage_control(3, 1)(0) == res.state.U(3 * 2 + 1));
}

}
