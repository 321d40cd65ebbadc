#pragma once

#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "rkocp/error.hpp"
#include "rkocp/problem.hpp"

namespace testing {

/// Kind of the rkocp::Error thrown by f, or nullopt when it returns normally.
template <class F>
std::optional<rkocp::ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const rkocp::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

/// The spring oscillator on a shorter horizon, so that implicit stages stay
/// inside the fixed-point contraction range on coarse grids.
inline rkocp::LQProblem short_spring(double tf) {
  const auto p = rkocp::spring_oscillator();
  return rkocp::LQProblem(p.A(), p.B(), p.Q(), p.S(), p.R(), p.M(), p.x0(), tf);
}

}  // namespace testing

#define CHECK_THROWS_KIND(expr, k) CHECK(testing::error_kind([&] { (void)(expr); }) == (k))
