#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rkocp {

/// Runge-Kutta coefficients (a, b, c). The abscissae are always the row sums of
/// `a`; an explicitly supplied `c` is only checked against them.
class ButcherTableau {
 public:
  /// Throws Error(InvalidTableau) on shape mismatch, sum(b) != 1, or a supplied
  /// `c` that disagrees with the row sums of `a` by more than 1e-14.
  ButcherTableau(std::string name, Eigen::MatrixXd a, Eigen::VectorXd b,
                 std::optional<Eigen::VectorXd> c = std::nullopt);

  [[nodiscard]] int stages() const noexcept { return static_cast<int>(b_.size()); }
  [[nodiscard]] const Eigen::MatrixXd& a() const noexcept { return a_; }
  [[nodiscard]] const Eigen::VectorXd& b() const noexcept { return b_; }
  [[nodiscard]] const Eigen::VectorXd& c() const noexcept { return c_; }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  /// True when `a` is strictly lower triangular.
  [[nodiscard]] bool is_explicit() const noexcept { return explicit_; }

 private:
  std::string name_;
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::VectorXd c_;
  bool explicit_ = false;
};

/// Costate half of the symplectic partitioned pair built from a tableau.
struct AdjointTableau {
  Eigen::MatrixXd abar;
  Eigen::VectorXd bbar;
  Eigen::VectorXd cbar;
};

struct StageOrderReport {
  int stage = 0;  // zero-based
  int q1 = 0;
  int q2 = 0;
  bool c_match = false;
  int predicted_order = 0;
};

/// abar_ij = b_j - b_j a_ji / b_i, bbar = b. Requires every b_i > 0, otherwise
/// throws Error(AdjointUndefined).
AdjointTableau adjoint(const ButcherTableau& tab);

/// Largest symplectic-identity residual max |b_i abar_ij + b_j a_ji - b_i b_j|.
double symplectic_residual(const ButcherTableau& tab, const AdjointTableau& adj);

/// Internal-stage control order conditions for stage `stage` (zero-based) of a
/// method with OCP order `method_order`.
StageOrderReport stage_orders(const ButcherTableau& tab, const AdjointTableau& adj, int stage,
                              int method_order);

/// Per-stage c_i == cbar_i test (within 1e-12).
std::vector<bool> check_cc(const ButcherTableau& tab, const AdjointTableau& adj);

/// One of: euler, methodA, methodB, methodC, trapezoidal. Throws Error(NotFound).
ButcherTableau builtin(const std::string& name);

/// Names accepted by builtin(), in a fixed order.
const std::vector<std::string>& builtin_names();

/// OCP order of a builtin method (euler 1, methodA 2, methodB 3, methodC 4,
/// trapezoidal 2). Throws Error(NotFound) for other names.
int builtin_ocp_order(const std::string& name);

/// The one-parameter family of 3-stage explicit methods of OCP order 3.
/// Throws Error(DegenerateFamily) for c2 in {0, 2/3, 1}.
ButcherTableau explicit3_family(double c2);

}  // namespace rkocp
