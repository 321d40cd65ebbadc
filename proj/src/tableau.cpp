#include "rkocp/tableau.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rkocp/error.hpp"

namespace rkocp {

namespace {

constexpr double kAbscissaTol = 1e-14;
constexpr double kWeightSumTol = 1e-12;
constexpr double kConditionTol = 1e-12;

// 0^0 = 1, so the l = 2 condition reduces to the definition of c_i.
double power(double base, int exponent) {
  return exponent == 0 ? 1.0 : std::pow(base, exponent);
}

// Largest l in [2, max(cap, 2)] such that sum_j coeff_ij c_j^(l-2) = c_i^(l-1)/(l-1)
// holds for every 2..l; 1 when even l = 2 fails.
int condition_order(const Eigen::MatrixXd& coeff, const Eigen::VectorXd& c, int i, int cap) {
  int reached = 1;
  for (int l = 2; l <= std::max(cap, 2); ++l) {
    double lhs = 0.0;
    for (int j = 0; j < c.size(); ++j) lhs += coeff(i, j) * power(c(j), l - 2);
    const double rhs = power(c(i), l - 1) / (l - 1);
    if (std::abs(lhs - rhs) > kConditionTol) break;
    reached = l;
  }
  return reached;
}

}  // namespace

ButcherTableau::ButcherTableau(std::string name, Eigen::MatrixXd a, Eigen::VectorXd b,
                               std::optional<Eigen::VectorXd> c)
    : name_(std::move(name)), a_(std::move(a)), b_(std::move(b)) {
  const auto s = b_.size();
  if (s == 0) throw Error(ErrorKind::InvalidTableau, "tableau '" + name_ + "' has no stages");
  if (a_.rows() != s || a_.cols() != s) {
    std::ostringstream msg;
    msg << "tableau '" << name_ << "': a is " << a_.rows() << "x" << a_.cols() << " but b has "
        << s << " entries";
    throw Error(ErrorKind::InvalidTableau, msg.str());
  }
  if (!a_.allFinite() || !b_.allFinite())
    throw Error(ErrorKind::InvalidTableau, "tableau '" + name_ + "' has non-finite coefficients");
  if (std::abs(b_.sum() - 1.0) > kWeightSumTol) {
    std::ostringstream msg;
    msg << "tableau '" << name_ << "': weights sum to " << b_.sum() << ", expected 1";
    throw Error(ErrorKind::InvalidTableau, msg.str());
  }
  c_ = a_.rowwise().sum();
  if (c) {
    if (c->size() != s || (*c - c_).cwiseAbs().maxCoeff() > kAbscissaTol)
      throw Error(ErrorKind::InvalidTableau,
                  "tableau '" + name_ + "': supplied c does not match the row sums of a");
  }
  explicit_ = a_.triangularView<Eigen::Upper>().toDenseMatrix().isZero(0.0);
}

AdjointTableau adjoint(const ButcherTableau& tab) {
  const int s = tab.stages();
  const auto& a = tab.a();
  const auto& b = tab.b();
  for (int i = 0; i < s; ++i) {
    if (!(b(i) > 0.0)) {
      std::ostringstream msg;
      msg << "tableau '" << tab.name() << "': b_" << (i + 1) << " = " << b(i)
          << " is not positive";
      throw Error(ErrorKind::AdjointUndefined, msg.str());
    }
  }
  AdjointTableau adj;
  adj.abar.resize(s, s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) adj.abar(i, j) = b(j) - b(j) * a(j, i) / b(i);
  adj.bbar = b;
  adj.cbar = adj.abar.rowwise().sum();
  return adj;
}

double symplectic_residual(const ButcherTableau& tab, const AdjointTableau& adj) {
  const auto& a = tab.a();
  const auto& b = tab.b();
  double worst = 0.0;
  for (int i = 0; i < tab.stages(); ++i)
    for (int j = 0; j < tab.stages(); ++j)
      worst = std::max(worst, std::abs(b(i) * adj.abar(i, j) + b(j) * a(j, i) - b(i) * b(j)));
  return worst;
}

StageOrderReport stage_orders(const ButcherTableau& tab, const AdjointTableau& adj, int stage,
                              int method_order) {
  StageOrderReport report;
  report.stage = stage;
  report.q1 = std::min(condition_order(tab.a(), tab.c(), stage, method_order),
                       std::max(method_order, 2));
  report.q2 = std::min(condition_order(adj.abar, tab.c(), stage, method_order),
                       std::max(method_order, 2));
  report.c_match = std::abs(tab.c()(stage) - adj.cbar(stage)) <= kConditionTol;
  report.predicted_order =
      report.c_match ? std::min({report.q1, report.q2, method_order}) : 1;
  return report;
}

std::vector<bool> check_cc(const ButcherTableau& tab, const AdjointTableau& adj) {
  std::vector<bool> out(static_cast<std::size_t>(tab.stages()));
  for (int i = 0; i < tab.stages(); ++i)
    out[static_cast<std::size_t>(i)] = std::abs(tab.c()(i) - adj.cbar(i)) <= kConditionTol;
  return out;
}

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {"euler", "methodA", "methodB", "methodC",
                                                  "trapezoidal"};
  return names;
}

ButcherTableau builtin(const std::string& name) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  if (name == "euler") {
    return ButcherTableau(name, MatrixXd::Zero(1, 1), VectorXd::Ones(1));
  }
  if (name == "methodA") {
    MatrixXd a(2, 2);
    a << 0, 0,
         1, 0;
    VectorXd b(2);
    b << 0.5, 0.5;
    return ButcherTableau(name, a, b);
  }
  if (name == "methodB") {
    MatrixXd a(3, 3);
    a << 0,    0, 0,
         0.5,  0, 0,
         -1.0, 2, 0;
    VectorXd b(3);
    b << 1.0 / 6, 2.0 / 3, 1.0 / 6;
    return ButcherTableau(name, a, b);
  }
  if (name == "methodC") {
    MatrixXd a = MatrixXd::Zero(4, 4);
    a(1, 0) = 0.5;
    a(2, 1) = 0.5;
    a(3, 2) = 1.0;
    VectorXd b(4);
    b << 1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6;
    return ButcherTableau(name, a, b);
  }
  if (name == "trapezoidal") {
    MatrixXd a(2, 2);
    a << 0,   0,
         0.5, 0.5;
    VectorXd b(2);
    b << 0.5, 0.5;
    return ButcherTableau(name, a, b);
  }
  throw Error(ErrorKind::NotFound, "no builtin tableau named '" + name + "'");
}

int builtin_ocp_order(const std::string& name) {
  if (name == "euler") return 1;
  if (name == "methodA") return 2;
  if (name == "methodB") return 3;
  if (name == "methodC") return 4;
  if (name == "trapezoidal") return 2;
  throw Error(ErrorKind::NotFound, "no builtin tableau named '" + name + "'");
}

ButcherTableau explicit3_family(double c2) {
  if (c2 == 0.0 || std::abs(c2 - 2.0 / 3.0) < 1e-14 || c2 == 1.0) {
    std::ostringstream msg;
    msg << "c2 = " << c2 << " makes the 3-stage family singular";
    throw Error(ErrorKind::DegenerateFamily, msg.str());
  }
  const double denom = c2 * (2.0 - 3.0 * c2);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  a(1, 0) = c2;
  a(2, 0) = (3.0 * c2 - 1.0 - 3.0 * c2 * c2) / denom;
  a(2, 1) = (1.0 - c2) / denom;
  Eigen::VectorXd b(3);
  b << (c2 - 1.0 / 3.0) / (2.0 * c2), 1.0 / (6.0 * c2 * (1.0 - c2)),
      (2.0 - 3.0 * c2) / (6.0 * (1.0 - c2));
  std::ostringstream name;
  name << "explicit3(c2=" << c2 << ")";
  return ButcherTableau(name.str(), a, b);
}

}  // namespace rkocp
