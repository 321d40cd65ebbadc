#include "rkocp/discretization.hpp"

#include <cmath>
#include <sstream>

#include "rkocp/error.hpp"

namespace rkocp {

StageCostBlocks stage_cost_blocks(const ButcherTableau& tab, double h, const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& S, const Eigen::MatrixXd& R) {
  const int s = tab.stages();
  const auto n = Q.rows();
  const auto m = R.rows();
  StageCostBlocks out{Eigen::MatrixXd::Zero(s * n, s * n), Eigen::MatrixXd::Zero(s * n, s * m),
                      Eigen::MatrixXd::Zero(s * m, s * m)};
  for (int i = 0; i < s; ++i) {
    const double w = h * tab.b()(i);
    out.Qh.block(i * n, i * n, n, n) = w * Q;
    out.Sh.block(i * n, i * m, n, m) = w * S;
    out.Rh.block(i * m, i * m, m, m) = w * R;
  }
  return out;
}

Eigen::MatrixXd stacked_identity(int stages, int n) {
  Eigen::MatrixXd Z(stages * n, n);
  for (int i = 0; i < stages; ++i) Z.block(i * n, 0, n, n).setIdentity();
  return Z;
}

Eigen::MatrixXd coupled_blocks(const Eigen::MatrixXd& coeff, const std::vector<Eigen::MatrixXd>& blocks,
                               double h) {
  const auto s = coeff.rows();
  const auto rows = blocks.front().rows();
  const auto cols = blocks.front().cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s * rows, s * cols);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j)
      if (coeff(i, j) != 0.0)
        out.block(i * rows, j * cols, rows, cols) = h * coeff(i, j) * blocks[static_cast<std::size_t>(j)];
  return out;
}

Eigen::MatrixXd weighted_row(const Eigen::VectorXd& b, const std::vector<Eigen::MatrixXd>& blocks,
                             double h) {
  const auto s = b.size();
  const auto rows = blocks.front().rows();
  const auto cols = blocks.front().cols();
  Eigen::MatrixXd out(rows, s * cols);
  for (Eigen::Index j = 0; j < s; ++j)
    out.block(0, j * cols, rows, cols) = h * b(j) * blocks[static_cast<std::size_t>(j)];
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> solve_stage_system(const Eigen::MatrixXd& coupling,
                                                                const Eigen::MatrixXd& Z,
                                                                const Eigen::MatrixXd& rhs, double h) {
  const auto dim = coupling.rows();
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(dim, dim) - coupling;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  if (!(lu.rcond() > 1e-13)) {
    std::ostringstream msg;
    msg << "stage system I - hA is singular at h = " << h;
    throw Error(ErrorKind::StepTooLarge, msg.str());
  }
  return {lu.solve(Z), lu.solve(rhs)};
}

int steps_for(double tf, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidProblem, "step size must be positive");
  const double ratio = tf / h;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << "step size " << h << " does not divide the horizon " << tf;
    throw Error(ErrorKind::InvalidProblem, msg.str());
  }
  return static_cast<int>(rounded);
}

}  // namespace rkocp
