#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rkocp/tableau.hpp"

namespace rkocp {

/// Block-diagonal stage weights h*b_i*Q, h*b_i*S, h*b_i*R.
struct StageCostBlocks {
  Eigen::MatrixXd Qh;  // sn x sn
  Eigen::MatrixXd Sh;  // sn x sm
  Eigen::MatrixXd Rh;  // sm x sm
};

StageCostBlocks stage_cost_blocks(const ButcherTableau& tab, double h, const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& S, const Eigen::MatrixXd& R);

/// Z = [I_n; ...; I_n] (s copies).
Eigen::MatrixXd stacked_identity(int stages, int n);

/// Block (i, j) = h * coeff(i, j) * blocks[j].
Eigen::MatrixXd coupled_blocks(const Eigen::MatrixXd& coeff, const std::vector<Eigen::MatrixXd>& blocks,
                               double h);

/// Block row [h b_1 blocks[0], ..., h b_s blocks[s-1]].
Eigen::MatrixXd weighted_row(const Eigen::VectorXd& b, const std::vector<Eigen::MatrixXd>& blocks,
                             double h);

/// Solves (I - coupling) [E F] = [Z rhs]. Throws Error(StepTooLarge) when the
/// stage system is numerically singular at step size h.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> solve_stage_system(const Eigen::MatrixXd& coupling,
                                                                const Eigen::MatrixXd& Z,
                                                                const Eigen::MatrixXd& rhs, double h);

/// Number of steps for horizon tf at step size h; throws Error(InvalidProblem)
/// unless tf/h is an integer to within 1e-9.
int steps_for(double tf, double h);

}  // namespace rkocp
