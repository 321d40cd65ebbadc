#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rkocp/dlqr.hpp"
#include "rkocp/ilqr.hpp"
#include "rkocp/oracle.hpp"
#include "rkocp/order_study.hpp"
#include "rkocp/tableau.hpp"

namespace rkocp::io {

/// Scientific notation with 6 significant digits.
std::string format_number(double v);

/// JSON object with integer `s`, row-major `a` (s*s), `b` (s) and optional
/// `name`. Throws Error(ParseError) with a line number on malformed input.
ButcherTableau parse_tableau(const std::string& text, const std::string& origin = "<string>");

/// JSON object with `kind` "lq" (n, m, A, B, Q, S?, R, M, x0, tf) or
/// "builtin" (name).
ProblemSpec parse_problem(const std::string& text, const std::string& origin = "<string>");

/// A builtin name, or otherwise a path to a file in the formats above.
ButcherTableau load_tableau(const std::string& name_or_path);
ProblemSpec load_problem(const std::string& name_or_path);

/// k,t,x_1..x_n,u_1..u_m,p_1..p_n with N + 1 rows.
void write_trajectory_csv(std::ostream& out, const DiscreteTrajectory& traj);
/// iter,Jd,grad_inf_norm,step_norm,alpha
void write_iterate_log_csv(std::ostream& out, const std::vector<ilqr::IterateRecord>& log);
/// h,max_error
void write_order_study_csv(std::ostream& out, const OrderStudy& study);

/// Human-readable tableau, adjoint and stage-order report.
void write_tableau_report(std::ostream& out, const ButcherTableau& tab, int method_order);

void write_gradient_report(std::ostream& out, const oracle::GradientComparison& cmp,
                           Eigen::Index dim, double threshold);

}  // namespace rkocp::io
