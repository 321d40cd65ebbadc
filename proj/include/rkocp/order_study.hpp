#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rkocp/dlqr.hpp"
#include "rkocp/ilqr.hpp"
#include "rkocp/problem.hpp"
#include "rkocp/tableau.hpp"

namespace rkocp {

/// A problem as selected on the command line: LQ problems go to dlqr,
/// everything else to ilqr.
struct ProblemSpec {
  std::string name;
  std::variant<LQProblem, NonlinearProblem> problem;
  std::optional<AnalyticReference> reference;

  [[nodiscard]] bool is_lq() const noexcept { return std::holds_alternative<LQProblem>(problem); }
  [[nodiscard]] double tf() const;
  /// The problem behind the Dynamics interface (LQ problems are wrapped).
  [[nodiscard]] NonlinearProblem nonlinear() const;
};

/// "example31", "spring" or "pendulum"; throws Error(NotFound) otherwise.
ProblemSpec builtin_problem(const std::string& name);

struct ProblemSolution {
  DiscreteTrajectory trajectory;
  double cost = 0.0;
  int iterations = 0;                      // 0 for dlqr
  std::vector<ilqr::IterateRecord> log;   // empty for dlqr
};

ProblemSolution solve_problem(const ProblemSpec& spec, const ButcherTableau& tab, int steps,
                              const ilqr::SolveOptions& opts = {});

/// Node control or control of stage `stage` (zero-based).
struct StudyTarget {
  bool node = true;
  int stage = 0;

  /// "node" or "stage:<i>" with i one-based; throws Error(ParseError).
  static StudyTarget parse(const std::string& text);
  [[nodiscard]] std::string label() const;
};

struct OrderSample {
  double h = 0.0;
  double max_error = 0.0;
};

struct OrderStudy {
  std::string method;
  std::string target;
  std::vector<OrderSample> samples;  // h descending
  std::optional<double> fitted_slope;
  std::vector<std::string> warnings;
};

/// Least-squares slope of log(err) against log(h). Samples with err <= 0 are
/// dropped with a warning; fewer than 3 remaining throws Error(NoFit).
double fit_order(const std::vector<OrderSample>& samples,
                 std::vector<std::string>* warnings = nullptr);

/// Definition of the error: node target max_{0<=k<=N} |u_k - u*(t_k)|,
/// stage target max_{0<=k<N} |u_ki - u*(t_k + c_i h)|.
double max_control_error(const DiscreteTrajectory& traj, const ButcherTableau& tab,
                         const StudyTarget& target,
                         const std::function<Eigen::VectorXd(double)>& reference);

struct OrderStudyOptions {
  /// Without an analytic reference, solve with methodC at min(h)/refine_factor.
  bool numeric_reference = true;
  int refine_factor = 40;
  ilqr::SolveOptions solver{};
};

/// Solves at every h and records the max error against the analytic
/// reference, or against a finer methodC solve when none is known. Throws
/// Error(NeedsReference) when no usable reference exists, including when the
/// target times do not fall on the reference grid.
OrderStudy run_order_study(const ProblemSpec& spec, const ButcherTableau& tab,
                           std::vector<double> h_grid, const StudyTarget& target,
                           const OrderStudyOptions& opts = {});

}  // namespace rkocp
