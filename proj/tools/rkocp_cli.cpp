// rkocp: solves, order studies, tableau reports and gradient checks for
// Runge-Kutta discretized optimal control problems.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rkocp/error.hpp"
#include "rkocp/io.hpp"
#include "rkocp/oracle.hpp"
#include "rkocp/order_study.hpp"

namespace {

constexpr int kExitSolver = 1;
constexpr int kExitUsage = 2;
constexpr double kGradcheckThreshold = 1e-5;

bool is_usage_error(rkocp::ErrorKind kind) {
  using rkocp::ErrorKind;
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::NotFound:
    case ErrorKind::InvalidTableau:
    case ErrorKind::InvalidProblem:
    case ErrorKind::DegenerateFamily:
      return true;
    default:
      return false;
  }
}

/// Output file if a path was given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary);
    if (!file_) throw rkocp::Error(rkocp::ErrorKind::NotFound, "cannot write '" + path + "'");
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  /// Where human-readable notes go so that CSV on stdout stays clean.
  std::ostream& notes() { return file_.is_open() ? std::cout : std::cerr; }

 private:
  std::ofstream file_;
};

struct Options {
  std::string problem;
  std::string method;
  int steps = 0;
  std::vector<double> h_grid;
  std::string out;
  std::string log;
  std::uint64_t seed = 42;
  std::string target = "node";
  std::optional<int> order;
  double tol = 1e-8;
  int max_iter = 200;
  bool no_numeric_reference = false;
};

int cmd_solve(const Options& o) {
  const auto spec = rkocp::io::load_problem(o.problem);
  const auto tab = rkocp::io::load_tableau(o.method);
  Sink sink(o.out);
  const auto sol = rkocp::solve_problem(spec, tab, o.steps, {o.tol, o.max_iter});
  rkocp::io::write_trajectory_csv(sink.stream(), sol.trajectory);
  if (!o.log.empty()) {
    Sink log(o.log);
    rkocp::io::write_iterate_log_csv(log.stream(), sol.log);
  }
  sink.notes() << "Jd = " << rkocp::io::format_number(sol.cost) << '\n'
               << "iterations = " << sol.iterations << '\n';
  return 0;
}

int cmd_order_study(const Options& o) {
  const auto spec = rkocp::io::load_problem(o.problem);
  const auto tab = rkocp::io::load_tableau(o.method);
  const auto target = rkocp::StudyTarget::parse(o.target);
  rkocp::OrderStudyOptions opts;
  opts.numeric_reference = !o.no_numeric_reference;
  opts.solver = {o.tol, o.max_iter};
  Sink sink(o.out);
  const auto study = rkocp::run_order_study(spec, tab, o.h_grid, target, opts);
  rkocp::io::write_order_study_csv(sink.stream(), study);
  for (const auto& w : study.warnings) std::cerr << "warning: " << w << '\n';
  if (study.fitted_slope)
    sink.notes() << "fitted slope (" << study.method << ", " << study.target
                 << ") = " << rkocp::io::format_number(*study.fitted_slope) << '\n';
  return 0;
}

int cmd_tableau(const Options& o) {
  const auto tab = rkocp::io::load_tableau(o.method);
  int order = 0;
  if (o.order) {
    order = *o.order;
  } else {
    try {
      order = rkocp::builtin_ocp_order(o.method);
    } catch (const rkocp::Error&) {
      throw rkocp::Error(rkocp::ErrorKind::ParseError,
                         "--order is required for tableaus loaded from a file");
    }
  }
  Sink sink(o.out);
  rkocp::io::write_tableau_report(sink.stream(), tab, order);
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const auto spec = rkocp::io::load_problem(o.problem);
  const auto tab = rkocp::io::load_tableau(o.method);
  const auto prob = spec.nonlinear();
  const auto dim = static_cast<Eigen::Index>(tab.stages()) * prob.m() * o.steps;
  const Eigen::VectorXd U = rkocp::oracle::random_controls(dim, o.seed);
  const auto exact = rkocp::oracle::grad_exact(prob, tab, o.steps, U);
  const auto fd = rkocp::oracle::grad_fd(prob, tab, o.steps, U);
  const auto cmp = rkocp::oracle::compare_gradients(exact, fd);
  Sink sink(o.out);
  rkocp::io::write_gradient_report(sink.stream(), cmp, dim, kGradcheckThreshold);
  return cmp.max_relative_error < kGradcheckThreshold ? 0 : kExitSolver;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runge-Kutta discretized optimal control toolkit", "rkocp"};
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "Solve a problem and write the trajectory CSV");
  solve->add_option("--problem", o.problem, "Builtin problem or problem file")->required();
  solve->add_option("--method", o.method, "Builtin method or tableau file")->required();
  solve->add_option("--steps", o.steps, "Number of steps N")->required()->check(CLI::PositiveNumber);
  solve->add_option("--out", o.out, "Trajectory CSV path (default stdout)");
  solve->add_option("--log", o.log, "Iterate log CSV path");
  solve->add_option("--tol", o.tol, "Gradient tolerance for nonlinear problems");
  solve->add_option("--max-iter", o.max_iter, "Iteration limit for nonlinear problems");

  auto* study = app.add_subcommand("order-study", "Max control error over a step-size grid");
  study->add_option("--problem", o.problem, "Builtin problem or problem file")->required();
  study->add_option("--method", o.method, "Builtin method or tableau file")->required();
  study->add_option("--h-grid", o.h_grid, "Step sizes, comma separated")
      ->required()
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  study->add_option("--target", o.target, "node or stage:<i>");
  study->add_option("--out", o.out, "CSV path (default stdout)");
  study->add_flag("--no-numeric-reference", o.no_numeric_reference,
                  "Fail instead of solving a finer methodC reference");

  auto* tableau = app.add_subcommand("tableau", "Print a tableau, its adjoint and stage orders");
  tableau->add_option("--method", o.method, "Builtin method or tableau file")->required();
  tableau->add_option("--order", o.order, "Method order (required for tableau files)");
  tableau->add_option("--out", o.out, "Report path (default stdout)");

  auto* grad = app.add_subcommand("gradcheck", "Compare exact and finite-difference gradients");
  grad->add_option("--problem", o.problem, "Builtin problem or problem file")->required();
  grad->add_option("--method", o.method, "Builtin method or tableau file")->required();
  grad->add_option("--steps", o.steps, "Number of steps N")->check(CLI::PositiveNumber);
  grad->add_option("--seed", o.seed, "Seed for the random controls");
  grad->add_option("--out", o.out, "Report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*solve) return cmd_solve(o);
    if (*study) return cmd_order_study(o);
    if (*tableau) return cmd_tableau(o);
    if (*grad) {
      if (o.steps == 0) o.steps = 3;
      return cmd_gradcheck(o);
    }
  } catch (const rkocp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_usage_error(e.kind()) ? kExitUsage : kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitUsage;
}
