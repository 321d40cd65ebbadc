#include "rkocp/order_study.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rkocp/discretization.hpp"
#include "rkocp/error.hpp"

namespace rkocp {

using Eigen::VectorXd;

double ProblemSpec::tf() const {
  return std::visit([](const auto& p) { return p.tf(); }, problem);
}

NonlinearProblem ProblemSpec::nonlinear() const {
  if (const auto* lq = std::get_if<LQProblem>(&problem)) return as_nonlinear(*lq);
  return std::get<NonlinearProblem>(problem);
}

ProblemSpec builtin_problem(const std::string& name) {
  if (name == "example31") {
    auto ex = example31();
    return {name, ex.problem, ex.reference};
  }
  if (name == "spring") return {name, spring_oscillator(), std::nullopt};
  if (name == "pendulum") return {name, pendulum(), std::nullopt};
  throw Error(ErrorKind::NotFound, "unknown problem '" + name + "'");
}

ProblemSolution solve_problem(const ProblemSpec& spec, const ButcherTableau& tab, int steps,
                              const ilqr::SolveOptions& opts) {
  ProblemSolution out;
  if (const auto* lq = std::get_if<LQProblem>(&spec.problem)) {
    const auto sys = dlqr::assemble(*lq, tab, steps);
    const auto pass = dlqr::riccati_backward(sys, *lq);
    out.trajectory = dlqr::rollout(sys, pass, *lq, lq->x0());
    out.cost = dlqr::discrete_cost(sys, *lq, out.trajectory);
    return out;
  }
  const auto& prob = std::get<NonlinearProblem>(spec.problem);
  auto res = ilqr::solve(prob, tab, steps, std::nullopt, opts);
  auto co = ilqr::costates(prob, tab, res.state);
  auto nodes = ilqr::node_controls(prob, res.state, co);
  out.trajectory = ilqr::to_trajectory(res.state, co, std::move(nodes));
  out.cost = res.state.cost;
  out.iterations = res.iterations;
  out.log = std::move(res.log);
  return out;
}

StudyTarget StudyTarget::parse(const std::string& text) {
  if (text == "node") return {};
  const std::string prefix = "stage:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string rest = text.substr(prefix.size());
    std::size_t used = 0;
    int idx = 0;
    try {
      idx = std::stoi(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == rest.size() && !rest.empty() && idx >= 1) return {false, idx - 1};
  }
  throw Error(ErrorKind::ParseError, "target must be 'node' or 'stage:<i>', got '" + text + "'");
}

std::string StudyTarget::label() const {
  return node ? std::string("node") : "stage:" + std::to_string(stage + 1);
}

double fit_order(const std::vector<OrderSample>& samples, std::vector<std::string>* warnings) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& s : samples) {
    if (!(s.max_error > 0.0) || !(s.h > 0.0)) {
      if (warnings) {
        std::ostringstream msg;
        msg << "sample h=" << s.h << " has non-positive error " << s.max_error << "; excluded";
        warnings->push_back(msg.str());
      }
      continue;
    }
    pts.emplace_back(std::log(s.h), std::log(s.max_error));
  }
  if (pts.size() < 3)
    throw Error(ErrorKind::NoFit, "need at least 3 samples with positive error, have " +
                                      std::to_string(pts.size()));
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::NoFit, "step sizes must not all be equal");
  return sxy / sxx;
}

double max_control_error(const DiscreteTrajectory& traj, const ButcherTableau& tab,
                         const StudyTarget& target,
                         const std::function<VectorXd(double)>& reference) {
  double worst = 0.0;
  const double h = traj.h;
  if (target.node) {
    for (std::size_t k = 0; k < traj.u.size(); ++k) {
      const double t = static_cast<double>(k) * h;
      worst = std::max(worst, (traj.u[k] - reference(t)).norm());
    }
    return worst;
  }
  const double c = tab.c()(target.stage);
  for (int k = 0; k < traj.steps(); ++k) {
    const double t = (k + c) * h;
    worst = std::max(worst, (traj.stage_control(k, target.stage) - reference(t)).norm());
  }
  return worst;
}

namespace {

/// Node controls of a fine solve, looked up at times on its grid.
class GridReference {
 public:
  GridReference(std::vector<VectorXd> u, double h) : u_(std::move(u)), h_(h) {}

  VectorXd operator()(double t) const {
    const double pos = t / h_;
    const double idx = std::round(pos);
    if (std::abs(pos - idx) > 1e-6 || idx < 0 || idx >= static_cast<double>(u_.size())) {
      std::ostringstream msg;
      msg << "time " << t << " is not a node of the reference grid (h = " << h_ << ")";
      throw Error(ErrorKind::NeedsReference, msg.str());
    }
    return u_[static_cast<std::size_t>(idx)];
  }

 private:
  std::vector<VectorXd> u_;
  double h_;
};

}  // namespace

OrderStudy run_order_study(const ProblemSpec& spec, const ButcherTableau& tab,
                           std::vector<double> h_grid, const StudyTarget& target,
                           const OrderStudyOptions& opts) {
  if (!target.node && target.stage >= tab.stages())
    throw Error(ErrorKind::ParseError, "stage " + std::to_string(target.stage + 1) +
                                           " out of range for a " + std::to_string(tab.stages()) +
                                           "-stage method");
  if (h_grid.empty()) throw Error(ErrorKind::ParseError, "empty step-size grid");
  std::sort(h_grid.begin(), h_grid.end(), std::greater<>());

  std::function<VectorXd(double)> reference;
  if (spec.reference && spec.reference->u_star) {
    reference = spec.reference->u_star;
  } else if (opts.numeric_reference) {
    const double h_ref = h_grid.back() / opts.refine_factor;
    const int n_ref = steps_for(spec.tf(), h_ref);
    auto sol = solve_problem(spec, builtin("methodC"), n_ref, opts.solver);
    reference = GridReference(std::move(sol.trajectory.u), spec.tf() / n_ref);
  } else {
    throw Error(ErrorKind::NeedsReference,
                "problem '" + spec.name + "' has no analytic reference");
  }

  OrderStudy study;
  study.method = tab.name();
  study.target = target.label();
  for (double h : h_grid) {
    const int steps = steps_for(spec.tf(), h);
    const auto sol = solve_problem(spec, tab, steps, opts.solver);
    study.samples.push_back({h, max_control_error(sol.trajectory, tab, target, reference)});
  }
  try {
    study.fitted_slope = fit_order(study.samples, &study.warnings);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoFit) throw;
    study.warnings.emplace_back(e.what());
  }
  return study;
}

}  // namespace rkocp
