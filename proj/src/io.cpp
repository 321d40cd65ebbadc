#include "rkocp/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rkocp/error.hpp"

namespace rkocp::io {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5e", v);
  return buf;
}

namespace {

int line_of(const std::string& text, std::size_t byte) {
  const auto end = text.begin() + static_cast<std::ptrdiff_t>(std::min(byte, text.size()));
  return 1 + static_cast<int>(std::count(text.begin(), end, '\n'));
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports the byte just past the offending token.
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    throw Error(ErrorKind::ParseError,
                origin + ":" + std::to_string(line_of(text, byte)) + ": malformed JSON");
  }
}

[[noreturn]] void bad_field(const std::string& origin, const std::string& key,
                            const std::string& what) {
  throw Error(ErrorKind::ParseError, origin + ": field '" + key + "' " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& origin) {
  if (!obj.is_object()) throw Error(ErrorKind::ParseError, origin + ": expected a JSON object");
  const auto it = obj.find(key);
  if (it == obj.end()) bad_field(origin, key, "is missing");
  return *it;
}

int read_int(const json& obj, const std::string& key, const std::string& origin) {
  const auto& v = require(obj, key, origin);
  if (!v.is_number_integer()) bad_field(origin, key, "must be an integer");
  return v.get<int>();
}

double read_number(const json& obj, const std::string& key, const std::string& origin) {
  const auto& v = require(obj, key, origin);
  if (!v.is_number()) bad_field(origin, key, "must be a number");
  return v.get<double>();
}

VectorXd read_vector(const json& obj, const std::string& key, std::size_t len,
                     const std::string& origin) {
  const auto& v = require(obj, key, origin);
  if (!v.is_array()) bad_field(origin, key, "must be an array");
  if (v.size() != len)
    bad_field(origin, key, "must have " + std::to_string(len) + " entries, has " +
                               std::to_string(v.size()));
  VectorXd out(static_cast<Eigen::Index>(len));
  for (std::size_t i = 0; i < len; ++i) {
    if (!v[i].is_number()) bad_field(origin, key, "entry " + std::to_string(i) + " is not a number");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

MatrixXd read_matrix(const json& obj, const std::string& key, int rows, int cols,
                     const std::string& origin) {
  const VectorXd flat =
      read_vector(obj, key, static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), origin);
  MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = flat(i * cols + j);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool is_builtin_tableau(const std::string& name) {
  const auto& names = builtin_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

}  // namespace

ButcherTableau parse_tableau(const std::string& text, const std::string& origin) {
  const json doc = parse_json(text, origin);
  const int s = read_int(doc, "s", origin);
  if (s < 1) bad_field(origin, "s", "must be positive");
  std::string name = "custom";
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) bad_field(origin, "name", "must be a string");
    name = doc["name"].get<std::string>();
  }
  MatrixXd a = read_matrix(doc, "a", s, s, origin);
  VectorXd b = read_vector(doc, "b", static_cast<std::size_t>(s), origin);
  return ButcherTableau(std::move(name), std::move(a), std::move(b));
}

ProblemSpec parse_problem(const std::string& text, const std::string& origin) {
  const json doc = parse_json(text, origin);
  const auto& kind = require(doc, "kind", origin);
  if (!kind.is_string()) bad_field(origin, "kind", "must be a string");
  if (kind == "builtin") {
    const auto& name = require(doc, "name", origin);
    if (!name.is_string()) bad_field(origin, "name", "must be a string");
    return builtin_problem(name.get<std::string>());
  }
  if (kind != "lq") bad_field(origin, "kind", "must be \"lq\" or \"builtin\"");
  const int n = read_int(doc, "n", origin);
  const int m = read_int(doc, "m", origin);
  if (n < 1) bad_field(origin, "n", "must be positive");
  if (m < 1) bad_field(origin, "m", "must be positive");
  MatrixXd S = doc.contains("S") ? read_matrix(doc, "S", n, m, origin) : MatrixXd::Zero(n, m);
  LQProblem prob(read_matrix(doc, "A", n, n, origin), read_matrix(doc, "B", n, m, origin),
                 read_matrix(doc, "Q", n, n, origin), std::move(S),
                 read_matrix(doc, "R", m, m, origin), read_matrix(doc, "M", n, n, origin),
                 read_vector(doc, "x0", static_cast<std::size_t>(n), origin),
                 read_number(doc, "tf", origin));
  std::string name = origin;
  if (doc.contains("name") && doc["name"].is_string()) name = doc["name"].get<std::string>();
  return {name, std::move(prob), std::nullopt};
}

ButcherTableau load_tableau(const std::string& name_or_path) {
  if (is_builtin_tableau(name_or_path)) return builtin(name_or_path);
  return parse_tableau(read_file(name_or_path), name_or_path);
}

ProblemSpec load_problem(const std::string& name_or_path) {
  if (name_or_path == "example31" || name_or_path == "spring" || name_or_path == "pendulum")
    return builtin_problem(name_or_path);
  return parse_problem(read_file(name_or_path), name_or_path);
}

void write_trajectory_csv(std::ostream& out, const DiscreteTrajectory& traj) {
  const auto n = traj.x.empty() ? 0 : traj.x.front().size();
  const auto m = traj.u.empty() ? 0 : traj.u.front().size();
  out << "k,t";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",x_" << i;
  for (Eigen::Index i = 1; i <= m; ++i) out << ",u_" << i;
  for (Eigen::Index i = 1; i <= n; ++i) out << ",p_" << i;
  out << '\n';
  for (std::size_t k = 0; k < traj.x.size(); ++k) {
    out << k << ',' << format_number(static_cast<double>(k) * traj.h);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_number(traj.x[k](i));
    for (Eigen::Index i = 0; i < m; ++i) out << ',' << format_number(traj.u[k](i));
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_number(traj.p[k](i));
    out << '\n';
  }
}

void write_iterate_log_csv(std::ostream& out, const std::vector<ilqr::IterateRecord>& log) {
  out << "iter,Jd,grad_inf_norm,step_norm,alpha\n";
  for (const auto& r : log)
    out << r.iter << ',' << format_number(r.cost) << ',' << format_number(r.grad_inf_norm) << ','
        << format_number(r.step_norm) << ',' << format_number(r.alpha) << '\n';
}

void write_order_study_csv(std::ostream& out, const OrderStudy& study) {
  out << "h,max_error\n";
  for (const auto& s : study.samples)
    out << format_number(s.h) << ',' << format_number(s.max_error) << '\n';
}

namespace {

void print_matrix(std::ostream& out, const MatrixXd& a, const std::string& indent) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    out << indent;
    for (Eigen::Index j = 0; j < a.cols(); ++j) out << (j ? "  " : "") << format_number(a(i, j));
    out << '\n';
  }
}

}  // namespace

void write_tableau_report(std::ostream& out, const ButcherTableau& tab, int method_order) {
  out << "method: " << tab.name() << " (s = " << tab.stages() << ", order r = " << method_order
      << (tab.is_explicit() ? ", explicit" : ", implicit") << ")\n";
  out << "a:\n";
  print_matrix(out, tab.a(), "  ");
  out << "b:\n";
  print_matrix(out, tab.b().transpose(), "  ");
  out << "c:\n";
  print_matrix(out, tab.c().transpose(), "  ");

  std::optional<AdjointTableau> adj;
  try {
    adj = adjoint(tab);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::AdjointUndefined) throw;
    out << "adjoint: undefined (" << e.what() << ")\n";
    return;
  }
  out << "adjoint a:\n";
  print_matrix(out, adj->abar, "  ");
  out << "adjoint c:\n";
  print_matrix(out, adj->cbar.transpose(), "  ");
  out << "symplectic residual: " << format_number(symplectic_residual(tab, *adj)) << '\n';
  out << "stage  q1  q2  c_match  predicted\n";
  for (int i = 0; i < tab.stages(); ++i) {
    const auto rep = stage_orders(tab, *adj, i, method_order);
    out << "  " << i + 1 << "    " << rep.q1 << "   " << rep.q2 << "   "
        << (rep.c_match ? "yes" : "no ") << "      " << rep.predicted_order << '\n';
  }
}

void write_gradient_report(std::ostream& out, const oracle::GradientComparison& cmp,
                           Eigen::Index dim, double threshold) {
  out << "gradient length: " << dim << '\n';
  out << "max relative discrepancy: " << format_number(cmp.max_relative_error)
      << " (component " << cmp.worst_index << ")\n";
  out << (cmp.max_relative_error < threshold ? "PASS" : "FAIL") << '\n';
}

}  // namespace rkocp::io
