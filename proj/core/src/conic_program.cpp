#include "gridshaper/socp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <stdexcept>

namespace gridshaper {

LinExpr& LinExpr::add(const LinExpr& other, double scale) {
  for (auto [j, v] : other.terms) add(j, v * scale);
  constant += other.constant * scale;
  return *this;
}

double LinExpr::evaluate(const std::vector<double>& x) const {
  double acc = constant;
  for (auto [j, v] : terms) acc += v * x[j];
  return acc;
}

int ConicProgram::add_variable(std::string name) {
  objective_.push_back(0.0);
  if (name.empty()) name = "x" + std::to_string(objective_.size() - 1);
  names_.push_back(std::move(name));
  return static_cast<int>(objective_.size()) - 1;
}

void ConicProgram::check_expr(const LinExpr& e) const {
  for (auto [j, v] : e.terms) {
    if (j < 0 || j >= num_vars()) throw std::out_of_range("conic program: expression references unknown column");
    if (!std::isfinite(v)) throw std::invalid_argument("conic program: non-finite coefficient");
  }
  if (!std::isfinite(e.constant)) throw std::invalid_argument("conic program: non-finite constant");
}

void ConicProgram::add_objective(const LinExpr& e) {
  check_expr(e);
  for (auto [j, v] : e.terms) objective_[j] += v;
  offset_ += e.constant;
}

void ConicProgram::add_equality(const LinExpr& expr, std::string tag) {
  check_expr(expr);
  const int row = num_equalities();
  for (auto [j, v] : expr.terms) eq_.push_back({row, j, v});
  eq_rhs_.push_back(-expr.constant);
  eq_tags_.push_back(std::move(tag));
}

void ConicProgram::add_nonnegative(const LinExpr& expr, std::string tag) {
  check_expr(expr);
  const int row = num_orthant();
  for (auto [j, v] : expr.terms) orth_.push_back({row, j, -v});
  orth_rhs_.push_back(expr.constant);
  orth_tags_.push_back(std::move(tag));
}

void ConicProgram::add_lower_bound(int var, double lb) {
  LinExpr e = LinExpr::var(var);
  e += -lb;
  add_nonnegative(e, names_.at(var) + ">=lb");
}

void ConicProgram::add_upper_bound(int var, double ub) {
  LinExpr e(ub);
  e.add(var, -1.0);
  add_nonnegative(e, names_.at(var) + "<=ub");
}

void ConicProgram::add_bounds(int var, double lb, double ub) {
  // a zero-width box has no interior; pin the variable instead
  if (lb <= ub && ub - lb <= 1e-12 * std::max(1.0, std::abs(lb))) {
    add_equality(LinExpr(-lb).add(var, 1.0), names_.at(var) + "==");
    return;
  }
  add_lower_bound(var, lb);
  add_upper_bound(var, ub);
}

void ConicProgram::add_soc(const LinExpr& head, const std::vector<LinExpr>& rest, std::string tag) {
  check_expr(head);
  for (const auto& r : rest) check_expr(r);
  int row = num_cone_rows();
  auto push = [&](const LinExpr& e) {
    for (auto [j, v] : e.terms) cone_.push_back({row, j, -v});
    cone_rhs_.push_back(e.constant);
    ++row;
  };
  push(head);
  for (const auto& r : rest) push(r);
  cone_dims_.push_back(1 + static_cast<int>(rest.size()));
  cone_tags_.push_back(std::move(tag));
}

void ConicProgram::add_rotated_cone(const LinExpr& a, const LinExpr& b, const std::vector<LinExpr>& rest,
                                    std::string tag) {
  // a*b >= ||r||^2, a,b >= 0  <=>  ||(a - b, 2r)|| <= a + b
  LinExpr head = a;
  head.add(b);
  LinExpr diff = a;
  diff.add(b, -1.0);
  std::vector<LinExpr> tail{diff};
  for (const auto& r : rest) {
    LinExpr twice;
    twice.add(r, 2.0);
    tail.push_back(std::move(twice));
  }
  add_soc(head, tail, std::move(tag));
}

int ConicProgram::add_square_epigraph(const std::vector<std::pair<double, LinExpr>>& weighted, std::string name) {
  const int t = add_variable(std::move(name));
  std::vector<LinExpr> rest;
  rest.reserve(weighted.size());
  for (const auto& [w, e] : weighted) {
    if (w < 0.0) throw std::invalid_argument("conic program: negative quadratic weight");
    if (w == 0.0) continue;
    LinExpr scaled;
    scaled.add(e, std::sqrt(w));
    rest.push_back(std::move(scaled));
  }
  add_rotated_cone(LinExpr::var(t), LinExpr(1.0), rest, names_[t]);
  return t;
}

std::vector<ConicProgram::Triplet> ConicProgram::cone_matrix_triplets() const {
  std::vector<Triplet> out = orth_;
  out.reserve(orth_.size() + cone_.size());
  const int shift = num_orthant();
  for (const auto& t : cone_) out.push_back({t.row + shift, t.col, t.value});
  return out;
}

std::vector<double> ConicProgram::cone_rhs() const {
  std::vector<double> h = orth_rhs_;
  h.insert(h.end(), cone_rhs_.begin(), cone_rhs_.end());
  return h;
}

namespace {

std::vector<double> row_values(int rows, const std::vector<ConicProgram::Triplet>& trip, const std::vector<double>& x) {
  std::vector<double> out(rows, 0.0);
  for (const auto& t : trip) out[t.row] += t.value * x[t.col];
  return out;
}

}  // namespace

std::pair<double, std::string> ConicProgram::worst_violation(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != num_vars()) throw std::invalid_argument("conic program: point has wrong size");
  double worst = 0.0;
  std::string where;
  auto consider = [&](double v, const std::string& tag) {
    if (v > worst) {
      worst = v;
      where = tag;
    }
  };

  const auto ax = row_values(num_equalities(), eq_, x);
  for (int i = 0; i < num_equalities(); ++i) consider(std::abs(ax[i] - eq_rhs_[i]), "eq:" + eq_tags_[i]);

  const auto gx = row_values(num_orthant(), orth_, x);
  for (int i = 0; i < num_orthant(); ++i) consider(-(orth_rhs_[i] - gx[i]), "orthant:" + orth_tags_[i]);

  const auto cx = row_values(num_cone_rows(), cone_, x);
  int off = 0;
  for (std::size_t k = 0; k < cone_dims_.size(); ++k) {
    const int dim = cone_dims_[k];
    const double head = cone_rhs_[off] - cx[off];
    double norm2 = 0.0;
    for (int r = 1; r < dim; ++r) {
      const double u = cone_rhs_[off + r] - cx[off + r];
      norm2 += u * u;
    }
    consider(std::sqrt(norm2) - head, "cone:" + cone_tags_[k]);
    off += dim;
  }
  return {worst, where};
}

double ConicProgram::max_violation(const std::vector<double>& x) const { return worst_violation(x).first; }

double ConicProgram::objective_value(const std::vector<double>& x) const {
  double acc = offset_;
  for (int j = 0; j < num_vars(); ++j) acc += objective_[j] * x[j];
  return acc;
}

void ConicProgram::dump(std::ostream& os) const {
  os << "# conic program\n";
  os << "vars " << num_vars() << "\n";
  os << "equalities " << num_equalities() << "\n";
  os << "orthant " << num_orthant() << "\n";
  os << "cones " << cone_dims_.size() << "\n";
  os << "objective offset " << offset_ << "\n";
  for (int j = 0; j < num_vars(); ++j) {
    if (objective_[j] != 0.0) os << "c " << names_[j] << " " << objective_[j] << "\n";
  }
  auto by_row = [](const std::vector<Triplet>& trip, int rows) {
    std::vector<std::vector<std::pair<int, double>>> out(rows);
    for (const auto& t : trip) out[t.row].emplace_back(t.col, t.value);
    return out;
  };
  const auto eq_rows = by_row(eq_, num_equalities());
  for (int i = 0; i < num_equalities(); ++i) {
    os << "eq " << eq_tags_[i] << ":";
    for (auto [j, v] : eq_rows[i]) os << " " << v << "*" << names_[j];
    os << " = " << eq_rhs_[i] << "\n";
  }
  const auto orth_rows = by_row(orth_, num_orthant());
  for (int i = 0; i < num_orthant(); ++i) {
    os << "ge " << orth_tags_[i] << ": " << orth_rhs_[i];
    for (auto [j, v] : orth_rows[i]) os << " " << -v << "*" << names_[j];
    os << " >= 0\n";
  }
  const auto cone_rows = by_row(cone_, num_cone_rows());
  int off = 0;
  for (std::size_t k = 0; k < cone_dims_.size(); ++k) {
    os << "soc " << cone_tags_[k] << " dim " << cone_dims_[k] << "\n";
    for (int r = 0; r < cone_dims_[k]; ++r) {
      os << "  " << cone_rhs_[off + r];
      for (auto [j, v] : cone_rows[off + r]) os << " " << -v << "*" << names_[j];
      os << "\n";
    }
    off += cone_dims_[k];
  }
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

SolverOptions SolverOptions::from_environment() {
  SolverOptions opts;
  if (const char* env = std::getenv("GRIDSHAPER_SOLVER_TOL")) {
    char* end = nullptr;
    const double tol = std::strtod(env, &end);
    if (end != env && std::isfinite(tol) && tol > 0.0) {
      opts.feastol = tol;
      opts.abstol = tol;
      opts.reltol = tol;
    }
  }
  return opts;
}

}  // namespace gridshaper
