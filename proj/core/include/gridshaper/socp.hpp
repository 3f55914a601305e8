#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace gridshaper {

/// Sparse affine expression sum_i coef_i * x[var_i] + constant.
struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  LinExpr() = default;
  explicit LinExpr(double c) : constant(c) {}

  static LinExpr var(int index, double coef = 1.0) {
    LinExpr e;
    e.terms.emplace_back(index, coef);
    return e;
  }

  LinExpr& add(int index, double coef) {
    if (coef != 0.0) terms.emplace_back(index, coef);
    return *this;
  }
  LinExpr& add(const LinExpr& other, double scale = 1.0);
  LinExpr& operator+=(double c) {
    constant += c;
    return *this;
  }

  double evaluate(const std::vector<double>& x) const;
};

/// A second-order-cone program in the form
///
///   minimize    c'x + offset
///   subject to  A x = b
///               h - G x in K
///
/// where K is the product of a nonnegative orthant (the first
/// `num_orthant` rows of G) and second-order cones
/// { (t, u) : ||u|| <= t } whose dimensions are listed in `cone_dims`.
///
/// Programs are built incrementally; orthant and cone rows are kept apart
/// until `cone_matrix_triplets()` stacks them in the canonical order.
class ConicProgram {
public:
  struct Triplet {
    int row;
    int col;
    double value;
  };

  int add_variable(std::string name = {});
  int num_vars() const { return static_cast<int>(objective_.size()); }
  const std::string& var_name(int j) const { return names_[j]; }

  void add_objective(int var, double coef) { objective_[var] += coef; }
  void add_objective(const LinExpr& e);
  double objective_offset() const { return offset_; }
  const std::vector<double>& objective() const { return objective_; }

  /// expr == 0
  void add_equality(const LinExpr& expr, std::string tag = {});
  /// expr >= 0
  void add_nonnegative(const LinExpr& expr, std::string tag = {});
  void add_lower_bound(int var, double lb);
  void add_upper_bound(int var, double ub);
  void add_bounds(int var, double lb, double ub);
  /// ||rest|| <= head
  void add_soc(const LinExpr& head, const std::vector<LinExpr>& rest, std::string tag = {});
  /// a * b >= ||rest||^2 with a, b >= 0.
  void add_rotated_cone(const LinExpr& a, const LinExpr& b, const std::vector<LinExpr>& rest,
                        std::string tag = {});
  /// Introduces t >= sum_i weight_i * expr_i^2 and returns the index of t.
  int add_square_epigraph(const std::vector<std::pair<double, LinExpr>>& weighted, std::string name = {});

  // Assembled view.
  int num_equalities() const { return static_cast<int>(eq_rhs_.size()); }
  int num_orthant() const { return static_cast<int>(orth_rhs_.size()); }
  const std::vector<int>& cone_dims() const { return cone_dims_; }
  int num_cone_rows() const { return static_cast<int>(cone_rhs_.size()); }
  int num_ineq_rows() const { return num_orthant() + num_cone_rows(); }

  const std::vector<Triplet>& equality_triplets() const { return eq_; }
  const std::vector<double>& equality_rhs() const { return eq_rhs_; }
  const std::vector<std::string>& equality_tags() const { return eq_tags_; }
  /// G triplets and h with orthant rows first, then cone rows.
  std::vector<Triplet> cone_matrix_triplets() const;
  std::vector<double> cone_rhs() const;
  const std::vector<std::string>& orthant_tags() const { return orth_tags_; }
  const std::vector<std::string>& cone_tags() const { return cone_tags_; }

  /// Largest violation of any constraint at x: equality residual, orthant
  /// shortfall, or cone shortfall (||u|| - t).
  double max_violation(const std::vector<double>& x) const;

  /// Like max_violation but names the worst constraint.
  std::pair<double, std::string> worst_violation(const std::vector<double>& x) const;

  double objective_value(const std::vector<double>& x) const;

  /// Plain-text listing of rows, cones and objective.
  void dump(std::ostream& os) const;

private:
  void check_expr(const LinExpr& e) const;

  std::vector<double> objective_;
  std::vector<std::string> names_;
  double offset_ = 0.0;

  std::vector<Triplet> eq_;
  std::vector<double> eq_rhs_;
  std::vector<std::string> eq_tags_;

  std::vector<Triplet> orth_;  // G rows of orthant block
  std::vector<double> orth_rhs_;
  std::vector<std::string> orth_tags_;

  std::vector<Triplet> cone_;  // G rows of cone block (row ids local to block)
  std::vector<double> cone_rhs_;
  std::vector<int> cone_dims_;
  std::vector<std::string> cone_tags_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* to_string(SolveStatus status);

struct SolverOptions {
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  int max_iterations = 120;
  double static_regularization = 1e-9;
  double dynamic_regularization = 1e-11;
  int max_refinement_steps = 40;
  int equilibration_passes = 12;
  double step_fraction = 0.99;
  bool verbose = false;

  /// Defaults, with feastol/abstol/reltol taken from GRIDSHAPER_SOLVER_TOL
  /// when that variable holds a positive number.
  static SolverOptions from_environment();
};

struct SolverReport {
  SolveStatus status = SolveStatus::NumericalFailure;
  std::string message;
  int iterations = 0;
  double objective = 0.0;
  std::vector<double> primal;
  std::vector<double> dual_eq;
  std::vector<double> dual_cone;
  double primal_residual = 0.0;  // max |Ax - b|, max cone shortfall
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  // Filled in by the formulation layer for DistFlow programs.
  double max_relaxation_gap = 0.0;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

/// Primal-dual interior-point method on the homogeneous self-dual embedding
/// with Nesterov-Todd scaling and Mehrotra correction. Infeasible and
/// unbounded programs terminate with a certificate-based status.
SolverReport solve(const ConicProgram& program, const SolverOptions& options = SolverOptions::from_environment());

}  // namespace gridshaper
