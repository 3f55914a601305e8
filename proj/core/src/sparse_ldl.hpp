#pragma once

#include <utility>
#include <vector>

namespace gridshaper::detail {

/// LDL' factorization for sparse symmetric quasi-definite matrices.
///
/// The pattern is fixed by analyze(); factorize() may be called repeatedly
/// with new values in the same entry order. Pivots whose sign disagrees with
/// the expected sign are replaced by a small value of the right sign, which
/// keeps the factorization usable near the end of an interior-point run.
class QuasiDefiniteLdl {
public:
  /// `entries` are (row, col) pairs of the upper triangle, duplicates allowed
  /// (values are summed). Every diagonal position must appear. `signs[i]` is
  /// +1 or -1, the expected sign of pivot i.
  void analyze(int n, const std::vector<std::pair<int, int>>& entries, std::vector<int> signs);

  /// `values[e]` belongs to entries[e]. `static_reg` is added with the pivot
  /// sign on every diagonal position. Returns the number of pivots that
  /// needed dynamic regularization.
  int factorize(const std::vector<double>& values, double static_reg, double dynamic_eps, double dynamic_delta);

  /// Solves in place, `rhs` in the original (unpermuted) ordering.
  void solve(std::vector<double>& rhs) const;

  int size() const { return n_; }
  long factor_nonzeros() const { return static_cast<long>(li_.size()); }

private:
  int n_ = 0;
  std::vector<int> old_of_new_;
  std::vector<int> new_of_old_;
  std::vector<int> signs_;  // permuted ordering

  // Permuted upper triangle in CSC form.
  std::vector<int> ap_;
  std::vector<int> ai_;
  std::vector<double> ax_;
  std::vector<int> entry_slot_;  // entries[e] -> position in ai_/ax_
  std::vector<int> diag_slot_;   // permuted column -> position of its diagonal

  // Factor.
  std::vector<int> lp_;
  std::vector<int> parent_;
  std::vector<int> lnz_;
  std::vector<int> li_;
  std::vector<double> lx_;
  std::vector<double> d_;

  // Workspace.
  std::vector<double> y_;
  std::vector<int> pattern_;
  std::vector<int> flag_;
  mutable std::vector<double> work_;
};

}  // namespace gridshaper::detail
