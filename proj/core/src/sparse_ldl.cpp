#include "sparse_ldl.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include <algorithm>
#include <stdexcept>

namespace gridshaper::detail {

void QuasiDefiniteLdl::analyze(int n, const std::vector<std::pair<int, int>>& entries, std::vector<int> signs) {
  if (static_cast<int>(signs.size()) != n) throw std::invalid_argument("ldl: sign vector size mismatch");
  n_ = n;

  // Fill-reducing ordering on the symmetric pattern.
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * entries.size());
  for (auto [r, c] : entries) {
    trip.emplace_back(r, c, 1.0);
    if (r != c) trip.emplace_back(c, r, 1.0);
  }
  Eigen::SparseMatrix<double, Eigen::ColMajor, int> pat(n, n);
  pat.setFromTriplets(trip.begin(), trip.end());
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
  Eigen::AMDOrdering<int> amd;
  amd(pat, pinv);

  old_of_new_.assign(pinv.indices().data(), pinv.indices().data() + n);
  new_of_old_.assign(n, 0);
  for (int k = 0; k < n; ++k) new_of_old_[old_of_new_[k]] = k;
  signs_.assign(n, 1);
  for (int k = 0; k < n; ++k) signs_[k] = signs[old_of_new_[k]];

  // Permuted upper triangle; each entry goes to column max(pi, pj).
  struct Pos {
    int row, col, entry;
  };
  std::vector<Pos> pos;
  pos.reserve(entries.size());
  for (int e = 0; e < static_cast<int>(entries.size()); ++e) {
    int a = new_of_old_[entries[e].first];
    int b = new_of_old_[entries[e].second];
    if (a > b) std::swap(a, b);
    pos.push_back({a, b, e});
  }
  std::sort(pos.begin(), pos.end(), [](const Pos& x, const Pos& y) {
    return x.col != y.col ? x.col < y.col : x.row < y.row;
  });

  ap_.assign(n + 1, 0);
  ai_.clear();
  entry_slot_.assign(entries.size(), -1);
  diag_slot_.assign(n, -1);
  int last_row = -1, last_col = -1;
  for (const auto& p : pos) {
    if (p.row != last_row || p.col != last_col) {
      ai_.push_back(p.row);
      ap_[p.col + 1]++;
      last_row = p.row;
      last_col = p.col;
      if (p.row == p.col) diag_slot_[p.col] = static_cast<int>(ai_.size()) - 1;
    }
    entry_slot_[p.entry] = static_cast<int>(ai_.size()) - 1;
  }
  for (int k = 0; k < n; ++k) {
    ap_[k + 1] += ap_[k];
    if (diag_slot_[k] < 0) throw std::invalid_argument("ldl: missing diagonal entry");
  }
  ax_.assign(ai_.size(), 0.0);

  // Elimination tree and column counts.
  lp_.assign(n + 1, 0);
  parent_.assign(n, -1);
  lnz_.assign(n, 0);
  flag_.assign(n, 0);
  for (int k = 0; k < n; ++k) {
    parent_[k] = -1;
    flag_[k] = k;
    lnz_[k] = 0;
    for (int p = ap_[k]; p < ap_[k + 1]; ++p) {
      int i = ai_[p];
      if (i < k) {
        for (; flag_[i] != k; i = parent_[i]) {
          if (parent_[i] == -1) parent_[i] = k;
          lnz_[i]++;
          flag_[i] = k;
        }
      }
    }
  }
  for (int k = 0; k < n; ++k) lp_[k + 1] = lp_[k] + lnz_[k];
  li_.assign(lp_[n], 0);
  lx_.assign(lp_[n], 0.0);
  d_.assign(n, 0.0);
  y_.assign(n, 0.0);
  pattern_.assign(n, 0);
  work_.assign(n, 0.0);
}

int QuasiDefiniteLdl::factorize(const std::vector<double>& values, double static_reg, double dynamic_eps,
                                double dynamic_delta) {
  std::fill(ax_.begin(), ax_.end(), 0.0);
  for (std::size_t e = 0; e < values.size(); ++e) ax_[entry_slot_[e]] += values[e];
  for (int k = 0; k < n_; ++k) ax_[diag_slot_[k]] += signs_[k] * static_reg;

  int bumped = 0;
  for (int k = 0; k < n_; ++k) {
    y_[k] = 0.0;
    int top = n_;
    flag_[k] = k;
    lnz_[k] = 0;
    for (int p = ap_[k]; p < ap_[k + 1]; ++p) {
      int i = ai_[p];
      y_[i] += ax_[p];
      int len = 0;
      for (; flag_[i] != k; i = parent_[i]) {
        pattern_[len++] = i;
        flag_[i] = k;
      }
      while (len > 0) pattern_[--top] = pattern_[--len];
    }
    d_[k] = y_[k];
    y_[k] = 0.0;
    for (; top < n_; ++top) {
      int i = pattern_[top];
      double yi = y_[i];
      y_[i] = 0.0;
      int p2 = lp_[i] + lnz_[i];
      for (int p = lp_[i]; p < p2; ++p) y_[li_[p]] -= lx_[p] * yi;
      double lki = yi / d_[i];
      d_[k] -= lki * yi;
      li_[p2] = k;
      lx_[p2] = lki;
      lnz_[i]++;
    }
    if (signs_[k] * d_[k] <= dynamic_eps) {
      d_[k] = signs_[k] * dynamic_delta;
      ++bumped;
    }
  }
  return bumped;
}

void QuasiDefiniteLdl::solve(std::vector<double>& rhs) const {
  auto& x = work_;
  for (int k = 0; k < n_; ++k) x[k] = rhs[old_of_new_[k]];
  for (int j = 0; j < n_; ++j) {
    const double xj = x[j];
    for (int p = lp_[j]; p < lp_[j] + lnz_[j]; ++p) x[li_[p]] -= lx_[p] * xj;
  }
  for (int j = 0; j < n_; ++j) x[j] /= d_[j];
  for (int j = n_ - 1; j >= 0; --j) {
    double acc = x[j];
    for (int p = lp_[j]; p < lp_[j] + lnz_[j]; ++p) acc -= lx_[p] * x[li_[p]];
    x[j] = acc;
  }
  for (int k = 0; k < n_; ++k) rhs[old_of_new_[k]] = x[k];
}

}  // namespace gridshaper::detail
