#include "gridshaper/socp.hpp"
#include "sparse_ldl.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

namespace gridshaper {
namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
constexpr double kInf = std::numeric_limits<double>::infinity();
// Looser tolerances accepted when the iteration stalls, as a multiple of the
// requested ones.
constexpr double kReducedAccuracyFactor = 100.0;
constexpr int kStallIterations = 8;

struct ConeLayout {
  int m = 0;
  int orthant = 0;
  std::vector<int> dims;
  std::vector<int> offsets;
  int degree = 0;

  explicit ConeLayout(const ConicProgram& prog) : orthant(prog.num_orthant()), dims(prog.cone_dims()) {
    int off = orthant;
    for (int d : dims) {
      offsets.push_back(off);
      off += d;
    }
    m = off;
    degree = orthant + static_cast<int>(dims.size());
  }
};

double soc_residual(const Vec& u, int off, int dim) {
  // factored form loses less to cancellation near the boundary
  const double head = u[off];
  const double tail = u.segment(off + 1, dim - 1).norm();
  return (head - tail) * (head + tail);
}

bool strictly_interior(const ConeLayout& K, const Vec& u) {
  for (int i = 0; i < K.orthant; ++i)
    if (!(u[i] > 0.0)) return false;
  for (std::size_t k = 0; k < K.dims.size(); ++k) {
    const int off = K.offsets[k];
    if (!(u[off] > 0.0) || !(soc_residual(u, off, K.dims[k]) > 0.0)) return false;
  }
  return true;
}

/// Jordan product u o v.
Vec jordan(const ConeLayout& K, const Vec& u, const Vec& v) {
  Vec out(K.m);
  out.head(K.orthant) = u.head(K.orthant).cwiseProduct(v.head(K.orthant));
  for (std::size_t k = 0; k < K.dims.size(); ++k) {
    const int off = K.offsets[k], d = K.dims[k];
    out[off] = u.segment(off, d).dot(v.segment(off, d));
    out.segment(off + 1, d - 1) = u[off] * v.segment(off + 1, d - 1) + v[off] * u.segment(off + 1, d - 1);
  }
  return out;
}

/// Solves lambda o x = v for x.
Vec jordan_solve(const ConeLayout& K, const Vec& lambda, const Vec& v) {
  Vec out(K.m);
  out.head(K.orthant) = v.head(K.orthant).cwiseQuotient(lambda.head(K.orthant));
  for (std::size_t k = 0; k < K.dims.size(); ++k) {
    const int off = K.offsets[k], d = K.dims[k];
    const double l0 = lambda[off];
    const auto l1 = lambda.segment(off + 1, d - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double x0 = (l0 * v[off] - l1.dot(v.segment(off + 1, d - 1))) / det;
    out[off] = x0;
    out.segment(off + 1, d - 1) = (v.segment(off + 1, d - 1) - x0 * l1) / l0;
  }
  return out;
}

Vec identity_element(const ConeLayout& K) {
  Vec e = Vec::Zero(K.m);
  e.head(K.orthant).setOnes();
  for (int off : K.offsets) e[off] = 1.0;
  return e;
}

/// Moves u into the interior: if u + a*e fails to be interior for a <= 0,
/// shifts by (1 + a_min) e.
void shift_into_cone(const ConeLayout& K, Vec& u) {
  double alpha = -kInf;  // smallest a with u + a e in K
  for (int i = 0; i < K.orthant; ++i) alpha = std::max(alpha, -u[i]);
  for (std::size_t k = 0; k < K.dims.size(); ++k) {
    const int off = K.offsets[k], d = K.dims[k];
    alpha = std::max(alpha, u.segment(off + 1, d - 1).norm() - u[off]);
  }
  if (K.m == 0) return;
  if (alpha >= -1e-8) u += (1.0 + std::max(alpha, 0.0)) * identity_element(K);
}

/// Largest alpha with u + alpha*d in K (u interior), capped at `cap`.
double max_step(const ConeLayout& K, const Vec& u, const Vec& d, double cap) {
  double alpha = cap;
  for (int i = 0; i < K.orthant; ++i) {
    if (d[i] < 0.0) alpha = std::min(alpha, -u[i] / d[i]);
  }
  for (std::size_t k = 0; k < K.dims.size(); ++k) {
    const int off = K.offsets[k], dim = K.dims[k];
    const auto u1 = u.segment(off + 1, dim - 1);
    const auto d1 = d.segment(off + 1, dim - 1);
    // f(a) = (u0 + a d0)^2 - ||u1 + a d1||^2 = qa a^2 + 2 qb a + qc
    const double qa = d[off] * d[off] - d1.squaredNorm();
    const double qb = u[off] * d[off] - u1.dot(d1);
    const double qc = std::max(u[off] * u[off] - u1.squaredNorm(), 0.0);
    double root = kInf;
    if (std::abs(qa) < 1e-300) {
      if (qb < 0.0) root = -qc / (2.0 * qb);
    } else {
      const double disc = qb * qb - qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double q = -(qb + std::copysign(sq, qb));
        for (double r : {q / qa, q != 0.0 ? qc / q : kInf}) {
          if (r > 0.0) root = std::min(root, r);
        }
      }
    }
    // Head must also stay positive.
    if (d[off] < 0.0) root = std::min(root, -u[off] / d[off]);
    alpha = std::min(alpha, root);
  }
  return alpha;
}

/// Nesterov-Todd scaling of one iterate.
struct Scaling {
  Vec orth_w;  // sqrt(s/z)
  std::vector<Eigen::MatrixXd> W, Winv, W2;

  bool compute(const ConeLayout& K, const Vec& s, const Vec& z) {
    orth_w.resize(K.orthant);
    for (int i = 0; i < K.orthant; ++i) {
      if (!(s[i] > 0.0) || !(z[i] > 0.0)) return false;
      orth_w[i] = std::sqrt(s[i] / z[i]);
    }
    W.resize(K.dims.size());
    Winv.resize(K.dims.size());
    W2.resize(K.dims.size());
    for (std::size_t k = 0; k < K.dims.size(); ++k) {
      const int off = K.offsets[k], d = K.dims[k];
      const double sres = soc_residual(s, off, d);
      const double zres = soc_residual(z, off, d);
      if (!(sres > 0.0) || !(zres > 0.0) || s[off] <= 0.0 || z[off] <= 0.0) return false;
      const double sn = std::sqrt(sres), zn = std::sqrt(zres);
      const Vec sb = s.segment(off, d) / sn;
      const Vec zb = z.segment(off, d) / zn;
      const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 0.0));
      // Scaling point wb (wb'J wb = 1), then W = eta * (2 v v' - J) with
      // v = (wb + e) / sqrt(2 (wb0 + 1)), so that W^2 = eta^2 (2 wb wb' - J).
      Vec wb(d);
      wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
      wb.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
      Vec v = wb;
      v[0] += 1.0;
      v /= std::sqrt(2.0 * (wb[0] + 1.0));
      const double eta = std::sqrt(sn / zn);
      Eigen::MatrixXd J = -Eigen::MatrixXd::Identity(d, d);
      J(0, 0) = 1.0;
      const Eigen::MatrixXd M = 2.0 * v * v.transpose() - J;
      const Vec Jv = J * v;
      W[k] = eta * M;
      Winv[k] = (1.0 / eta) * (2.0 * Jv * Jv.transpose() - J);
      W2[k] = W[k] * W[k];
    }
    return true;
  }

  Vec apply(const ConeLayout& K, const Vec& u) const {
    Vec out(K.m);
    out.head(K.orthant) = orth_w.cwiseProduct(u.head(K.orthant));
    for (std::size_t k = 0; k < K.dims.size(); ++k)
      out.segment(K.offsets[k], K.dims[k]) = W[k] * u.segment(K.offsets[k], K.dims[k]);
    return out;
  }
  Vec apply_inverse(const ConeLayout& K, const Vec& u) const {
    Vec out(K.m);
    out.head(K.orthant) = u.head(K.orthant).cwiseQuotient(orth_w);
    for (std::size_t k = 0; k < K.dims.size(); ++k)
      out.segment(K.offsets[k], K.dims[k]) = Winv[k] * u.segment(K.offsets[k], K.dims[k]);
    return out;
  }
  Vec apply_squared(const ConeLayout& K, const Vec& u) const {
    Vec out(K.m);
    out.head(K.orthant) = orth_w.cwiseAbs2().cwiseProduct(u.head(K.orthant));
    for (std::size_t k = 0; k < K.dims.size(); ++k)
      out.segment(K.offsets[k], K.dims[k]) = W2[k] * u.segment(K.offsets[k], K.dims[k]);
    return out;
  }

  void set_identity(const ConeLayout& K) {
    orth_w = Vec::Ones(K.orthant);
    W.clear();
    Winv.clear();
    W2.clear();
    for (int d : K.dims) {
      W.push_back(Eigen::MatrixXd::Identity(d, d));
      Winv.push_back(Eigen::MatrixXd::Identity(d, d));
      W2.push_back(Eigen::MatrixXd::Identity(d, d));
    }
  }
};

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

SpMat build_matrix(int rows, int cols, const std::vector<ConicProgram::Triplet>& trip) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(trip.size());
  for (const auto& e : trip) t.emplace_back(e.row, e.col, e.value);
  SpMat M(rows, cols);
  M.setFromTriplets(t.begin(), t.end());
  M.prune(0.0);
  return M;
}

/// Ruiz equilibration: scales columns by D, equality rows by E and cone rows
/// by F (constant across each second-order cone).
void equilibrate(const ConeLayout& K, SpMat& A, SpMat& G, Vec& D, Vec& E, Vec& F, int passes) {
  const int n = static_cast<int>(A.cols());
  D = Vec::Ones(n);
  E = Vec::Ones(A.rows());
  F = Vec::Ones(G.rows());
  auto clampf = [](double v) { return std::clamp(v, 1e-4, 1e4); };
  for (int pass = 0; pass < passes; ++pass) {
    Vec col = Vec::Zero(n), erow = Vec::Zero(A.rows()), grow = Vec::Zero(G.rows());
    for (int j = 0; j < n; ++j) {
      for (SpMat::InnerIterator it(A, j); it; ++it) {
        const double a = std::abs(it.value());
        col[j] = std::max(col[j], a);
        erow[it.row()] = std::max(erow[it.row()], a);
      }
      for (SpMat::InnerIterator it(G, j); it; ++it) {
        const double a = std::abs(it.value());
        col[j] = std::max(col[j], a);
        grow[it.row()] = std::max(grow[it.row()], a);
      }
    }
    for (std::size_t k = 0; k < K.dims.size(); ++k) {
      const int off = K.offsets[k], d = K.dims[k];
      const double mx = grow.segment(off, d).maxCoeff();
      grow.segment(off, d).setConstant(mx);
    }
    Vec dj(n), ei(A.rows()), fi(G.rows());
    for (int j = 0; j < n; ++j) dj[j] = col[j] > 0 ? 1.0 / std::sqrt(col[j]) : 1.0;
    for (int i = 0; i < A.rows(); ++i) ei[i] = erow[i] > 0 ? 1.0 / std::sqrt(erow[i]) : 1.0;
    for (int i = 0; i < G.rows(); ++i) fi[i] = grow[i] > 0 ? 1.0 / std::sqrt(grow[i]) : 1.0;
    for (int j = 0; j < n; ++j) {
      const double nd = clampf(D[j] * dj[j]);
      dj[j] = nd / D[j];
      D[j] = nd;
    }
    for (int i = 0; i < A.rows(); ++i) {
      const double ne = clampf(E[i] * ei[i]);
      ei[i] = ne / E[i];
      E[i] = ne;
    }
    for (int i = 0; i < G.rows(); ++i) {
      const double nf = clampf(F[i] * fi[i]);
      fi[i] = nf / F[i];
      F[i] = nf;
    }
    for (int j = 0; j < n; ++j) {
      for (SpMat::InnerIterator it(A, j); it; ++it) it.valueRef() *= ei[it.row()] * dj[j];
      for (SpMat::InnerIterator it(G, j); it; ++it) it.valueRef() *= fi[it.row()] * dj[j];
    }
  }
}

class InteriorPointSolver {
public:
  InteriorPointSolver(const ConicProgram& prog, const SolverOptions& opts) : prog_(prog), opts_(opts), K_(prog) {}

  SolverReport run();

private:
  struct Direction {
    Vec dx, dy, dz, ds;
    double dtau = 0.0, dkappa = 0.0;
  };

  void setup();
  void assemble_values();
  bool factorize();
  Vec kkt_multiply(const Vec& v) const;
  Vec kkt_solve(const Vec& rhs) const;
  Direction direction(double sigma, const Vec& xi_s, double xi_tau) const;

  const ConicProgram& prog_;
  SolverOptions opts_;
  ConeLayout K_;
  int n_ = 0, p_ = 0, m_ = 0;

  // Original data.
  SpMat A0_, G0_;
  Vec c0_, b0_, h0_;
  // Equilibrated data.
  SpMat A_, G_;
  SpMat At_, Gt_;
  Vec c_, b_, h_;
  Vec D_, E_, F_;

  // KKT structure.
  detail::QuasiDefiniteLdl ldl_;
  std::vector<std::pair<int, int>> entries_;
  std::vector<double> values_;
  std::vector<int> soc_entry_start_;  // first off-diagonal entry of each cone

  Scaling W_;
  // Current iterate and residual pieces used by direction().
  Vec x_, y_, z_, s_, lambda_;
  double tau_ = 1.0, kappa_ = 1.0;
  Vec rx_, ry_, rz_;
  double rt_ = 0.0;
  Vec x1_, y1_, z1_;
};

void InteriorPointSolver::setup() {
  n_ = prog_.num_vars();
  p_ = prog_.num_equalities();
  m_ = K_.m;
  A0_ = build_matrix(p_, n_, prog_.equality_triplets());
  G0_ = build_matrix(m_, n_, prog_.cone_matrix_triplets());
  c0_ = Eigen::Map<const Vec>(prog_.objective().data(), n_);
  b0_ = Eigen::Map<const Vec>(prog_.equality_rhs().data(), p_);
  const auto h = prog_.cone_rhs();
  h0_ = Eigen::Map<const Vec>(h.data(), m_);

  A_ = A0_;
  G_ = G0_;
  equilibrate(K_, A_, G_, D_, E_, F_, opts_.equilibration_passes);
  c_ = D_.cwiseProduct(c0_);
  b_ = E_.cwiseProduct(b0_);
  h_ = F_.cwiseProduct(h0_);
  At_ = A_.transpose();
  Gt_ = G_.transpose();

  const int N = n_ + p_ + m_;
  entries_.clear();
  for (int i = 0; i < N; ++i) entries_.emplace_back(i, i);
  values_.assign(N, 0.0);
  for (int j = 0; j < n_; ++j) {
    for (SpMat::InnerIterator it(A_, j); it; ++it) {
      entries_.emplace_back(j, n_ + static_cast<int>(it.row()));
      values_.push_back(it.value());
    }
    for (SpMat::InnerIterator it(G_, j); it; ++it) {
      entries_.emplace_back(j, n_ + p_ + static_cast<int>(it.row()));
      values_.push_back(it.value());
    }
  }
  soc_entry_start_.clear();
  for (std::size_t k = 0; k < K_.dims.size(); ++k) {
    soc_entry_start_.push_back(static_cast<int>(entries_.size()));
    const int base = n_ + p_ + K_.offsets[k];
    for (int a = 0; a < K_.dims[k]; ++a)
      for (int b = a + 1; b < K_.dims[k]; ++b) {
        entries_.emplace_back(base + a, base + b);
        values_.push_back(0.0);
      }
  }
  std::vector<int> signs(N, -1);
  for (int j = 0; j < n_; ++j) signs[j] = 1;
  ldl_.analyze(N, entries_, signs);
}

void InteriorPointSolver::assemble_values() {
  for (int j = 0; j < n_ + p_; ++j) values_[j] = 0.0;
  const int zb = n_ + p_;
  for (int i = 0; i < K_.orthant; ++i) values_[zb + i] = -W_.orth_w[i] * W_.orth_w[i];
  for (std::size_t k = 0; k < K_.dims.size(); ++k) {
    const int off = K_.offsets[k], d = K_.dims[k];
    int e = soc_entry_start_[k];
    for (int a = 0; a < d; ++a) {
      values_[zb + off + a] = -W_.W2[k](a, a);
      for (int b = a + 1; b < d; ++b) values_[e++] = -W_.W2[k](a, b);
    }
  }
}

bool InteriorPointSolver::factorize() {
  assemble_values();
  ldl_.factorize(values_, opts_.static_regularization, opts_.dynamic_regularization, 1e-7);
  return true;
}

Vec InteriorPointSolver::kkt_multiply(const Vec& v) const {
  Vec out(n_ + p_ + m_);
  const auto vx = v.head(n_);
  const auto vy = v.segment(n_, p_);
  const auto vz = v.tail(m_);
  out.head(n_) = At_ * vy + Gt_ * vz;
  out.segment(n_, p_) = A_ * vx;
  out.tail(m_) = G_ * vx - W_.apply_squared(K_, vz);
  return out;
}

Vec InteriorPointSolver::kkt_solve(const Vec& rhs) const {
  std::vector<double> buf(rhs.data(), rhs.data() + rhs.size());
  ldl_.solve(buf);
  Vec sol = Eigen::Map<Vec>(buf.data(), buf.size());
  const double scale = 1.0 + inf_norm(rhs);
  Vec err = rhs - kkt_multiply(sol);
  double err_norm = inf_norm(err);
  for (int it = 0; it < opts_.max_refinement_steps && err_norm > 1e-14 * scale; ++it) {
    std::vector<double> e(err.data(), err.data() + err.size());
    ldl_.solve(e);
    const Vec next = sol + Eigen::Map<Vec>(e.data(), e.size());
    Vec next_err = rhs - kkt_multiply(next);
    const double next_norm = inf_norm(next_err);
    if (!(next_norm < err_norm)) break;  // refinement stopped helping
    sol = next;
    err = std::move(next_err);
    const bool slow = next_norm > 0.9 * err_norm;
    err_norm = next_norm;
    if (slow) break;
  }
  return sol;
}

InteriorPointSolver::Direction InteriorPointSolver::direction(double sigma, const Vec& xi_s, double xi_tau) const {
  const double f = 1.0 - sigma;
  const Vec t = jordan_solve(K_, lambda_, xi_s);
  const Vec Wt = W_.apply(K_, t);
  Vec rhs(n_ + p_ + m_);
  rhs.head(n_) = -f * rx_;
  rhs.segment(n_, p_) = -f * ry_;
  rhs.tail(m_) = -f * rz_ - Wt;
  const Vec sol = kkt_solve(rhs);
  const Vec x2 = sol.head(n_), y2 = sol.segment(n_, p_), z2 = sol.tail(m_);

  const double denom = kappa_ / tau_ - (c_.dot(x1_) + b_.dot(y1_) + h_.dot(z1_));
  const double numer = f * rt_ + c_.dot(x2) + b_.dot(y2) + h_.dot(z2) + xi_tau / tau_;
  Direction d;
  d.dtau = numer / denom;
  d.dx = x2 + d.dtau * x1_;
  d.dy = y2 + d.dtau * y1_;
  d.dz = z2 + d.dtau * z1_;
  d.ds = Wt - W_.apply_squared(K_, d.dz);
  d.dkappa = (xi_tau - kappa_ * d.dtau) / tau_;
  return d;
}

SolverReport InteriorPointSolver::run() {
  SolverReport rep;
  setup();

  std::ostringstream dims;
  dims << "(vars=" << n_ << ", equalities=" << p_ << ", orthant=" << K_.orthant << ", cones=" << K_.dims.size()
       << ")";

  // Initial point from two least-squares style systems with W = I.
  W_.set_identity(K_);
  factorize();
  {
    Vec rhs = Vec::Zero(n_ + p_ + m_);
    rhs.segment(n_, p_) = b_;
    rhs.tail(m_) = h_;
    const Vec sol = kkt_solve(rhs);
    x_ = sol.head(n_);
    s_ = -sol.tail(m_);
    shift_into_cone(K_, s_);
  }
  {
    Vec rhs = Vec::Zero(n_ + p_ + m_);
    rhs.head(n_) = -c_;
    const Vec sol = kkt_solve(rhs);
    y_ = sol.segment(n_, p_);
    z_ = sol.tail(m_);
    shift_into_cone(K_, z_);
  }
  tau_ = 1.0;
  kappa_ = 1.0;

  const double bnorm = inf_norm(b0_), hnorm = inf_norm(h0_), cnorm = inf_norm(c0_);
  const Vec e = identity_element(K_);
  double best_pres = kInf, best_dres = kInf;
  std::optional<SolverReport> fallback;
  int since_progress = 0;
  auto reduced = [&](const std::string& why) {
    SolverReport r = std::move(*fallback);
    r.message = "optimal at reduced accuracy (" + why + ") " + dims.str();
    return r;
  };

  for (int iter = 0; iter <= opts_.max_iterations; ++iter) {
    rep.iterations = iter;
    rx_ = At_ * y_ + Gt_ * z_ + tau_ * c_;
    ry_ = A_ * x_ - tau_ * b_;
    rz_ = s_ + G_ * x_ - tau_ * h_;
    rt_ = kappa_ + c_.dot(x_) + b_.dot(y_) + h_.dot(z_);

    // Unscaled quantities.
    const Vec xx = D_.cwiseProduct(x_);
    const Vec yy = E_.cwiseProduct(y_);
    const Vec zz = F_.cwiseProduct(z_);
    const Vec ss = s_.cwiseQuotient(F_);
    const Vec xu = xx / tau_, yu = yy / tau_, zu = zz / tau_, su = ss / tau_;
    const double pres = std::max(p_ ? inf_norm(A0_ * xu - b0_) / (1.0 + bnorm) : 0.0,
                                 m_ ? inf_norm(G0_ * xu + su - h0_) / (1.0 + hnorm) : 0.0);
    const double dres = inf_norm(A0_.transpose() * yu + G0_.transpose() * zu + c0_) / (1.0 + cnorm);
    const double pcost = c0_.dot(xu);
    const double dcost = -b0_.dot(yu) - h0_.dot(zu);
    const double gap = su.dot(zu);
    best_pres = std::min(best_pres, pres);
    best_dres = std::min(best_dres, dres);

    if (opts_.verbose) {
      std::cerr << "it " << iter << " pcost " << pcost << " dcost " << dcost << " gap " << gap << " pres " << pres
                << " dres " << dres << " tau " << tau_ << " kappa " << kappa_ << "\n";
    }

    const double cost_scale = std::min(std::abs(pcost), std::abs(dcost));
    const double gap_tol = std::max(opts_.abstol, opts_.reltol * cost_scale);
    auto fill = [&](SolverReport& r) {
      r.status = SolveStatus::Optimal;
      r.iterations = iter;
      r.primal.assign(xu.data(), xu.data() + n_);
      r.dual_eq.assign(yu.data(), yu.data() + p_);
      r.dual_cone.assign(zu.data(), zu.data() + m_);
      r.objective = pcost + prog_.objective_offset();
      r.primal_residual = prog_.max_violation(r.primal);
      r.dual_residual = dres * (1.0 + cnorm);
      r.duality_gap = gap;
    };
    if (pres <= opts_.feastol && dres <= opts_.feastol && std::abs(gap) <= gap_tol) {
      fill(rep);
      rep.message = "optimal " + dims.str();
      return rep;
    }
    // remember the best iterate within the looser tolerances in case the
    // method stalls before reaching the requested ones
    const double loose = kReducedAccuracyFactor;
    if (pres <= loose * opts_.feastol && dres <= loose * opts_.feastol &&
        std::abs(gap) <= std::max(loose * opts_.abstol, loose * opts_.reltol * cost_scale) &&
        (!fallback || std::abs(gap) < fallback->duality_gap)) {
      if (!fallback || std::abs(gap) < 0.5 * fallback->duality_gap) since_progress = 0;
      fallback.emplace();
      fill(*fallback);
    }
    if (fallback && ++since_progress > kStallIterations) return reduced("stalled");

    const double byhz = b0_.dot(yy) + h0_.dot(zz);
    if (byhz < 0.0) {
      const double pinf = inf_norm(A0_.transpose() * yy + G0_.transpose() * zz) / -byhz;
      if (pinf <= opts_.feastol) {
        rep.status = SolveStatus::Infeasible;
        rep.message = "primal infeasibility certificate found " + dims.str();
        return rep;
      }
    }
    const double cx = c0_.dot(xx);
    if (cx < 0.0) {
      const double dinf = std::max(p_ ? inf_norm(A0_ * xx) : 0.0, m_ ? inf_norm(G0_ * xx + ss) : 0.0) / -cx;
      if (dinf <= opts_.feastol) {
        rep.status = SolveStatus::Unbounded;
        rep.message = "dual infeasibility certificate found " + dims.str();
        return rep;
      }
    }
    if (iter == opts_.max_iterations) break;

    if (!W_.compute(K_, s_, z_)) {
      if (fallback) return reduced("iterate left the cone");
      rep.message = "iterate left the cone at iteration " + std::to_string(iter) + " " + dims.str();
      return rep;
    }
    lambda_ = W_.apply(K_, z_);
    factorize();
    {
      Vec rhs(n_ + p_ + m_);
      rhs.head(n_) = -c_;
      rhs.segment(n_, p_) = b_;
      rhs.tail(m_) = h_;
      const Vec sol = kkt_solve(rhs);
      x1_ = sol.head(n_);
      y1_ = sol.segment(n_, p_);
      z1_ = sol.tail(m_);
    }

    const double mu = (s_.dot(z_) + tau_ * kappa_) / (K_.degree + 1);
    const Vec lam_sq = jordan(K_, lambda_, lambda_);

    // Predictor.
    const Direction aff = direction(0.0, -lam_sq, -tau_ * kappa_);
    double a_aff = std::min(max_step(K_, s_, aff.ds, 1.0), max_step(K_, z_, aff.dz, 1.0));
    if (aff.dtau < 0.0) a_aff = std::min(a_aff, -tau_ / aff.dtau);
    if (aff.dkappa < 0.0) a_aff = std::min(a_aff, -kappa_ / aff.dkappa);
    const double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 0.0, 1.0);

    // Corrector.
    const Vec corr = jordan(K_, W_.apply_inverse(K_, aff.ds), W_.apply(K_, aff.dz));
    const Vec xi_s = -lam_sq - corr + sigma * mu * e;
    const double xi_tau = -tau_ * kappa_ - aff.dtau * aff.dkappa + sigma * mu;
    const Direction d = direction(sigma, xi_s, xi_tau);

    double amax = std::min(max_step(K_, s_, d.ds, kInf), max_step(K_, z_, d.dz, kInf));
    if (d.dtau < 0.0) amax = std::min(amax, -tau_ / d.dtau);
    if (d.dkappa < 0.0) amax = std::min(amax, -kappa_ / d.dkappa);
    const double alpha = std::min(1.0, opts_.step_fraction * amax);
    if (!std::isfinite(alpha) || alpha < 1e-12 || !d.dx.allFinite()) {
      if (fallback) return reduced("step length collapsed");
      rep.message = "step length collapsed at iteration " + std::to_string(iter) + " " + dims.str();
      return rep;
    }
    // rounding can still put the new point on the boundary; back off until
    // the scaling is computable there
    double step = alpha;
    bool inside = false;
    for (int back = 0; back < 30 && !inside; ++back) {
      inside = strictly_interior(K_, s_ + step * d.ds) && strictly_interior(K_, z_ + step * d.dz);
      if (!inside) step *= 0.5;
    }
    if (!inside) {
      if (fallback) return reduced("step length collapsed");
      rep.message = "step length collapsed at iteration " + std::to_string(iter) + " " + dims.str();
      return rep;
    }
    x_ += step * d.dx;
    y_ += step * d.dy;
    z_ += step * d.dz;
    s_ += step * d.ds;
    tau_ += step * d.dtau;
    kappa_ += step * d.dkappa;

    // Keep the embedding well scaled.
    const double scale = std::max({tau_, kappa_, 1e-300});
    if (scale > 1e8 || scale < 1e-8) {
      x_ /= scale;
      y_ /= scale;
      z_ /= scale;
      s_ /= scale;
      tau_ /= scale;
      kappa_ /= scale;
    }
  }
  if (fallback) return reduced("iteration limit");
  std::ostringstream msg;
  msg << "iteration limit reached (best primal residual " << best_pres << ", dual residual " << best_dres << ") "
      << dims.str();
  rep.message = msg.str();
  return rep;
}

}  // namespace

SolverReport solve(const ConicProgram& program, const SolverOptions& options) {
  InteriorPointSolver solver(program, options);
  return solver.run();
}

}  // namespace gridshaper
