#include "nematic/solvers.hpp"

#include <cmath>

#include "nematic/errors.hpp"

namespace nematic {

namespace {

// plain mean: keeps residuals in the range of a symmetric operator whose
// kernel is the constants
void project_range(Eigen::VectorXd& x) { x.array() -= x.mean(); }

// weighted mean: selects the lumped-mean-zero representative of the solution
void project_constants(Eigen::VectorXd& x, const Eigen::VectorXd* w) {
  if (w) {
    double mean = w->dot(x) / w->sum();
    x.array() -= mean;
  } else {
    x.array() -= x.mean();
  }
}

}  // namespace

Ilu0::Ilu0(const SparseMatrix& A) : lu_(A) {
  const int n = A.n_rows();
  diag_pos_.assign(n, -1);
  for (int i = 0; i < n; ++i)
    for (int k = lu_.row_begin(i); k < lu_.row_end(i); ++k)
      if (lu_.col(k) == i) diag_pos_[i] = k;
  // IKJ variant restricted to the sparsity pattern
  std::vector<int> col_pos(n, -1);
  for (int i = 0; i < n; ++i) {
    for (int k = lu_.row_begin(i); k < lu_.row_end(i); ++k) col_pos[lu_.col(k)] = k;
    for (int k = lu_.row_begin(i); k < lu_.row_end(i); ++k) {
      int j = lu_.col(k);
      if (j >= i) break;
      double piv = lu_.value(diag_pos_[j]);
      if (piv == 0.0) piv = 1e-300;
      double lij = lu_.value(k) / piv;
      lu_.value(k) = lij;
      for (int kk = diag_pos_[j] + 1; kk < lu_.row_end(j); ++kk) {
        int pos = col_pos[lu_.col(kk)];
        if (pos >= 0) lu_.value(pos) -= lij * lu_.value(kk);
      }
    }
    for (int k = lu_.row_begin(i); k < lu_.row_end(i); ++k) col_pos[lu_.col(k)] = -1;
  }
}

Eigen::VectorXd Ilu0::solve(const Eigen::VectorXd& r) const {
  const int n = lu_.n_rows();
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double s = r[i];
    for (int k = lu_.row_begin(i); k < lu_.row_end(i) && lu_.col(k) < i; ++k)
      s -= lu_.value(k) * y[lu_.col(k)];
    y[i] = s;
  }
  Eigen::VectorXd x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = lu_.row_end(i) - 1; k >= lu_.row_begin(i) && lu_.col(k) > i; --k)
      s -= lu_.value(k) * x[lu_.col(k)];
    double piv = lu_.value(diag_pos_[i]);
    if (piv == 0.0) piv = 1e-300;
    x[i] = s / piv;
  }
  return x;
}

Ic0::Ic0(const SparseMatrix& A, double shift) {
  const int n = A.n_rows();
  row_ptr_.assign(n + 1, 0);
  diag_.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int k = A.row_begin(i); k < A.row_end(i); ++k)
      if (A.col(k) < i) ++row_ptr_[i + 1];
  }
  for (int i = 0; i < n; ++i) row_ptr_[i + 1] += row_ptr_[i];
  cols_.resize(row_ptr_[n]);
  val_.resize(row_ptr_[n]);
  {
    std::vector<int> fill(n, 0);
    for (int i = 0; i < n; ++i)
      for (int k = A.row_begin(i); k < A.row_end(i); ++k)
        if (A.col(k) < i) {
          int pos = row_ptr_[i] + fill[i]++;
          cols_[pos] = A.col(k);
          val_[pos] = A.value(k);
        }
  }
  Eigen::VectorXd adiag = A.diagonal_vector() * (1.0 + shift);

  std::vector<int> col_pos(n, -1);
  for (int i = 0; i < n; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) col_pos[cols_[k]] = k;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      int j = cols_[k];
      double s = val_[k];
      for (int kk = row_ptr_[j]; kk < row_ptr_[j + 1]; ++kk) {
        int pos = col_pos[cols_[kk]];
        if (pos >= 0 && pos < k) s -= val_[pos] * val_[kk];
      }
      val_[k] = s / diag_[j];
    }
    double s = adiag[i];
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s -= val_[k] * val_[k];
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) col_pos[cols_[k]] = -1;
    if (!(s > 0.0)) {
      ok_ = false;
      return;
    }
    diag_[i] = std::sqrt(s);
  }
  ok_ = true;
}

Eigen::VectorXd Ic0::solve(const Eigen::VectorXd& r) const {
  const int n = static_cast<int>(diag_.size());
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double s = r[i];
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s -= val_[k] * y[cols_[k]];
    y[i] = s / diag_[i];
  }
  Eigen::VectorXd x = y;
  for (int i = n - 1; i >= 0; --i) {
    x[i] /= diag_[i];
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) x[cols_[k]] -= val_[k] * x[i];
  }
  return x;
}

SolveResult solve_spd(const SparseMatrix& A, const Eigen::VectorXd& b, double tol,
                      Nullspace nullspace, const SpdOptions& opts) {
  const int n = A.n_rows();
  const bool project = nullspace == Nullspace::constants;
  const Eigen::VectorXd* w = opts.weights;

  Eigen::VectorXd rhs = b;
  if (project) project_range(rhs);
  double bnorm = rhs.norm();
  if (bnorm == 0.0) return {Eigen::VectorXd::Zero(n), 0, 0.0};

  Eigen::VectorXd x = opts.x0 ? *opts.x0 : Eigen::VectorXd::Zero(n);

  std::optional<Ic0> ic_local;
  const Ic0* ic = nullptr;
  if (opts.cached_ic0 && opts.cached_ic0->ok()) {
    ic = opts.cached_ic0;
  } else if (opts.use_ic0) {
    // a singular system breaks the exact factorization or leaves a useless
    // tiny pivot; a diagonal shift keeps it a valid preconditioner
    std::vector<double> shifts = project ? std::vector<double>{1e-8, 1e-6, 1e-4, 1e-2}
                                         : std::vector<double>{0.0, 1e-8, 1e-4, 1e-2};
    for (double shift : shifts) {
      ic_local.emplace(A, shift);
      if (ic_local->ok()) {
        ic = &*ic_local;
        break;
      }
    }
  }
  Eigen::VectorXd inv_diag;
  if (!ic) {
    inv_diag = A.diagonal_vector();
    for (int i = 0; i < n; ++i) inv_diag[i] = inv_diag[i] != 0.0 ? 1.0 / inv_diag[i] : 1.0;
  }
  auto precond = [&](const Eigen::VectorXd& r) {
    Eigen::VectorXd z = ic ? ic->solve(r) : (inv_diag.array() * r.array()).matrix();
    if (project) project_range(z);
    return z;
  };

  Eigen::VectorXd r = rhs - A.apply(x);
  if (project) project_range(r);
  if (r.norm() <= tol * bnorm) {
    if (project) project_constants(x, w);
    return {x, 0, r.norm() / bnorm};
  }

  Eigen::VectorXd z = precond(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : 10 * n;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd Ap = A.apply(p);
    if (project) project_range(Ap);
    double pAp = p.dot(Ap);
    if (pAp <= 0.0) throw NoConvergence("solve_spd (indefinite direction)", it, r.norm() / bnorm);
    double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    if (r.norm() <= tol * bnorm) {
      if (project) project_constants(x, w);
      return {x, it, r.norm() / bnorm};
    }
    z = precond(r);
    double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw NoConvergence("solve_spd", max_iter, r.norm() / bnorm);
}

namespace {

// restarted GMRES with the same ILU(0) preconditioner; fallback path for
// systems on which the short BiCGStab recurrences stagnate
SolveResult gmres_ilu(const SparseMatrix& A, const Ilu0& ilu, const Eigen::VectorXd& b,
                      double tol, const Eigen::VectorXd* x0, int max_total) {
  const int n = A.n_rows();
  const int restart = std::min(200, n);
  double bnorm = b.norm();
  Eigen::VectorXd x = x0 ? *x0 : Eigen::VectorXd::Zero(n);
  int total = 0;
  double relres = 1.0;
  while (total < max_total) {
    Eigen::VectorXd r = ilu.solve(b - A.apply(x));
    double beta = r.norm();
    double bprec = ilu.solve(b).norm();
    if (bprec == 0.0) bprec = bnorm;
    if (beta <= tol * bprec) {
      Eigen::VectorXd true_r = b - A.apply(x);
      relres = true_r.norm() / bnorm;
      if (relres <= tol) return {x, total, relres};
    }
    Eigen::MatrixXd V(n, restart + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
    std::vector<double> cs(restart), sn(restart);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(restart + 1);
    V.col(0) = r / beta;
    g[0] = beta;
    int m = 0;
    for (int j = 0; j < restart && total < max_total; ++j, ++total) {
      Eigen::VectorXd w = ilu.solve(A.apply(V.col(j)));
      for (int i = 0; i <= j; ++i) {
        H(i, j) = w.dot(V.col(i));
        w -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = w.norm();
      if (H(j + 1, j) > 0.0) V.col(j + 1) = w / H(j + 1, j);
      for (int i = 0; i < j; ++i) {
        double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      double denom = std::hypot(H(j, j), H(j + 1, j));
      cs[j] = denom > 0 ? H(j, j) / denom : 1.0;
      sn[j] = denom > 0 ? H(j + 1, j) / denom : 0.0;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      m = j + 1;
      if (std::abs(g[j + 1]) <= 0.1 * tol * bprec) break;
    }
    Eigen::VectorXd y = H.topLeftCorner(m, m).triangularView<Eigen::Upper>().solve(g.head(m));
    x += V.leftCols(m) * y;
    Eigen::VectorXd true_r = b - A.apply(x);
    relres = true_r.norm() / bnorm;
    if (relres <= tol) return {x, total, relres};
  }
  return {x, -1, relres};  // caller decides
}

}  // namespace

SolveResult solve_nonsymmetric(const SparseMatrix& A, const Eigen::VectorXd& b, double tol,
                               const NonsymOptions& opts) {
  const int n = A.n_rows();
  double bnorm = b.norm();
  if (bnorm == 0.0) return {Eigen::VectorXd::Zero(n), 0, 0.0};

  Ilu0 ilu(A);
  Eigen::VectorXd x = opts.x0 ? *opts.x0 : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = b - A.apply(x);
  if (r.norm() <= tol * bnorm) return {x, 0, r.norm() / bnorm};

  Eigen::VectorXd r_hat = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : 10 * n;
  for (int it = 1; it <= max_iter; ++it) {
    double rho_new = r_hat.dot(r);
    if (std::abs(rho_new) < 1e-300) {
      // restart with the current residual as the shadow vector
      r_hat = r;
      rho_new = r.squaredNorm();
      p.setZero();
      v.setZero();
      rho = 1.0;
      alpha = 1.0;
      omega = 1.0;
    }
    double beta = (rho_new / rho) * (alpha / omega);
    p = r + beta * (p - omega * v);
    Eigen::VectorXd y = ilu.solve(p);
    v = A.apply(y);
    double rhv = r_hat.dot(v);
    if (std::abs(rhv) < 1e-300) throw NoConvergence("solve_nonsymmetric (breakdown)", it, r.norm() / bnorm);
    alpha = rho_new / rhv;
    Eigen::VectorXd s = r - alpha * v;
    if (s.norm() <= tol * bnorm) {
      x += alpha * y;
      return {x, it, s.norm() / bnorm};
    }
    Eigen::VectorXd z = ilu.solve(s);
    Eigen::VectorXd t = A.apply(z);
    double tt = t.squaredNorm();
    omega = tt > 0.0 ? t.dot(s) / tt : 0.0;
    x += alpha * y + omega * z;
    r = s - omega * t;
    if (r.norm() <= tol * bnorm) return {x, it, r.norm() / bnorm};
    if (omega == 0.0) throw NoConvergence("solve_nonsymmetric (omega breakdown)", it, r.norm() / bnorm);
    rho = rho_new;
  }
  throw NoConvergence("solve_nonsymmetric", max_iter, r.norm() / bnorm);
}

SaddleResult solve_saddle(const SparseMatrix& A, const SparseMatrix& B, const Eigen::VectorXd& f,
                          double tol, const SaddleOptions& opts) {
  const int np = B.n_rows();
  const Eigen::VectorXd* w = opts.pressure_weights;

  Eigen::VectorXd g = opts.g ? *opts.g : Eigen::VectorXd::Zero(np);
  if (f.norm() == 0.0 && g.norm() == 0.0)
    return {Eigen::VectorXd::Zero(A.n_rows()), Eigen::VectorXd::Zero(np), 0, 0.0};

  std::optional<Ic0> ic_local;
  const Ic0* ic = opts.cached_ic0;
  if (!ic) {
    ic_local.emplace(A);
    if (ic_local->ok()) ic = &*ic_local;
  }
  auto solve_A = [&](const Eigen::VectorXd& rhs) {
    SpdOptions io;
    io.cached_ic0 = ic;
    SolveResult res = solve_spd(A, rhs, opts.inner_tol, Nullspace::none, io);
    return res.x;
  };

  auto schur_apply = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd wvec = solve_A(B.apply_transpose(p));
    Eigen::VectorXd out = B.apply(wvec);
    if (opts.C) out += opts.C->apply(p);
    return out;
  };

  // Schur system: S p = B A^{-1} f - g
  Eigen::VectorXd uf = solve_A(f);
  Eigen::VectorXd rhs = B.apply(uf) - g;
  project_range(rhs);

  Eigen::VectorXd p = opts.p0 ? *opts.p0 : Eigen::VectorXd::Zero(np);

  Eigen::VectorXd r = rhs - schur_apply(p);
  project_range(r);
  const int max_outer = opts.max_outer > 0 ? opts.max_outer : 10 * np;
  int it = 0;
  if (r.lpNorm<Eigen::Infinity>() > tol) {
    Eigen::VectorXd d = r;
    double rr = r.squaredNorm();
    for (it = 1; it <= max_outer; ++it) {
      Eigen::VectorXd Sd = schur_apply(d);
      project_range(Sd);
      double dSd = d.dot(Sd);
      if (!(dSd > 0.0)) throw NoConvergence("solve_saddle (schur)", it, r.lpNorm<Eigen::Infinity>());
      double alpha = rr / dSd;
      p += alpha * d;
      r -= alpha * Sd;
      if (r.lpNorm<Eigen::Infinity>() <= tol) break;
      double rr_new = r.squaredNorm();
      d = r + (rr_new / rr) * d;
      rr = rr_new;
    }
    if (it > max_outer) throw NoConvergence("solve_saddle", max_outer, r.lpNorm<Eigen::Infinity>());
  }
  project_constants(p, w);

  Eigen::VectorXd u = solve_A(f - B.apply_transpose(p));
  Eigen::VectorXd div = B.apply(u) - g;
  if (opts.C) div -= opts.C->apply(p);
  return {u, p, it, div.lpNorm<Eigen::Infinity>()};
}

}  // namespace nematic
