#pragma once

#include <Eigen/Dense>
#include <optional>

#include "nematic/sparse.hpp"

namespace nematic {

enum class Nullspace { none, constants };

struct SolveResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual = 0.0;  // relative
};

class Ic0;

struct SpdOptions {
  const Eigen::VectorXd* x0 = nullptr;
  /// weights of the lumped inner product used to project out constants
  const Eigen::VectorXd* weights = nullptr;
  int max_iterations = -1;  // default 10 * n
  bool use_ic0 = true;      // fall back to Jacobi on breakdown
  const Ic0* cached_ic0 = nullptr;  // reuse a factorization of A
};

/// Preconditioned CG. With Nullspace::constants the iterates are kept in the
/// weighted-mean-zero subspace and the returned solution has zero lumped mean.
SolveResult solve_spd(const SparseMatrix& A, const Eigen::VectorXd& b, double tol,
                      Nullspace nullspace = Nullspace::none, const SpdOptions& opts = {});

struct NonsymOptions {
  const Eigen::VectorXd* x0 = nullptr;
  int max_iterations = -1;
};

/// ILU(0)-preconditioned BiCGStab.
SolveResult solve_nonsymmetric(const SparseMatrix& A, const Eigen::VectorXd& b, double tol,
                               const NonsymOptions& opts = {});

struct SaddleResult {
  Eigen::VectorXd u;
  Eigen::VectorXd p;
  int outer_iterations = 0;
  double divergence_inf = 0.0;  // max_l |(B u - C p - g)_l|
};

struct SaddleOptions {
  const SparseMatrix* C = nullptr;        // pressure stabilization block (SPD)
  const Eigen::VectorXd* g = nullptr;     // pressure right-hand side
  const Eigen::VectorXd* p0 = nullptr;    // warm start
  const Eigen::VectorXd* pressure_weights = nullptr;  // lumped masses for the mean
  double inner_tol = 1e-14;
  int max_outer = -1;
  const Ic0* cached_ic0 = nullptr;  // factorization of A for the inner solves
};

/// Solves [A B^T; B -C][u;p] = [f;g] with A SPD by CG on the Schur
/// complement (Uzawa); inner solves use solve_spd. The pressure is returned
/// with zero weighted mean.
SaddleResult solve_saddle(const SparseMatrix& A, const SparseMatrix& B, const Eigen::VectorXd& f,
                          double tol, const SaddleOptions& opts = {});

/// Zero-fill incomplete factorizations, used as preconditioners.
class Ilu0 {
 public:
  explicit Ilu0(const SparseMatrix& A);
  Eigen::VectorXd solve(const Eigen::VectorXd& r) const;

 private:
  SparseMatrix lu_;
  std::vector<int> diag_pos_;
};

class Ic0 {
 public:
  /// attempts the factorization of A (+ shift * diag A); `ok()` reports success
  explicit Ic0(const SparseMatrix& A, double shift = 0.0);
  bool ok() const { return ok_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& r) const;

 private:
  bool ok_ = false;
  // lower triangle in CSR
  std::vector<int> row_ptr_, cols_;
  std::vector<double> val_;
  std::vector<double> diag_;
};

}  // namespace nematic
