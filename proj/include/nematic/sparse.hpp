#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace nematic {

/// Compressed sparse row matrix with sorted, unique column indices per row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  static SparseMatrix from_triplets(int rows, int cols, std::vector<std::array<int, 2>> idx,
                                    std::vector<double> val);
  static SparseMatrix identity(int n);
  static SparseMatrix diagonal(const Eigen::VectorXd& d);

  int n_rows() const { return rows_; }
  int n_cols() const { return cols_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(values_.size()); }

  int row_begin(int i) const { return row_ptr_[i]; }
  int row_end(int i) const { return row_ptr_[i + 1]; }
  int col(int k) const { return cols_idx_[k]; }
  double value(int k) const { return values_[k]; }
  double& value(int k) { return values_[k]; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const;
  Eigen::VectorXd diagonal_vector() const;

  /// this + c * other; patterns are merged
  SparseMatrix add_scaled(const SparseMatrix& other, double c) const;
  /// this * other (CSR product with sorted, merged columns)
  SparseMatrix multiply(const SparseMatrix& other) const;
  /// this with row i scaled by s[i]
  SparseMatrix row_scaled(const Eigen::VectorXd& s) const;
  void scale(double c);
  double coeff(int i, int j) const;  // 0 if not stored

  Eigen::MatrixXd to_dense() const;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<int> row_ptr_;
  std::vector<int> cols_idx_;
  std::vector<double> values_;
  friend class CsrBuilder;
};

/// Accumulates (i, j, v) contributions and compresses them deterministically.
class CsrBuilder {
 public:
  CsrBuilder(int rows, int cols) : rows_(rows), cols_(cols) {}
  void add(int i, int j, double v) { entries_.push_back({i, j, v}); }
  void reserve(std::size_t n) { entries_.reserve(n); }
  SparseMatrix build() const;

 private:
  struct Entry {
    int i, j;
    double v;
  };
  int rows_, cols_;
  std::vector<Entry> entries_;
};

struct MMatrixAudit {
  double max_offdiag = 0.0;
  int max_offdiag_row = -1, max_offdiag_col = -1;
  double min_diag = 0.0;
  int min_diag_row = -1;
  double min_dominance_gap = 0.0;  // diag - sum |offdiag| per row
  int min_dominance_row = -1;
  bool offdiag_ok = false;
  bool diag_ok = false;
  bool dominance_ok = false;
  bool pass = false;
  std::string summary() const;
};

/// Checks the three M-matrix criteria: non-positive off-diagonals, strictly
/// positive diagonal, and strict diagonal dominance (up to tol).
MMatrixAudit audit_m_matrix(const SparseMatrix& A, double tol);

}  // namespace nematic
