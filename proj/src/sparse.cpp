#include "nematic/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace nematic {

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::vector<std::array<int, 2>> idx,
                                         std::vector<double> val) {
  CsrBuilder b(rows, cols);
  b.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) b.add(idx[k][0], idx[k][1], val[k]);
  return b.build();
}

SparseMatrix CsrBuilder::build() const {
  std::vector<std::size_t> order(entries_.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
    if (entries_[a].i != entries_[b].i) return entries_[a].i < entries_[b].i;
    return entries_[a].j < entries_[b].j;
  });

  SparseMatrix m(rows_, cols_);
  m.cols_idx_.reserve(entries_.size());
  m.values_.reserve(entries_.size());
  int last_i = -1, last_j = -1;
  for (std::size_t k : order) {
    const auto& e = entries_[k];
    if (e.i < 0 || e.i >= rows_ || e.j < 0 || e.j >= cols_)
      throw std::out_of_range("CsrBuilder: index out of range");
    if (e.i == last_i && e.j == last_j) {
      m.values_.back() += e.v;
    } else {
      for (int r = last_i + 1; r <= e.i; ++r) m.row_ptr_[r] = static_cast<int>(m.values_.size());
      m.cols_idx_.push_back(e.j);
      m.values_.push_back(e.v);
      last_i = e.i;
      last_j = e.j;
    }
  }
  for (int r = last_i + 1; r <= rows_; ++r) m.row_ptr_[r] = static_cast<int>(m.values_.size());
  return m;
}

SparseMatrix SparseMatrix::identity(int n) {
  SparseMatrix m(n, n);
  m.cols_idx_.resize(n);
  m.values_.assign(n, 1.0);
  for (int i = 0; i < n; ++i) {
    m.cols_idx_[i] = i;
    m.row_ptr_[i + 1] = i + 1;
  }
  return m;
}

SparseMatrix SparseMatrix::diagonal(const Eigen::VectorXd& d) {
  SparseMatrix m = identity(static_cast<int>(d.size()));
  for (int i = 0; i < d.size(); ++i) m.values_[i] = d[i];
  return m;
}

Eigen::VectorXd SparseMatrix::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(rows_);
  for (int i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[cols_idx_[k]];
    y[i] = s;
  }
  return y;
}

Eigen::VectorXd SparseMatrix::apply_transpose(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(cols_);
  for (int i = 0; i < rows_; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) y[cols_idx_[k]] += values_[k] * x[i];
  return y;
}

Eigen::VectorXd SparseMatrix::diagonal_vector() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(rows_);
  for (int i = 0; i < rows_; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (cols_idx_[k] == i) d[i] = values_[k];
  return d;
}

SparseMatrix SparseMatrix::add_scaled(const SparseMatrix& other, double c) const {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw std::invalid_argument("add_scaled: shape mismatch");
  SparseMatrix m(rows_, cols_);
  m.cols_idx_.reserve(values_.size() + other.values_.size());
  m.values_.reserve(values_.size() + other.values_.size());
  for (int i = 0; i < rows_; ++i) {
    int ka = row_ptr_[i], ea = row_ptr_[i + 1];
    int kb = other.row_ptr_[i], eb = other.row_ptr_[i + 1];
    while (ka < ea || kb < eb) {
      int ja = ka < ea ? cols_idx_[ka] : std::numeric_limits<int>::max();
      int jb = kb < eb ? other.cols_idx_[kb] : std::numeric_limits<int>::max();
      if (ja == jb) {
        m.cols_idx_.push_back(ja);
        m.values_.push_back(values_[ka] + c * other.values_[kb]);
        ++ka;
        ++kb;
      } else if (ja < jb) {
        m.cols_idx_.push_back(ja);
        m.values_.push_back(values_[ka]);
        ++ka;
      } else {
        m.cols_idx_.push_back(jb);
        m.values_.push_back(c * other.values_[kb]);
        ++kb;
      }
    }
    m.row_ptr_[i + 1] = static_cast<int>(m.values_.size());
  }
  return m;
}

SparseMatrix SparseMatrix::multiply(const SparseMatrix& other) const {
  if (cols_ != other.rows_) throw std::invalid_argument("multiply: shape mismatch");
  SparseMatrix m(rows_, other.cols_);
  std::vector<double> acc(other.cols_, 0.0);
  std::vector<int> marked;
  for (int i = 0; i < rows_; ++i) {
    marked.clear();
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      int j = cols_idx_[k];
      double v = values_[k];
      for (int kk = other.row_ptr_[j]; kk < other.row_ptr_[j + 1]; ++kk) {
        int c = other.cols_idx_[kk];
        if (acc[c] == 0.0 && std::find(marked.begin(), marked.end(), c) == marked.end())
          marked.push_back(c);
        acc[c] += v * other.values_[kk];
      }
    }
    std::sort(marked.begin(), marked.end());
    for (int c : marked) {
      m.cols_idx_.push_back(c);
      m.values_.push_back(acc[c]);
      acc[c] = 0.0;
    }
    m.row_ptr_[i + 1] = static_cast<int>(m.values_.size());
  }
  return m;
}

SparseMatrix SparseMatrix::row_scaled(const Eigen::VectorXd& s) const {
  SparseMatrix m = *this;
  for (int i = 0; i < rows_; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) m.values_[k] *= s[i];
  return m;
}

void SparseMatrix::scale(double c) {
  for (auto& v : values_) v *= c;
}

double SparseMatrix::coeff(int i, int j) const {
  for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
    if (cols_idx_[k] == j) return values_[k];
  return 0.0;
}

Eigen::MatrixXd SparseMatrix::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) d(i, cols_idx_[k]) = values_[k];
  return d;
}

std::string MMatrixAudit::summary() const {
  std::ostringstream os;
  os << (pass ? "M-matrix: pass" : "M-matrix: FAIL");
  os << " (max offdiag " << max_offdiag << " at (" << max_offdiag_row << "," << max_offdiag_col
     << "); min diag " << min_diag << " at row " << min_diag_row << "; min dominance gap "
     << min_dominance_gap << " at row " << min_dominance_row << ")";
  return os.str();
}

MMatrixAudit audit_m_matrix(const SparseMatrix& A, double tol) {
  if (A.n_rows() != A.n_cols()) throw std::invalid_argument("audit_m_matrix: matrix not square");
  MMatrixAudit audit;
  audit.max_offdiag = -std::numeric_limits<double>::max();
  audit.min_diag = std::numeric_limits<double>::max();
  audit.min_dominance_gap = std::numeric_limits<double>::max();
  for (int i = 0; i < A.n_rows(); ++i) {
    double diag = 0.0, off_abs = 0.0;
    for (int k = A.row_begin(i); k < A.row_end(i); ++k) {
      if (A.col(k) == i) {
        diag = A.value(k);
      } else {
        off_abs += std::abs(A.value(k));
        if (A.value(k) > audit.max_offdiag) {
          audit.max_offdiag = A.value(k);
          audit.max_offdiag_row = i;
          audit.max_offdiag_col = A.col(k);
        }
      }
    }
    if (diag < audit.min_diag) {
      audit.min_diag = diag;
      audit.min_diag_row = i;
    }
    double gap = std::abs(diag) - off_abs;
    if (gap < audit.min_dominance_gap) {
      audit.min_dominance_gap = gap;
      audit.min_dominance_row = i;
    }
  }
  if (A.nnz() == 0) {
    audit.max_offdiag = 0.0;
    audit.min_diag = 0.0;
    audit.min_dominance_gap = 0.0;
  }
  audit.offdiag_ok = audit.max_offdiag <= tol;
  audit.diag_ok = audit.min_diag > 0.0;
  audit.dominance_ok = audit.min_dominance_gap > -tol;
  audit.pass = audit.offdiag_ok && audit.diag_ok && audit.dominance_ok;
  return audit;
}

}  // namespace nematic
