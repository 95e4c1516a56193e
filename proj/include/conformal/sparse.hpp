#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "conformal/homogeneous.hpp"

namespace conformal {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Row-major dense matrix. Used for Jacobians, small oracles and debugging.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  std::span<const double> values() const { return values_; }

  DenseMatrix transposed() const;
  friend DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Immutable sparse matrix in compressed-row layout.
///
/// Entries are sorted by (row, col), unique, finite and nonzero; explicit
/// zeros are dropped on construction. Two operators holding the same matrix
/// therefore compare equal structurally.
class SparseOperator {
 public:
  SparseOperator() = default;

  /// Sums duplicate coordinates, then drops zeros.
  static SparseOperator from_triplets(std::size_t rows, std::size_t cols,
                                      std::vector<Triplet> entries);
  static SparseOperator identity(std::size_t n);
  static SparseOperator zero(std::size_t rows, std::size_t cols);
  static SparseOperator diagonal(std::span<const double> diag);
  static SparseOperator from_dense(const DenseMatrix& m);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const std::uint32_t> col_indices() const { return col_indices_; }
  std::span<const double> values() const { return values_; }

  /// Entry lookup by binary search within the row.
  double at(std::size_t r, std::size_t c) const;
  std::vector<Triplet> triplets() const;
  DenseMatrix to_dense() const;
  SparseOperator transposed() const;
  SparseOperator scaled(double factor) const;
  /// Copy with row r removed from the stored entries (row count unchanged).
  SparseOperator without_row(std::size_t r) const;

  friend bool operator==(const SparseOperator&, const SparseOperator&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::uint32_t> col_indices_;
  std::vector<double> values_;
};

/// y = A x over raw coefficient spans; out must have A.rows() entries.
void spmv_into(const SparseOperator& a, std::span<const double> x, std::span<double> out);

/// A applied to the full homogeneous vector (data followed by x'_o).
HomVector spmv(const SparseOperator& a, const HomVector& v);

/// Exact sparse product A B (row-wise Gustavson accumulation).
SparseOperator spmm(const SparseOperator& a, const SparseOperator& b);

SparseOperator add(const SparseOperator& a, const SparseOperator& b);

/// v^T Q v using all d + 1 coefficients of v.
double quadratic_form(const SparseOperator& q, const HomVector& v);
double quadratic_form(const SparseOperator& q, std::span<const double> v);

/// Rank-3 tensor of size out_dim x in_dim x in_dim that is zero everywhere
/// except the last slice along its first dimension.
class BottomSliceTensor {
 public:
  BottomSliceTensor(std::size_t out_dim, SparseOperator slice);

  std::size_t out_dim() const { return out_dim_; }
  std::size_t in_dim() const { return slice_.rows(); }
  const SparseOperator& slice() const { return slice_; }

  /// Contraction over the third index: (T X)_{ij} = sum_k T_{ijk} X_k.
  /// Only the last row of the result can be nonzero.
  SparseOperator contract(const HomVector& x) const;

 private:
  std::size_t out_dim_;
  SparseOperator slice_;
};

}  // namespace conformal
