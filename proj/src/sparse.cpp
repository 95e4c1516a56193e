#include "conformal/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "conformal/error.hpp"

namespace conformal {

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("dense product: inner dimensions differ");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

SparseOperator SparseOperator::from_triplets(std::size_t rows, std::size_t cols,
                                             std::vector<Triplet> entries) {
  if (cols > std::numeric_limits<std::uint32_t>::max())
    throw DimensionError("column count exceeds 32-bit index range");
  for (const auto& t : entries) {
    if (t.row >= rows || t.col >= cols)
      throw DimensionError("triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                           ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    if (!std::isfinite(t.value)) throw Error("sparse operator entries must be finite");
  }
  std::ranges::sort(entries, [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseOperator m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_offsets_.assign(rows + 1, 0);
  m.col_indices_.reserve(entries.size());
  m.values_.reserve(entries.size());

  auto flush = [&m](std::size_t row, std::size_t col, double value) {
    if (value == 0.0) return;
    m.col_indices_.push_back(static_cast<std::uint32_t>(col));
    m.values_.push_back(value);
    ++m.row_offsets_[row + 1];
  };

  for (std::size_t i = 0; i < entries.size();) {
    const auto [row, col, first] = entries[i];
    double sum = first;
    std::size_t j = i + 1;
    for (; j < entries.size() && entries[j].row == row && entries[j].col == col; ++j)
      sum += entries[j].value;
    flush(row, col, sum);
    i = j;
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_offsets_[r + 1] += m.row_offsets_[r];
  return m;
}

SparseOperator SparseOperator::identity(std::size_t n) {
  std::vector<double> ones(n, 1.0);
  return diagonal(ones);
}

SparseOperator SparseOperator::zero(std::size_t rows, std::size_t cols) {
  return from_triplets(rows, cols, {});
}

SparseOperator SparseOperator::diagonal(std::span<const double> diag) {
  std::vector<Triplet> t;
  t.reserve(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) t.push_back({i, i, diag[i]});
  return from_triplets(diag.size(), diag.size(), std::move(t));
}

SparseOperator SparseOperator::from_dense(const DenseMatrix& d) {
  std::vector<Triplet> t;
  for (std::size_t r = 0; r < d.rows(); ++r)
    for (std::size_t c = 0; c < d.cols(); ++c)
      if (d(r, c) != 0.0) t.push_back({r, c, d(r, c)});
  return from_triplets(d.rows(), d.cols(), std::move(t));
}

double SparseOperator::at(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) throw DimensionError("index outside sparse operator");
  const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r]);
  const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
  if (it == last || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - col_indices_.begin())];
}

std::vector<Triplet> SparseOperator::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
      out.push_back({r, col_indices_[k], values_[k]});
  return out;
}

DenseMatrix SparseOperator::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (const auto& t : triplets()) d(t.row, t.col) = t.value;
  return d;
}

SparseOperator SparseOperator::transposed() const {
  auto t = triplets();
  for (auto& e : t) std::swap(e.row, e.col);
  return from_triplets(cols_, rows_, std::move(t));
}

SparseOperator SparseOperator::scaled(double factor) const {
  auto t = triplets();
  for (auto& e : t) e.value *= factor;
  return from_triplets(rows_, cols_, std::move(t));
}

SparseOperator SparseOperator::without_row(std::size_t r) const {
  auto t = triplets();
  std::erase_if(t, [r](const Triplet& e) { return e.row == r; });
  return from_triplets(rows_, cols_, std::move(t));
}

void spmv_into(const SparseOperator& a, std::span<const double> x, std::span<double> out) {
  if (a.cols() != x.size() || a.rows() != out.size())
    throw DimensionError("spmv: operator is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ", vector has " + std::to_string(x.size()) +
                         " coefficients");
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) acc += vals[k] * x[cols[k]];
    out[r] = acc;
  }
}

HomVector spmv(const SparseOperator& a, const HomVector& v) {
  if (a.rows() < 2) throw DimensionError("spmv: result needs a data row and a homogeneous row");
  std::vector<double> out(a.rows());
  spmv_into(a, v.coeffs(), out);
  return HomVector(std::move(out));
}

SparseOperator spmm(const SparseOperator& a, const SparseOperator& b) {
  if (a.cols() != b.rows())
    throw DimensionError("spmm: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  const auto a_off = a.row_offsets();
  const auto a_col = a.col_indices();
  const auto a_val = a.values();
  const auto b_off = b.row_offsets();
  const auto b_col = b.col_indices();
  const auto b_val = b.values();

  std::vector<Triplet> out;
  std::vector<double> acc(b.cols(), 0.0);
  std::vector<char> touched(b.cols(), 0);
  std::vector<std::size_t> pattern;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    pattern.clear();
    for (std::size_t ka = a_off[r]; ka < a_off[r + 1]; ++ka) {
      const double av = a_val[ka];
      const std::size_t k = a_col[ka];
      for (std::size_t kb = b_off[k]; kb < b_off[k + 1]; ++kb) {
        const std::size_t c = b_col[kb];
        if (!touched[c]) {
          touched[c] = 1;
          pattern.push_back(c);
        }
        acc[c] += av * b_val[kb];
      }
    }
    for (std::size_t c : pattern) {
      out.push_back({r, c, acc[c]});
      acc[c] = 0.0;
      touched[c] = 0;
    }
  }
  return SparseOperator::from_triplets(a.rows(), b.cols(), std::move(out));
}

SparseOperator add(const SparseOperator& a, const SparseOperator& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("add: operand shapes differ");
  auto t = a.triplets();
  auto tb = b.triplets();
  t.insert(t.end(), tb.begin(), tb.end());
  return SparseOperator::from_triplets(a.rows(), a.cols(), std::move(t));
}

double quadratic_form(const SparseOperator& q, std::span<const double> v) {
  if (q.rows() != q.cols() || q.rows() != v.size())
    throw DimensionError("quadratic_form: operator must be square and match the vector");
  const auto offsets = q.row_offsets();
  const auto cols = q.col_indices();
  const auto vals = q.values();
  double total = 0.0;
  for (std::size_t r = 0; r < q.rows(); ++r) {
    if (v[r] == 0.0) continue;
    double row = 0.0;
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) row += vals[k] * v[cols[k]];
    total += v[r] * row;
  }
  return total;
}

double quadratic_form(const SparseOperator& q, const HomVector& v) {
  return quadratic_form(q, v.coeffs());
}

BottomSliceTensor::BottomSliceTensor(std::size_t out_dim, SparseOperator slice)
    : out_dim_(out_dim), slice_(std::move(slice)) {
  if (slice_.rows() != slice_.cols()) throw DimensionError("bottom slice must be square");
  if (out_dim_ == 0) throw DimensionError("bottom-slice tensor needs a first dimension");
}

SparseOperator BottomSliceTensor::contract(const HomVector& x) const {
  std::vector<double> row(in_dim());
  spmv_into(slice_, x.coeffs(), row);
  std::vector<Triplet> t;
  for (std::size_t j = 0; j < row.size(); ++j) t.push_back({out_dim_ - 1, j, row[j]});
  return SparseOperator::from_triplets(out_dim_, in_dim(), std::move(t));
}

}  // namespace conformal
