#include "conformal/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "conformal/error.hpp"
#include "conformal/lowering.hpp"
#include "conformal/respro.hpp"

namespace conformal {

namespace {

SparseOperator respro_fm(std::size_t rows, double alpha) {
  std::vector<double> diag(rows, 1.0);
  diag.back() = alpha / 2.0;
  return SparseOperator::diagonal(diag);
}

bool within_dense_guard(const LoweredNetwork& lowered) {
  if (lowered.d_in > kDenseExpandMaxInput) return false;
  std::size_t respro_stages = 0;
  for (const auto& s : lowered.stages) {
    if (s.alpha) ++respro_stages;
    if (s.linear.rows() > kDenseExpandMaxWidth + 1) return false;
  }
  return respro_stages <= kDenseExpandMaxStages;
}

#ifndef NDEBUG
// Debug builds check the closed-form slice against the literal expansion
// whenever the network is small enough to expand.
void check_against_dense(const LoweredNetwork& lowered, const SparseOperator& q) {
  if (!within_dense_guard(lowered)) return;
  const DenseTensor3 lt = dense_expand_LT(lowered);
  const DenseMatrix bottom = lt.slice(lt.dim1() - 1);
  const DenseMatrix closed = q.to_dense();
  for (std::size_t r = 0; r < closed.rows(); ++r)
    for (std::size_t c = 0; c < closed.cols(); ++c) {
      const double diff = std::abs(closed(r, c) - bottom(r, c));
      if (diff > 1e-9 * std::max(1.0, std::abs(bottom(r, c))))
        throw Error("fused bottom slice disagrees with the dense expansion");
    }
}
#endif

}  // namespace

LoweredNetwork lower_network(const NetworkSpec& net) {
  validate(net);
  const auto shapes = infer_shapes(net);
  const auto alphas = estimate_alphas(net);

  LoweredNetwork out;
  out.d_in = shapes.front().size();
  out.d_out = shapes.back().size();

  std::size_t respro_index = 0;
  std::size_t run_start = 0;
  SparseOperator run = SparseOperator::identity(out.d_in + 1);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    if (std::holds_alternative<ReSPro>(layer)) {
      out.stages.push_back({std::move(run), alphas[respro_index++], run_start, i + 1});
      run_start = i + 1;
      run = SparseOperator::identity(shapes[i + 1].size() + 1);
      continue;
    }
    try {
      run = spmm(lower_layer(layer, shapes[i], net.order), run);
    } catch (const Error& e) {
      throw Error("layer " + std::to_string(i) + " (" + kind_name(kind_of(layer)) + "): " + e.what());
    }
  }
  if (run_start < net.layers.size())
    out.stages.push_back({std::move(run), std::nullopt, run_start, net.layers.size()});
  return out;
}

FusedCache build_cache(const LoweredNetwork& lowered) {
  const std::size_t n_in = lowered.d_in + 1;
  SparseOperator lm = SparseOperator::identity(n_in);
  SparseOperator prefix = SparseOperator::identity(n_in);  // U_l ... U_1
  SparseOperator q = SparseOperator::zero(n_in, n_in);

  for (const auto& stage : lowered.stages) {
    if (stage.linear.cols() != prefix.rows())
      throw DimensionError("stage at layer " + std::to_string(stage.first_layer) +
                           " does not chain with the previous stage");
    prefix = spmm(stage.linear, prefix);
    lm = spmm(stage.linear, lm);
    if (!stage.alpha) continue;
    const double alpha = *stage.alpha;
    lm = spmm(respro_fm(stage.linear.rows(), alpha), lm);

    // Earlier contributions reach the output coefficient through this
    // stage's F_M, which scales it by alpha / 2.
    const SparseOperator data_rows = prefix.without_row(prefix.rows() - 1);
    const SparseOperator gram = spmm(data_rows.transposed(), data_rows);
    q = add(q.scaled(alpha / 2.0), gram.scaled(1.0 / (2.0 * alpha)));
  }
  if (lm.rows() != lowered.d_out + 1)
    throw DimensionError("fused operator does not match the network output size");

#ifndef NDEBUG
  check_against_dense(lowered, q);
#endif
  return {std::move(lm), std::move(q), lowered.d_in, lowered.d_out};
}

HomVector fused_forward(const FusedCache& cache, const HomVector& x, AllocationCounter* counter) {
  if (x.dim() != cache.d_in)
    throw DimensionError("fused input has dimension " + std::to_string(x.dim()) + ", cache expects " +
                         std::to_string(cache.d_in));
  std::vector<double> y(cache.lm.rows());
  if (counter) counter->record(y.size());
  spmv_into(cache.lm, x.coeffs(), y);
  y.back() += quadratic_form(cache.q, x.coeffs());
  return HomVector(std::move(y));
}

Batch fused_forward_batch(const FusedCache& cache, const Batch& batch, AllocationCounter* counter) {
  if (batch.dim() != cache.d_in)
    throw DimensionError("batch dimension " + std::to_string(batch.dim()) + " does not match cache input " +
                         std::to_string(cache.d_in));
  std::vector<HomVector> out;
  out.reserve(batch.size());
  for (const auto& x : batch) out.push_back(fused_forward(cache, x, counter));
  return Batch(std::move(out));
}

DenseMatrix DenseTensor3::slice(std::size_t i) const {
  DenseMatrix m(n2_, n3_);
  for (std::size_t j = 0; j < n2_; ++j)
    for (std::size_t k = 0; k < n3_; ++k) m(j, k) = (*this)(i, j, k);
  return m;
}

DenseTensor3 DenseTensor3::transposed12() const {
  DenseTensor3 t(n2_, n1_, n3_);
  for (std::size_t i = 0; i < n1_; ++i)
    for (std::size_t j = 0; j < n2_; ++j)
      for (std::size_t k = 0; k < n3_; ++k) t(j, i, k) = (*this)(i, j, k);
  return t;
}

DenseTensor3 operator*(const DenseMatrix& a, const DenseTensor3& t) {
  if (a.cols() != t.dim1()) throw DimensionError("matrix-tensor product: dimensions differ");
  DenseTensor3 out(a.rows(), t.dim2(), t.dim3());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      for (std::size_t k = 0; k < t.dim2(); ++k)
        for (std::size_t l = 0; l < t.dim3(); ++l) out(i, k, l) += aij * t(j, k, l);
    }
  return out;
}

DenseTensor3 operator*(const DenseTensor3& t, const DenseMatrix& b) {
  if (t.dim3() != b.rows()) throw DimensionError("tensor-matrix product: dimensions differ");
  DenseTensor3 out(t.dim1(), t.dim2(), b.cols());
  for (std::size_t i = 0; i < t.dim1(); ++i)
    for (std::size_t j = 0; j < t.dim2(); ++j)
      for (std::size_t l = 0; l < t.dim3(); ++l) {
        const double v = t(i, j, l);
        if (v == 0.0) continue;
        for (std::size_t m = 0; m < b.cols(); ++m) out(i, j, m) += v * b(l, m);
      }
  return out;
}

DenseMatrix DenseTensor3::contract(std::span<const double> x) const {
  if (x.size() != n3_) throw DimensionError("tensor contraction: dimensions differ");
  DenseMatrix m(n1_, n2_);
  for (std::size_t i = 0; i < n1_; ++i)
    for (std::size_t j = 0; j < n2_; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n3_; ++k) acc += (*this)(i, j, k) * x[k];
      m(i, j) = acc;
    }
  return m;
}

DenseTensor3 dense_expand_LT(const LoweredNetwork& lowered) {
  if (!within_dense_guard(lowered))
    throw Error("dense expansion limited to d_in <= " + std::to_string(kDenseExpandMaxInput) + ", " +
                std::to_string(kDenseExpandMaxStages) + " respro stages and widths <= " +
                std::to_string(kDenseExpandMaxWidth));
  const std::size_t n_in = lowered.d_in + 1;
  const std::size_t n_out = lowered.d_out + 1;
  const auto& stages = lowered.stages;

  std::vector<DenseMatrix> u;
  std::vector<DenseMatrix> fm_u;  // F_M U per stage; F_M = I for a trailing run
  for (const auto& s : stages) {
    u.push_back(s.linear.to_dense());
    DenseMatrix f = DenseMatrix::identity(s.linear.rows());
    if (s.alpha) f(f.rows() - 1, f.cols() - 1) = *s.alpha / 2.0;
    fm_u.push_back(f * u.back());
  }

  DenseTensor3 lt(n_out, n_in, n_in);
  for (std::size_t l = 0; l < stages.size(); ++l) {
    if (!stages[l].alpha) continue;
    const std::size_t width = u[l].rows();
    DenseTensor3 ft(width, width, width);
    for (std::size_t j = 0; j + 1 < width; ++j) ft(width - 1, j, j) = 1.0 / (2.0 * *stages[l].alpha);

    // U_1^T ... U_l^T F_T^T U_l ... U_1, innermost factors first
    DenseTensor3 inner = ft.transposed12();
    for (std::size_t m = l + 1; m-- > 0;) inner = u[m].transposed() * inner * u[m];
    inner = inner.transposed12();

    DenseMatrix outer = DenseMatrix::identity(width);
    for (std::size_t m = l + 1; m < stages.size(); ++m) outer = fm_u[m] * outer;
    const DenseTensor3 term = outer * inner;
    for (std::size_t i = 0; i < n_out; ++i)
      for (std::size_t j = 0; j < n_in; ++j)
        for (std::size_t k = 0; k < n_in; ++k) lt(i, j, k) += term(i, j, k);
  }
  return lt;
}

ConformalSequence::ConformalSequence(NetworkSpec net) : net_(std::move(net)) { validate(net_); }

void ConformalSequence::set_network(NetworkSpec net) {
  validate(net);
  net_ = std::move(net);
  invalidate();
}

void ConformalSequence::set_layer(std::size_t index, LayerSpec layer) {
  if (index >= net_.layers.size()) throw Error("layer index " + std::to_string(index) + " out of range");
  NetworkSpec next = net_;
  next.layers[index] = std::move(layer);
  set_network(std::move(next));
}

void ConformalSequence::set_conv_weights(std::size_t index, std::vector<double> weights) {
  if (index >= net_.layers.size()) throw Error("layer index " + std::to_string(index) + " out of range");
  const auto* conv = std::get_if<Conv>(&net_.layers[index]);
  if (!conv) throw Error("layer " + std::to_string(index) + " is not a convolution");
  Conv updated = *conv;
  updated.weights = std::move(weights);
  set_layer(index, updated);
}

void ConformalSequence::rebuild() {
  const LoweredNetwork lowered = lower_network(net_);
  alphas_.clear();
  for (const auto& s : lowered.stages)
    if (s.alpha) alphas_.push_back(*s.alpha);
  cache_ = build_cache(lowered);
}

const FusedCache& ConformalSequence::cache() {
  if (!cache_) rebuild();
  return *cache_;
}

const std::vector<double>& ConformalSequence::alphas() {
  if (!cache_) rebuild();
  return alphas_;
}

std::vector<double> ConformalSequence::forward(std::span<const double> x, AllocationCounter* counter) {
  const FusedCache& c = cache();
  if (x.size() != c.d_in)
    throw DimensionError("input has " + std::to_string(x.size()) + " values, network expects " +
                         std::to_string(c.d_in));
  return decode_output(fused_forward(c, encode(x, net_.encoding), counter));
}

}  // namespace conformal
