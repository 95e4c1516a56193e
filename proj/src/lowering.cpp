#include "conformal/lowering.hpp"

#include <cmath>
#include <string>

#include "conformal/error.hpp"

namespace conformal {

namespace {

// Length of the valid cross-correlation of the padded signal.
std::size_t valid_length(std::size_t length, std::size_t kernel_size, std::size_t pad,
                         std::size_t dilation) {
  if (kernel_size == 0 || dilation == 0) throw Error("kernel size and dilation must be at least 1");
  const std::size_t padded = length + 2 * pad;
  const std::size_t span = (kernel_size - 1) * dilation + 1;
  if (padded < span)
    throw Error("degenerate output: kernel extent " + std::to_string(span) +
                " exceeds padded length " + std::to_string(padded));
  return padded - span + 1;
}

}  // namespace

std::size_t ConvConfig::output_length() const {
  validate();
  return (valid_length(length, weights.size(), pad, dilation) - 1) / stride + 1;
}

void ConvConfig::validate() const {
  if (length == 0) throw Error("conv input length must be at least 1");
  if (weights.empty()) throw Error("conv needs at least one weight");
  if (dilation == 0 || stride == 0) throw Error("dilation and stride must be at least 1");
  for (double w : weights)
    if (!std::isfinite(w)) throw Error("conv weights must be finite");
  valid_length(length, weights.size(), pad, dilation);
}

SparseOperator padding_matrix(std::size_t length, std::size_t pad) {
  const std::size_t rows = length + 2 * pad + 1;
  const std::size_t cols = length + 1;
  std::vector<Triplet> t;
  for (std::size_t j = 0; j < length; ++j) t.push_back({j + pad, j, 1.0});
  t.push_back({rows - 1, cols - 1, 1.0});
  return SparseOperator::from_triplets(rows, cols, std::move(t));
}

SparseOperator dilation_matrix(std::size_t kernel_size, std::size_t dilation) {
  if (kernel_size == 0 || dilation == 0) throw Error("kernel size and dilation must be at least 1");
  const std::size_t rows = kernel_size + 1;
  const std::size_t cols = (kernel_size - 1) * dilation + 2;
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < kernel_size; ++i) t.push_back({i, i * dilation, 1.0});
  t.push_back({rows - 1, cols - 1, 1.0});
  return SparseOperator::from_triplets(rows, cols, std::move(t));
}

SparseOperator stride_matrix(std::size_t length, std::size_t kernel_size, std::size_t pad,
                             std::size_t dilation, std::size_t stride) {
  if (stride == 0) throw Error("stride must be at least 1");
  const std::size_t valid = valid_length(length, kernel_size, pad, dilation);
  const std::size_t rows = (valid - 1) / stride + 2;
  const std::size_t cols = valid + 1;
  std::vector<Triplet> t;
  for (std::size_t i = 0; i + 1 < rows; ++i) t.push_back({i, i * stride, 1.0});
  t.push_back({rows - 1, cols - 1, 1.0});
  return SparseOperator::from_triplets(rows, cols, std::move(t));
}

CrossCorrelationTensor::CrossCorrelationTensor(std::size_t length, std::size_t kernel_size,
                                               std::size_t pad, std::size_t dilation)
    : dim1_((kernel_size - 1) * dilation + 2),
      dim2_(valid_length(length, kernel_size, pad, dilation) + 1),
      dim3_(length + 2 * pad + 1) {}

bool CrossCorrelationTensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  if (i >= dim1_ || j >= dim2_ || k >= dim3_) throw DimensionError("index outside tensor");
  if (i == dim1_ - 1 && j == dim2_ - 1 && k == dim3_ - 1) return true;
  return i + 1 < dim1_ && j + 1 < dim2_ && k + 1 < dim3_ && k >= j && i == k - j;
}

std::size_t CrossCorrelationTensor::nnz() const { return (dim2_ - 1) * (dim1_ - 1) + 1; }

SparseOperator CrossCorrelationTensor::contract(std::span<const double> w) const {
  if (w.size() != dim1_)
    throw DimensionError("cross-correlation contraction needs " + std::to_string(dim1_) + " weights");
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t j = 0; j + 1 < dim2_; ++j)
    for (std::size_t i = 0; i + 1 < dim1_; ++i) t.push_back({j, j + i, w[i]});
  t.push_back({dim2_ - 1, dim3_ - 1, w[dim1_ - 1]});
  return SparseOperator::from_triplets(dim2_, dim3_, std::move(t));
}

SparseOperator weight_row(std::span<const double> weights) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < weights.size(); ++i) t.push_back({0, i, weights[i]});
  t.push_back({0, weights.size(), 1.0});
  return SparseOperator::from_triplets(1, weights.size() + 1, std::move(t));
}

SparseOperator conv_matrix(const ConvConfig& cfg) {
  const std::size_t out_len = cfg.output_length();
  std::vector<Triplet> t;
  for (std::size_t o = 0; o < out_len; ++o)
    for (std::size_t tap = 0; tap < cfg.weights.size(); ++tap) {
      const std::size_t padded_pos = o * cfg.stride + tap * cfg.dilation;
      if (padded_pos < cfg.pad || padded_pos >= cfg.pad + cfg.length) continue;
      t.push_back({o, padded_pos - cfg.pad, cfg.weights[tap]});
    }
  t.push_back({out_len, cfg.length, 1.0});
  return SparseOperator::from_triplets(out_len + 1, cfg.length + 1, std::move(t));
}

SparseOperator conv_matrix_factored(const ConvConfig& cfg) {
  cfg.validate();
  const std::size_t dw = cfg.weights.size();
  const SparseOperator wd = spmm(weight_row(cfg.weights), dilation_matrix(dw, cfg.dilation));
  std::vector<double> dilated(wd.cols(), 0.0);
  for (const auto& e : wd.triplets()) dilated[e.col] = e.value;

  const CrossCorrelationTensor c(cfg.length, dw, cfg.pad, cfg.dilation);
  const SparseOperator s = stride_matrix(cfg.length, dw, cfg.pad, cfg.dilation, cfg.stride);
  const SparseOperator p = padding_matrix(cfg.length, cfg.pad);
  return spmm(spmm(s, c.contract(dilated)), p);
}

SparseOperator avgpool_matrix(std::size_t length, std::size_t kernel_size, std::size_t pad,
                              std::size_t stride) {
  if (kernel_size == 0) throw Error("pooling window must be at least 1");
  ConvConfig cfg{length, std::vector<double>(kernel_size, 1.0 / static_cast<double>(kernel_size)),
                 pad, 1, stride};
  return conv_matrix(cfg);
}

SparseOperator dropout_matrix(std::size_t length, double rate,
                              std::optional<std::span<const std::uint8_t>> mask,
                              std::mt19937_64* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout rate must lie in [0, 1)");
  std::vector<double> diag(length + 1, 1.0);
  if (mask) {
    if (mask->size() != length)
      throw DimensionError("dropout mask has " + std::to_string(mask->size()) + " entries, expected " +
                           std::to_string(length));
    for (std::size_t i = 0; i < length; ++i) diag[i] = (*mask)[i] ? 1.0 : 0.0;
  } else if (rate > 0.0) {
    if (!rng) throw Error("dropout sampling needs a random generator");
    const auto sampled = sample_dropout_mask(length, rate, *rng);
    for (std::size_t i = 0; i < length; ++i) diag[i] = sampled[i] ? 1.0 : 0.0;
  }
  return SparseOperator::diagonal(diag);
}

SparseOperator flatten_matrix(const ShapeSpec& shape, ElementOrder order) {
  shape.validate();
  const std::size_t n = shape.size();
  if (order == ElementOrder::channel_major) return SparseOperator::identity(n + 1);
  const std::size_t channels = shape.channels;
  const std::size_t spatial = shape.spatial_size();
  std::vector<Triplet> t;
  t.reserve(n + 1);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t s = 0; s < spatial; ++s) t.push_back({s * channels + c, c * spatial + s, 1.0});
  t.push_back({n, n, 1.0});
  return SparseOperator::from_triplets(n + 1, n + 1, std::move(t));
}

SparseOperator probe_extract_U(const DirectOperator& op, const ShapeSpec& in_shape) {
  in_shape.validate();
  const std::size_t d_in = in_shape.size();
  std::vector<Triplet> t;
  std::optional<ShapeSpec> out_shape;
  std::vector<double> basis(d_in, 0.0);
  for (std::size_t j = 0; j < d_in; ++j) {
    basis[j] = 1.0;
    const FeatureVolume response = op(FeatureVolume(in_shape, basis));
    basis[j] = 0.0;
    if (!out_shape) {
      out_shape = response.shape;
    } else if (!(response.shape == *out_shape) || response.values.size() != out_shape->size()) {
      throw Error("non-uniform operator: probe " + std::to_string(j) + " produced shape " +
                  response.shape.to_string() + ", expected " + out_shape->to_string());
    }
    for (std::size_t i = 0; i < response.values.size(); ++i)
      if (response.values[i] != 0.0) t.push_back({i, j, response.values[i]});
  }
  const std::size_t d_out = out_shape->size();
  t.push_back({d_out, d_in, 1.0});
  return SparseOperator::from_triplets(d_out + 1, d_in + 1, std::move(t));
}

SparseOperator lower_layer(const LayerSpec& layer, const ShapeSpec& in, ElementOrder order) {
  output_shape(layer, in);
  const bool single_channel_1d = in.rank() == 1 && in.channels == 1;
  if (const auto* c = std::get_if<Conv>(&layer); c && single_channel_1d && c->out_channels == 1)
    return conv_matrix({in.spatial[0], c->weights, c->padding[0], c->dilation[0], c->stride[0]});
  if (const auto* p = std::get_if<AvgPool>(&layer); p && single_channel_1d)
    return avgpool_matrix(in.spatial[0], p->kernel[0], p->padding[0], p->stride[0]);
  if (const auto* d = std::get_if<Dropout>(&layer)) {
    if (!d->mask) return SparseOperator::identity(in.size() + 1);
    return dropout_matrix(in.size(), d->rate, std::span<const std::uint8_t>(*d->mask));
  }
  if (std::holds_alternative<Flatten>(layer)) return flatten_matrix(in, order);
  if (std::holds_alternative<ReSPro>(layer)) throw Error("lower_layer: respro is not linear");
  return probe_extract_U([&](const FeatureVolume& v) { return apply_linear(v, layer, order); }, in);
}

}  // namespace conformal
