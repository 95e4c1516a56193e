#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "conformal/network.hpp"
#include "conformal/reference.hpp"
#include "conformal/sparse.hpp"

namespace conformal {

/// Single-channel 1-D convolution parameters.
struct ConvConfig {
  std::size_t length = 0;  ///< d_x
  std::vector<double> weights;
  std::size_t pad = 0;
  std::size_t dilation = 1;
  std::size_t stride = 1;

  /// Output length. Throws if it would be zero or a parameter is invalid.
  std::size_t output_length() const;
  void validate() const;
};

// Homogeneous 1-D matrices. Every operator carries the homogeneous
// coefficient through its bottom-right entry.

/// (d_x + 2 pad + 1) x (d_x + 1): inserts `pad` zeros at both ends.
SparseOperator padding_matrix(std::size_t length, std::size_t pad);

/// (d_w + 1) x ((d_w - 1) dilation + 2): row vector W^T D spreads the kernel
/// taps `dilation` positions apart.
SparseOperator dilation_matrix(std::size_t kernel_size, std::size_t dilation);

/// Keeps every stride-th position of the valid cross-correlation output.
SparseOperator stride_matrix(std::size_t length, std::size_t kernel_size, std::size_t pad,
                             std::size_t dilation, std::size_t stride);

/// The constant rank-3 tensor C of the valid cross-correlation, stored as a
/// list of its unit entries. Contracting the first index with a dilated
/// weight row vector gives a Toeplitz matrix with homogeneous passthrough.
class CrossCorrelationTensor {
 public:
  CrossCorrelationTensor(std::size_t length, std::size_t kernel_size, std::size_t pad,
                         std::size_t dilation);

  std::size_t dim1() const { return dim1_; }  ///< (d_w - 1) dilation + 2
  std::size_t dim2() const { return dim2_; }  ///< valid output length + 1
  std::size_t dim3() const { return dim3_; }  ///< padded length + 1

  bool at(std::size_t i, std::size_t j, std::size_t k) const;
  std::size_t nnz() const;

  /// sum_i w_i C_{ijk}; `dilated_weights` has dim1() entries.
  SparseOperator contract(std::span<const double> dilated_weights) const;

 private:
  std::size_t dim1_, dim2_, dim3_;
};

/// Weight vector W = (w_1, ..., w_{d_w}, 1) as a 1 x (d_w + 1) operator.
SparseOperator weight_row(std::span<const double> weights);

/// Convolution matrix assembled directly from index arithmetic.
SparseOperator conv_matrix(const ConvConfig& cfg);

/// The same matrix as the explicit product S (W D C) P.
SparseOperator conv_matrix_factored(const ConvConfig& cfg);

/// Convolution with constant weights 1 / d_w and no dilation.
SparseOperator avgpool_matrix(std::size_t length, std::size_t kernel_size, std::size_t pad,
                              std::size_t stride);

/// Diagonal keep-mask with the homogeneous entry fixed at 1. Without a mask,
/// entries are drawn as uniform() > rate from `rng`.
SparseOperator dropout_matrix(std::size_t length, double rate,
                              std::optional<std::span<const std::uint8_t>> mask,
                              std::mt19937_64* rng = nullptr);

/// Permutation from channel-major storage to the declared flatten order.
SparseOperator flatten_matrix(const ShapeSpec& shape, ElementOrder order);

using DirectOperator = std::function<FeatureVolume(const FeatureVolume&)>;

/// Recovers the homogeneous matrix of a linear operator by feeding it every
/// basis vector of `in_shape`; column j holds the response to e_j.
SparseOperator probe_extract_U(const DirectOperator& op, const ShapeSpec& in_shape);

/// Homogeneous matrix of one linear layer. 1-D single-channel convolution
/// and pooling, dropout and flatten use the closed-form builders above;
/// everything else is probed through its direct operator. Dropout without an
/// injected mask lowers to the identity.
SparseOperator lower_layer(const LayerSpec& layer, const ShapeSpec& in, ElementOrder order);

}  // namespace conformal
