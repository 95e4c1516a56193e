#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "conformal/homogeneous.hpp"
#include "conformal/network.hpp"
#include "conformal/sparse.hpp"

namespace conformal {

/// One conformal layer: the merged linear run U followed by ReSPro with
/// `alpha`. A trailing run without ReSPro has no alpha.
struct ConformalStage {
  SparseOperator linear;  ///< U, (d_out + 1) x (d_in + 1)
  std::optional<double> alpha;
  std::size_t first_layer = 0;  ///< index range [first_layer, end_layer) in the spec
  std::size_t end_layer = 0;
};

struct LoweredNetwork {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::vector<ConformalStage> stages;
};

/// Splits the layers into maximal linear runs closed by a ReSPro, lowers each
/// run into one matrix and resolves every alpha. Errors name the layer.
LoweredNetwork lower_network(const NetworkSpec& net);

/// The fused operands: Y = L_M X with Y_o += X^T Q X.
struct FusedCache {
  SparseOperator lm;  ///< (d_out + 1) x (d_in + 1)
  SparseOperator q;   ///< bottom slice of L_T, (d_in + 1) x (d_in + 1)
  std::size_t d_in = 0;
  std::size_t d_out = 0;
};

/// L_M = F_M U ... F_M U over all stages, and
/// Q = sum_l (prod_{m > l} alpha_m / 2) / (2 alpha_l) * P_l^T Pi P_l
/// where P_l = U_l ... U_1 and Pi drops the homogeneous row.
FusedCache build_cache(const LoweredNetwork& lowered);

/// Y = L_M X, then Y_o += X^T Q X. Records one buffer in `counter`.
HomVector fused_forward(const FusedCache& cache, const HomVector& x,
                        AllocationCounter* counter = nullptr);

/// fused_forward per sample, same arithmetic order.
Batch fused_forward_batch(const FusedCache& cache, const Batch& batch,
                          AllocationCounter* counter = nullptr);

/// Dense rank-3 array indexed (i, j, k), i the slow index.
class DenseTensor3 {
 public:
  DenseTensor3(std::size_t n1, std::size_t n2, std::size_t n3)
      : n1_(n1), n2_(n2), n3_(n3), values_(n1 * n2 * n3, 0.0) {}

  std::size_t dim1() const { return n1_; }
  std::size_t dim2() const { return n2_; }
  std::size_t dim3() const { return n3_; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) { return values_[(i * n2_ + j) * n3_ + k]; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * n2_ + j) * n3_ + k];
  }

  /// Slice i along the first dimension.
  DenseMatrix slice(std::size_t i) const;
  /// Swaps the first two dimensions.
  DenseTensor3 transposed12() const;
  /// sum_j A_{ij} T_{jkl}
  friend DenseTensor3 operator*(const DenseMatrix& a, const DenseTensor3& t);
  /// sum_l T_{ijl} B_{lm}
  friend DenseTensor3 operator*(const DenseTensor3& t, const DenseMatrix& b);
  /// (T x)_{ij} = sum_k T_{ijk} x_k
  DenseMatrix contract(std::span<const double> x) const;

 private:
  std::size_t n1_, n2_, n3_;
  std::vector<double> values_;
};

inline constexpr std::size_t kDenseExpandMaxInput = 8;
inline constexpr std::size_t kDenseExpandMaxStages = 3;
inline constexpr std::size_t kDenseExpandMaxWidth = 64;

/// Literal dense evaluation of
/// L_T = sum_l (F_M U ... F_M U)_{> l} (U_1^T ... U_l^T F_T^T U_l ... U_1)^T
/// with transposes acting on the first two dimensions. Guarded to
/// d_in <= 8, at most 3 ReSPro stages and intermediate widths <= 64.
DenseTensor3 dense_expand_LT(const LoweredNetwork& lowered);

/// Lowered network plus a lazily rebuilt cache. Any mutation invalidates the
/// cache; build/mutation need exclusive access, forward passes on a valid
/// cache only read it.
class ConformalSequence {
 public:
  explicit ConformalSequence(NetworkSpec net);

  const NetworkSpec& network() const { return net_; }
  void set_network(NetworkSpec net);
  void set_layer(std::size_t index, LayerSpec layer);
  void set_conv_weights(std::size_t index, std::vector<double> weights);

  bool is_valid() const { return cache_.has_value(); }
  void invalidate() { cache_.reset(); }

  /// Builds the cache if it is stale and returns it.
  const FusedCache& cache();
  /// Alphas used by the current cache, one per ReSPro stage.
  const std::vector<double>& alphas();

  /// Encodes x, runs the fused operators and decodes the output.
  std::vector<double> forward(std::span<const double> x, AllocationCounter* counter = nullptr);

 private:
  void rebuild();

  NetworkSpec net_;
  std::optional<FusedCache> cache_;
  std::vector<double> alphas_;
};

}  // namespace conformal
