#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "conformal/homogeneous.hpp"
#include "conformal/network.hpp"
#include "conformal/sparse.hpp"

namespace conformal {

struct ResProParams {
  ResProParams(double alpha, std::size_t dim);

  double alpha;
  std::size_t dim;
};

/// Homogeneous form: data passes through, and
/// y'_o = (alpha / 2) x'_o + (1 / (2 alpha)) * sum_i x'_i^2.
HomVector respro_direct(const HomVector& x, const ResProParams& p);

/// Tensor form (F_M + F_T X) X of the same map.
struct ResProTensors {
  SparseOperator fm;     ///< diag(1, ..., 1, alpha / 2)
  BottomSliceTensor ft;  ///< last slice diag(1/(2 alpha), ..., 1/(2 alpha), 0)
};

ResProTensors respro_tensors(const ResProParams& p);

/// (F_M + F_T X) X evaluated with sparse operators.
HomVector respro_apply_tensors(const ResProTensors& t, const HomVector& x);

struct ClosedFormResult {
  std::vector<double> y;
  /// Set when ||x|| > alpha: the map is still defined there but is no longer
  /// a bijection onto the unit ball.
  bool outside_domain = false;
};

/// y = 2 alpha x / (alpha^2 + ||x||^2), i.e. the homogeneous form decoded
/// under canonical encoding.
ClosedFormResult respro_closed_form(std::span<const double> x, double alpha);

/// Inverse of the closed form on the unit ball. Throws if ||y|| > 1.
std::vector<double> respro_inverse(std::span<const double> y, double alpha);

/// d x d Jacobian of the closed form:
/// J = 2a/(a^2 + r^2) I - 4a/(a^2 + r^2)^2 x x^T.
DenseMatrix respro_jacobian(std::span<const double> x, double alpha);

/// Upper bound on the L2 norm of the decoded point at a pipeline position.
struct NormBound {
  double bound = 0.0;
};

/// How the Young bound treats several output channels.
enum class ChannelBound {
  /// input bound times the largest per-output-channel kernel L1 norm
  per_channel_max,
  /// additionally multiplied by sqrt(out_channels), a bound on the whole volume
  whole_volume,
};

/// Carries a norm bound through one layer. Pooling, dropout and flatten keep
/// it; a bias-free convolution multiplies it by the kernel L1 norm (Young's
/// inequality with p = 2, q = 1, r = 2); ReSPro resets it to 1.
NormBound propagate_bound(NormBound b, const LayerSpec& layer,
                          ChannelBound mode = ChannelBound::per_channel_max);

/// The tracked bound in front of a ReSPro becomes its alpha.
double estimate_alpha(NormBound bound_before_respro);

/// Alpha for each ReSPro layer in order: the explicit value when given,
/// otherwise the bound tracked from NetworkSpec::input_bound.
std::vector<double> estimate_alphas(const NetworkSpec& net,
                                    ChannelBound mode = ChannelBound::per_channel_max);

/// Sum of |w| for every output channel of a convolution.
std::vector<double> kernel_l1_norms(const Conv& conv);

}  // namespace conformal
