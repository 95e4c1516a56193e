#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "conformal/homogeneous.hpp"
#include "conformal/network.hpp"

namespace conformal {

/// Dense feature map stored channel-major.
struct FeatureVolume {
  FeatureVolume(ShapeSpec shape, std::vector<double> values);

  ShapeSpec shape;
  std::vector<double> values;
};

// Naive operators. Nested loops and dense storage on purpose: these are the
// oracle path and the probe targets for lowering.

FeatureVolume direct_conv(const FeatureVolume& v, const Conv& conv);
FeatureVolume direct_avgpool(const FeatureVolume& v, const AvgPool& pool);
/// Elementwise mask multiply, no 1/(1 - rate) rescaling.
FeatureVolume direct_dropout(const FeatureVolume& v, std::span<const std::uint8_t> mask);
FeatureVolume direct_flatten(const FeatureVolume& v, ElementOrder order);

/// Applies a linear layer to data coefficients. ReSPro is rejected because it
/// also needs the homogeneous coefficient.
FeatureVolume apply_linear(const FeatureVolume& v, const LayerSpec& layer, ElementOrder order);

/// Draws a keep-mask with P(keep) = 1 - rate, keeping when uniform() > rate.
std::vector<std::uint8_t> sample_dropout_mask(std::size_t n, double rate, std::mt19937_64& rng);

enum class DropoutMode {
  inference,  ///< identity unless a mask is injected
  training,   ///< injected mask, else a freshly sampled one
};

struct SequentialOptions {
  std::optional<Encoding> encoding;  ///< overrides NetworkSpec::encoding
  DropoutMode dropout = DropoutMode::inference;
  std::mt19937_64* rng = nullptr;           ///< required for training-mode sampling
  AllocationCounter* counter = nullptr;     ///< one record per layer output
  /// Per-ReSPro alphas in layer order. Defaults to estimate_alphas(net).
  std::optional<std::vector<double>> alphas;
};

/// Layer-by-layer evaluation carrying the homogeneous coefficient: linear
/// layers leave it untouched and ReSPro updates it. Returns the undivided
/// output vector.
HomVector sequential_forward_hom(const NetworkSpec& net, std::span<const double> x,
                                 const SequentialOptions& opts = {});

/// sequential_forward_hom followed by division by the output coefficient.
std::vector<double> sequential_forward(const NetworkSpec& net, std::span<const double> x,
                                       const SequentialOptions& opts = {});

}  // namespace conformal
