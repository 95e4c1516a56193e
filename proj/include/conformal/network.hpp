#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "conformal/homogeneous.hpp"

namespace conformal {

/// A multi-channel feature volume with one or two spatial dimensions.
/// Values are always stored channel-major: channel, then spatial row-major.
struct ShapeSpec {
  std::size_t channels = 1;
  std::vector<std::size_t> spatial;

  std::size_t spatial_size() const;
  std::size_t size() const { return channels * spatial_size(); }
  std::size_t rank() const { return spatial.size(); }
  void validate() const;

  std::string to_string() const;
  friend bool operator==(const ShapeSpec&, const ShapeSpec&) = default;
};

/// Order in which flatten linearizes a multi-channel volume.
enum class ElementOrder {
  channel_major,  ///< (c, spatial...) — matches storage, flatten is the identity
  channel_last,   ///< (spatial..., c)
};

/// Cross-correlation without bias. Per-dimension parameters have one entry
/// per spatial dimension. Weights are laid out [out][in][kernel...].
struct Conv {
  std::size_t out_channels = 1;
  std::vector<std::size_t> kernel;
  std::vector<double> weights;
  std::vector<std::size_t> padding;
  std::vector<std::size_t> dilation;
  std::vector<std::size_t> stride;

  friend bool operator==(const Conv&, const Conv&) = default;
};

/// Mean filter; padded positions count as zeros in the average.
struct AvgPool {
  std::vector<std::size_t> kernel;
  std::vector<std::size_t> padding;
  std::vector<std::size_t> stride;

  friend bool operator==(const AvgPool&, const AvgPool&) = default;
};

/// Unscaled dropout. When `mask` is present both evaluation paths use it;
/// otherwise inference treats the layer as the identity.
struct Dropout {
  double rate = 0.0;
  std::optional<std::vector<std::uint8_t>> mask;

  friend bool operator==(const Dropout&, const Dropout&) = default;
};

struct Flatten {
  friend bool operator==(const Flatten&, const Flatten&) = default;
};

struct ReSPro {
  /// Explicit sphere radius. Estimated from norm bounds when absent.
  std::optional<double> alpha;

  friend bool operator==(const ReSPro&, const ReSPro&) = default;
};

enum class LayerKind { conv1d, conv2d, avgpool1d, avgpool2d, dropout, flatten, respro };

using LayerSpec = std::variant<Conv, AvgPool, Dropout, Flatten, ReSPro>;

LayerKind kind_of(const LayerSpec& layer);
std::string kind_name(LayerKind kind);
bool is_linear(const LayerSpec& layer);

struct NetworkSpec {
  ShapeSpec input;
  ElementOrder order = ElementOrder::channel_major;
  /// How the input point's homogeneous coefficient is chosen.
  Encoding encoding = Encoding::norm;
  /// Upper bound on the decoded input norm used for alpha estimation.
  double input_bound = 1.0;
  std::vector<LayerSpec> layers;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Output shape of a single layer. Throws SpecError on invalid parameters.
ShapeSpec output_shape(const LayerSpec& layer, const ShapeSpec& in);

/// Shapes along the network: element 0 is the input, element i + 1 the
/// output of layer i. Errors name the offending layer index.
std::vector<ShapeSpec> infer_shapes(const NetworkSpec& net);

/// Checks parameters, finiteness and the shape chain.
void validate(const NetworkSpec& net);

}  // namespace conformal
