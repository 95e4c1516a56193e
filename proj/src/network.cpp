#include "conformal/network.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "conformal/error.hpp"

namespace conformal {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::size_t product(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{1}, std::multiplies<>());
}

void require_rank(const std::vector<std::size_t>& v, std::size_t rank, const char* what) {
  if (v.size() != rank)
    throw SpecError(std::string(what) + " needs " + std::to_string(rank) + " entries, got " +
                    std::to_string(v.size()));
}

// Output length of a sliding window; zero-length results are rejected.
std::size_t window_output(std::size_t length, std::size_t kernel, std::size_t pad,
                          std::size_t dilation, std::size_t stride) {
  if (kernel == 0) throw SpecError("kernel size must be at least 1");
  if (dilation == 0) throw SpecError("dilation must be at least 1");
  if (stride == 0) throw SpecError("stride must be at least 1");
  const std::size_t padded = length + 2 * pad;
  const std::size_t span = dilation * (kernel - 1) + 1;
  if (padded < span)
    throw SpecError("window of extent " + std::to_string(span) + " does not fit padded length " +
                    std::to_string(padded));
  return (padded - span) / stride + 1;
}

}  // namespace

std::size_t ShapeSpec::spatial_size() const { return product(spatial); }

void ShapeSpec::validate() const {
  if (channels == 0) throw SpecError("channel count must be at least 1");
  if (spatial.empty() || spatial.size() > 2)
    throw SpecError("only 1-D and 2-D feature volumes are supported");
  for (auto s : spatial)
    if (s == 0) throw SpecError("spatial dimensions must be at least 1");
}

std::string ShapeSpec::to_string() const {
  std::string s = std::to_string(channels) + "x[";
  for (std::size_t i = 0; i < spatial.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(spatial[i]);
  }
  return s + "]";
}

LayerKind kind_of(const LayerSpec& layer) {
  return std::visit(
      Overloaded{
          [](const Conv& c) { return c.kernel.size() == 2 ? LayerKind::conv2d : LayerKind::conv1d; },
          [](const AvgPool& p) {
            return p.kernel.size() == 2 ? LayerKind::avgpool2d : LayerKind::avgpool1d;
          },
          [](const Dropout&) { return LayerKind::dropout; },
          [](const Flatten&) { return LayerKind::flatten; },
          [](const ReSPro&) { return LayerKind::respro; },
      },
      layer);
}

std::string kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::avgpool1d: return "avgpool1d";
    case LayerKind::avgpool2d: return "avgpool2d";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::respro: return "respro";
  }
  return "unknown";
}

bool is_linear(const LayerSpec& layer) { return !std::holds_alternative<ReSPro>(layer); }

ShapeSpec output_shape(const LayerSpec& layer, const ShapeSpec& in) {
  in.validate();
  return std::visit(
      Overloaded{
          [&](const Conv& c) {
            const std::size_t rank = in.rank();
            require_rank(c.kernel, rank, "conv kernel");
            require_rank(c.padding, rank, "conv padding");
            require_rank(c.dilation, rank, "conv dilation");
            require_rank(c.stride, rank, "conv stride");
            if (c.out_channels == 0) throw SpecError("conv needs at least one output channel");
            const std::size_t expected = c.out_channels * in.channels * product(c.kernel);
            if (c.weights.size() != expected)
              throw SpecError("conv expects " + std::to_string(expected) + " weights, got " +
                              std::to_string(c.weights.size()));
            for (double w : c.weights)
              if (!std::isfinite(w)) throw SpecError("conv weight is not finite");
            ShapeSpec out{c.out_channels, {}};
            for (std::size_t d = 0; d < rank; ++d)
              out.spatial.push_back(
                  window_output(in.spatial[d], c.kernel[d], c.padding[d], c.dilation[d], c.stride[d]));
            return out;
          },
          [&](const AvgPool& p) {
            const std::size_t rank = in.rank();
            require_rank(p.kernel, rank, "avgpool kernel");
            require_rank(p.padding, rank, "avgpool padding");
            require_rank(p.stride, rank, "avgpool stride");
            ShapeSpec out{in.channels, {}};
            for (std::size_t d = 0; d < rank; ++d)
              out.spatial.push_back(window_output(in.spatial[d], p.kernel[d], p.padding[d], 1, p.stride[d]));
            return out;
          },
          [&](const Dropout& r) {
            if (!(r.rate >= 0.0 && r.rate < 1.0)) throw SpecError("dropout rate must lie in [0, 1)");
            if (r.mask && r.mask->size() != in.size())
              throw SpecError("dropout mask has " + std::to_string(r.mask->size()) +
                              " entries, volume has " + std::to_string(in.size()));
            return in;
          },
          [&](const Flatten&) { return ShapeSpec{1, {in.size()}}; },
          [&](const ReSPro& a) {
            if (a.alpha && !(std::isfinite(*a.alpha) && *a.alpha > 0.0))
              throw SpecError("respro alpha must be positive and finite");
            return in;
          },
      },
      layer);
}

std::vector<ShapeSpec> infer_shapes(const NetworkSpec& net) {
  try {
    net.input.validate();
  } catch (const SpecError& e) {
    throw SpecError(std::string("input: ") + e.what());
  }
  std::vector<ShapeSpec> shapes{net.input};
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    try {
      shapes.push_back(output_shape(net.layers[i], shapes.back()));
    } catch (const SpecError& e) {
      throw SpecError("layer " + std::to_string(i) + " (" + kind_name(kind_of(net.layers[i])) +
                      "): " + e.what());
    }
  }
  return shapes;
}

void validate(const NetworkSpec& net) {
  if (!(std::isfinite(net.input_bound) && net.input_bound >= 0.0))
    throw SpecError("input_bound must be finite and non-negative");
  infer_shapes(net);
}

}  // namespace conformal
