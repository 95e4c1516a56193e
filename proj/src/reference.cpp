#include "conformal/reference.hpp"

#include <numeric>
#include <string>

#include "conformal/error.hpp"
#include "conformal/respro.hpp"

namespace conformal {

namespace {

// 1-D volumes are handled as 2-D with a unit leading spatial dimension.
struct Window2d {
  std::size_t kh, kw, ph, pw, dh, dw, sh, sw;
};

Window2d as_2d(const std::vector<std::size_t>& kernel, const std::vector<std::size_t>& pad,
               const std::vector<std::size_t>& dil, const std::vector<std::size_t>& stride) {
  if (kernel.size() == 1) return {1, kernel[0], 0, pad[0], 1, dil[0], 1, stride[0]};
  return {kernel[0], kernel[1], pad[0], pad[1], dil[0], dil[1], stride[0], stride[1]};
}

std::pair<std::size_t, std::size_t> spatial_2d(const ShapeSpec& s) {
  return s.rank() == 1 ? std::pair{std::size_t{1}, s.spatial[0]} : std::pair{s.spatial[0], s.spatial[1]};
}

}  // namespace

FeatureVolume::FeatureVolume(ShapeSpec s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  shape.validate();
  if (values.size() != shape.size())
    throw DimensionError("feature volume " + shape.to_string() + " needs " +
                         std::to_string(shape.size()) + " values, got " + std::to_string(values.size()));
}

FeatureVolume direct_conv(const FeatureVolume& v, const Conv& conv) {
  const ShapeSpec out_shape = output_shape(LayerSpec{conv}, v.shape);
  const auto w = as_2d(conv.kernel, conv.padding, conv.dilation, conv.stride);
  const auto [ih, iw] = spatial_2d(v.shape);
  const auto [oh, ow] = spatial_2d(out_shape);
  const std::size_t in_c = v.shape.channels;

  std::vector<double> out(out_shape.size(), 0.0);
  for (std::size_t o = 0; o < conv.out_channels; ++o)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t c = 0; c < in_c; ++c)
          for (std::size_t ky = 0; ky < w.kh; ++ky)
            for (std::size_t kx = 0; kx < w.kw; ++kx) {
              // position in the unpadded input; out-of-range means padding
              const auto py = static_cast<std::ptrdiff_t>(y * w.sh + ky * w.dh) - static_cast<std::ptrdiff_t>(w.ph);
              const auto px = static_cast<std::ptrdiff_t>(x * w.sw + kx * w.dw) - static_cast<std::ptrdiff_t>(w.pw);
              if (py < 0 || px < 0 || py >= static_cast<std::ptrdiff_t>(ih) ||
                  px >= static_cast<std::ptrdiff_t>(iw))
                continue;
              const double weight = conv.weights[((o * in_c + c) * w.kh + ky) * w.kw + kx];
              acc += weight * v.values[(c * ih + static_cast<std::size_t>(py)) * iw + static_cast<std::size_t>(px)];
            }
        out[(o * oh + y) * ow + x] = acc;
      }
  return FeatureVolume(out_shape, std::move(out));
}

FeatureVolume direct_avgpool(const FeatureVolume& v, const AvgPool& pool) {
  const ShapeSpec out_shape = output_shape(LayerSpec{pool}, v.shape);
  const std::vector<std::size_t> ones(pool.kernel.size(), 1);
  const auto w = as_2d(pool.kernel, pool.padding, ones, pool.stride);
  const auto [ih, iw] = spatial_2d(v.shape);
  const auto [oh, ow] = spatial_2d(out_shape);
  const double inv = 1.0 / static_cast<double>(w.kh * w.kw);

  std::vector<double> out(out_shape.size(), 0.0);
  for (std::size_t c = 0; c < v.shape.channels; ++c)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t ky = 0; ky < w.kh; ++ky)
          for (std::size_t kx = 0; kx < w.kw; ++kx) {
            const auto py = static_cast<std::ptrdiff_t>(y * w.sh + ky) - static_cast<std::ptrdiff_t>(w.ph);
            const auto px = static_cast<std::ptrdiff_t>(x * w.sw + kx) - static_cast<std::ptrdiff_t>(w.pw);
            if (py < 0 || px < 0 || py >= static_cast<std::ptrdiff_t>(ih) ||
                px >= static_cast<std::ptrdiff_t>(iw))
              continue;
            acc += inv * v.values[(c * ih + static_cast<std::size_t>(py)) * iw + static_cast<std::size_t>(px)];
          }
        out[(c * oh + y) * ow + x] = acc;
      }
  return FeatureVolume(out_shape, std::move(out));
}

FeatureVolume direct_dropout(const FeatureVolume& v, std::span<const std::uint8_t> mask) {
  if (mask.size() != v.values.size())
    throw DimensionError("dropout mask has " + std::to_string(mask.size()) + " entries, volume has " +
                         std::to_string(v.values.size()));
  std::vector<double> out(v.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] ? v.values[i] : 0.0;
  return FeatureVolume(v.shape, std::move(out));
}

FeatureVolume direct_flatten(const FeatureVolume& v, ElementOrder order) {
  const ShapeSpec flat{1, {v.shape.size()}};
  if (order == ElementOrder::channel_major) return FeatureVolume(flat, v.values);
  const std::size_t channels = v.shape.channels;
  const std::size_t spatial = v.shape.spatial_size();
  std::vector<double> out(v.values.size());
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t s = 0; s < spatial; ++s) out[s * channels + c] = v.values[c * spatial + s];
  return FeatureVolume(flat, std::move(out));
}

FeatureVolume apply_linear(const FeatureVolume& v, const LayerSpec& layer, ElementOrder order) {
  if (const auto* c = std::get_if<Conv>(&layer)) return direct_conv(v, *c);
  if (const auto* p = std::get_if<AvgPool>(&layer)) return direct_avgpool(v, *p);
  if (const auto* r = std::get_if<Dropout>(&layer)) {
    if (!r->mask) return v;
    return direct_dropout(v, *r->mask);
  }
  if (std::holds_alternative<Flatten>(layer)) return direct_flatten(v, order);
  throw Error("apply_linear: respro is not a linear layer");
}

std::vector<std::uint8_t> sample_dropout_mask(std::size_t n, double rate, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout rate must lie in [0, 1)");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<std::uint8_t> mask(n);
  for (auto& m : mask) m = uniform(rng) > rate ? 1 : 0;
  return mask;
}

HomVector sequential_forward_hom(const NetworkSpec& net, std::span<const double> x,
                                 const SequentialOptions& opts) {
  validate(net);
  if (x.size() != net.input.size())
    throw DimensionError("input has " + std::to_string(x.size()) + " values, network expects " +
                         std::to_string(net.input.size()));
  const HomVector encoded = encode(x, opts.encoding.value_or(net.encoding));
  const std::vector<double> alphas = opts.alphas ? *opts.alphas : estimate_alphas(net);

  FeatureVolume volume(net.input, {x.begin(), x.end()});
  double homo = encoded.homo();
  std::size_t respro_index = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    if (std::holds_alternative<ReSPro>(layer)) {
      if (respro_index >= alphas.size()) throw Error("fewer alphas than respro layers");
      const ResProParams params(alphas[respro_index++], volume.values.size());
      const HomVector y = respro_direct(HomVector(volume.values, homo), params);
      homo = y.homo();
      volume = FeatureVolume(volume.shape, {y.data().begin(), y.data().end()});
    } else if (const auto* d = std::get_if<Dropout>(&layer);
               d && !d->mask && opts.dropout == DropoutMode::training) {
      if (!opts.rng) throw Error("training-mode dropout needs a random generator");
      const auto mask = sample_dropout_mask(volume.values.size(), d->rate, *opts.rng);
      volume = direct_dropout(volume, mask);
    } else {
      volume = apply_linear(volume, layer, net.order);
    }
    if (opts.counter) opts.counter->record(volume.values.size() + 1);
  }
  return HomVector(volume.values, homo);
}

std::vector<double> sequential_forward(const NetworkSpec& net, std::span<const double> x,
                                       const SequentialOptions& opts) {
  return decode_output(sequential_forward_hom(net, x, opts));
}

}  // namespace conformal
