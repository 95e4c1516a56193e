#include "conformal/respro.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "conformal/error.hpp"

namespace conformal {

namespace {

double squared_norm(std::span<const double> x) {
  return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

ResProParams::ResProParams(double a, std::size_t d) : alpha(a), dim(d) {
  if (!(std::isfinite(alpha) && alpha > 0.0)) throw Error("respro alpha must be positive and finite");
  if (dim == 0) throw DimensionError("respro dimension must be at least 1");
}

HomVector respro_direct(const HomVector& x, const ResProParams& p) {
  if (x.dim() != p.dim)
    throw DimensionError("respro expects dimension " + std::to_string(p.dim) + ", got " +
                         std::to_string(x.dim()));
  const double homo = 0.5 * p.alpha * x.homo() + squared_norm(x.data()) / (2.0 * p.alpha);
  return HomVector(x.data(), homo);
}

ResProTensors respro_tensors(const ResProParams& p) {
  const std::size_t n = p.dim + 1;
  std::vector<double> fm(n, 1.0);
  fm.back() = p.alpha / 2.0;
  std::vector<double> slice(n, 1.0 / (2.0 * p.alpha));
  slice.back() = 0.0;
  return {SparseOperator::diagonal(fm), BottomSliceTensor(n, SparseOperator::diagonal(slice))};
}

HomVector respro_apply_tensors(const ResProTensors& t, const HomVector& x) {
  return spmv(add(t.fm, t.ft.contract(x)), x);
}

ClosedFormResult respro_closed_form(std::span<const double> x, double alpha) {
  if (!(std::isfinite(alpha) && alpha > 0.0)) throw Error("respro alpha must be positive and finite");
  const double r2 = squared_norm(x);
  const double scale = 2.0 * alpha / (alpha * alpha + r2);
  ClosedFormResult out;
  out.y.resize(x.size());
  std::ranges::transform(x, out.y.begin(), [scale](double v) { return scale * v; });
  out.outside_domain = std::sqrt(r2) > alpha;
  return out;
}

std::vector<double> respro_inverse(std::span<const double> y, double alpha) {
  if (!(std::isfinite(alpha) && alpha > 0.0)) throw Error("respro alpha must be positive and finite");
  const double s2 = squared_norm(y);
  if (s2 > 1.0) throw Error("outside range: respro outputs have norm at most 1");
  std::vector<double> x(y.size(), 0.0);
  if (s2 == 0.0) return x;
  // r / ||y|| with r = alpha (1 - sqrt(1 - s^2)) / s, rewritten to avoid
  // cancellation for small s: (1 - sqrt(1 - s^2)) = s^2 / (1 + sqrt(1 - s^2)).
  const double factor = alpha / (1.0 + std::sqrt(1.0 - s2));
  std::ranges::transform(y, x.begin(), [factor](double v) { return factor * v; });
  return x;
}

DenseMatrix respro_jacobian(std::span<const double> x, double alpha) {
  if (!(std::isfinite(alpha) && alpha > 0.0)) throw Error("respro alpha must be positive and finite");
  const double denom = alpha * alpha + squared_norm(x);
  const double diag = 2.0 * alpha / denom;
  const double outer = 4.0 * alpha / (denom * denom);
  const std::size_t d = x.size();
  DenseMatrix j(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) j(r, c) = -outer * x[r] * x[c];
    j(r, r) += diag;
  }
  return j;
}

std::vector<double> kernel_l1_norms(const Conv& conv) {
  std::vector<double> norms(conv.out_channels, 0.0);
  if (conv.out_channels == 0) return norms;
  const std::size_t per_channel = conv.weights.size() / conv.out_channels;
  for (std::size_t o = 0; o < conv.out_channels; ++o)
    for (std::size_t i = 0; i < per_channel; ++i)
      norms[o] += std::abs(conv.weights[o * per_channel + i]);
  return norms;
}

NormBound propagate_bound(NormBound b, const LayerSpec& layer, ChannelBound mode) {
  if (!(std::isfinite(b.bound) && b.bound >= 0.0)) throw Error("norm bound must be finite and non-negative");
  return std::visit(
      Overloaded{
          [&](const Conv& c) {
            const auto norms = kernel_l1_norms(c);
            double factor = norms.empty() ? 0.0 : *std::ranges::max_element(norms);
            if (mode == ChannelBound::whole_volume)
              factor *= std::sqrt(static_cast<double>(c.out_channels));
            return NormBound{b.bound * factor};
          },
          [&](const ReSPro&) { return NormBound{1.0}; },
          [&](const auto&) { return b; },
      },
      layer);
}

double estimate_alpha(NormBound bound_before_respro) {
  const double b = bound_before_respro.bound;
  if (!std::isfinite(b) || b < 0.0) throw Error("norm bound must be finite and non-negative");
  if (b == 0.0) throw Error("degenerate bound: alpha would be zero");
  return b;
}

std::vector<double> estimate_alphas(const NetworkSpec& net, ChannelBound mode) {
  std::vector<double> alphas;
  NormBound bound{net.input_bound};
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    if (const auto* r = std::get_if<ReSPro>(&layer)) {
      if (r->alpha) {
        alphas.push_back(*r->alpha);
      } else {
        try {
          alphas.push_back(estimate_alpha(bound));
        } catch (const Error& e) {
          throw Error("layer " + std::to_string(i) + " (respro): " + e.what());
        }
      }
    }
    bound = propagate_bound(bound, layer, mode);
  }
  return alphas;
}

}  // namespace conformal
