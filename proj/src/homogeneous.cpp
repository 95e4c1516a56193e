#include "conformal/homogeneous.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "conformal/error.hpp"

namespace conformal {

namespace {

void require_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw Error("invalid input: non-finite coefficient");
  }
}

}  // namespace

HomVector::HomVector(std::span<const double> data, double homo)
    : coeffs_(data.begin(), data.end()) {
  if (data.empty()) throw DimensionError("HomVector needs at least one data coefficient");
  coeffs_.push_back(homo);
}

HomVector::HomVector(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.size() < 2) throw DimensionError("HomVector needs at least one data coefficient");
}

HomVector encode(std::span<const double> x, Encoding mode) {
  require_finite(x);
  if (mode == Encoding::canonical) return HomVector(x, 1.0);
  const double sq = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
  return HomVector(x, std::max(std::sqrt(sq), kHomogeneousFloor));
}

std::vector<double> decode(const HomVector& v) {
  const double h = v.homo();
  if (!(std::abs(h) >= kHomogeneousFloor)) throw Error("degenerate homogeneous coordinate");
  std::vector<double> out(v.dim());
  std::ranges::transform(v.data(), out.begin(), [h](double c) { return c / h; });
  return out;
}

std::vector<double> decode_output(const HomVector& v) {
  if (!(v.homo() > 0.0))
    throw Error("non-positive homogeneous output coefficient " + std::to_string(v.homo()));
  return decode(v);
}

Batch::Batch(std::vector<HomVector> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw DimensionError("batch must not be empty");
  const std::size_t d = samples_.front().dim();
  for (const auto& s : samples_) {
    if (s.dim() != d) throw DimensionError("batch samples must share one dimension");
  }
}

}  // namespace conformal
