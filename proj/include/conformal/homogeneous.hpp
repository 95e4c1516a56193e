#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace conformal {

/// Floor applied to the homogeneous coefficient. Norm encoding of the origin
/// uses it, and decoding refuses anything smaller in magnitude.
inline constexpr double kHomogeneousFloor = 1e-12;

enum class Encoding {
  canonical,  ///< x'_o = 1
  norm,       ///< x'_o = max(||x||_2, floor)
};

/// A point x in R^d stored as (x'_1, ..., x'_d, x'_o) with x_i = x'_i / x'_o.
///
/// Index convention used everywhere in this library: coefficients are 0-based
/// and the homogeneous coefficient is the last one, so a d-dimensional point
/// occupies d + 1 contiguous doubles.
class HomVector {
 public:
  HomVector(std::span<const double> data, double homo);
  /// Takes ownership of a full coefficient vector whose last entry is x'_o.
  explicit HomVector(std::vector<double> coeffs);

  std::size_t dim() const { return coeffs_.size() - 1; }
  std::span<const double> data() const { return {coeffs_.data(), dim()}; }
  double homo() const { return coeffs_.back(); }
  /// All d + 1 coefficients, homogeneous last.
  std::span<const double> coeffs() const { return coeffs_; }

  friend bool operator==(const HomVector&, const HomVector&) = default;

 private:
  std::vector<double> coeffs_;
};

HomVector encode(std::span<const double> x, Encoding mode);

/// Returns data / homo. Throws if |homo| is below kHomogeneousFloor.
std::vector<double> decode(const HomVector& v);

/// decode() for network outputs, which must have a positive coefficient.
std::vector<double> decode_output(const HomVector& v);

/// Non-empty collection of samples sharing one dimension.
class Batch {
 public:
  explicit Batch(std::vector<HomVector> samples);

  std::size_t size() const { return samples_.size(); }
  std::size_t dim() const { return samples_.front().dim(); }
  const HomVector& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<HomVector>& samples() const { return samples_; }

  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

 private:
  std::vector<HomVector> samples_;
};

/// Counts intermediate feature-map buffers requested during one forward pass.
/// Not thread-safe; use one counter per pass.
class AllocationCounter {
 public:
  void record(std::size_t elements) {
    ++buffers_;
    elements_ += elements;
  }
  void reset() {
    buffers_ = 0;
    elements_ = 0;
  }

  std::size_t feature_map_buffers() const { return buffers_; }
  std::size_t feature_map_elements() const { return elements_; }

 private:
  std::size_t buffers_ = 0;
  std::size_t elements_ = 0;
};

}  // namespace conformal
