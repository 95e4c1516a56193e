#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "conformal/fusion.hpp"
#include "conformal/network.hpp"

namespace conformal {

/// Desk-scale stand-in for the depth experiment: k blocks of
/// 3x3 conv (pad 1, stride 1, no bias) followed by ReSPro.
struct DepthNetOptions {
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t in_channels = 3;
  std::size_t channels = 8;
};

/// Desk-scale stand-in for the batch experiment: three stages of
/// 3x3 conv (no padding) + ReSPro + 2x2 average pooling with stride 1.
struct ThreeStageOptions {
  std::size_t height = 12;
  std::size_t width = 12;
  std::size_t in_channels = 3;
  std::size_t channels = 8;
};

/// Conv weights are drawn uniformly from [-0.5, 0.5).
NetworkSpec make_depth_net(std::size_t k, std::uint64_t seed, const DepthNetOptions& opts = {});
NetworkSpec make_three_stage_net(std::uint64_t seed, const ThreeStageOptions& opts = {});

/// Uniform samples in [lo, hi).
std::vector<std::vector<double>> random_inputs(std::size_t count, std::size_t dim, std::uint64_t seed,
                                               double lo = -1.0, double hi = 1.0);

/// max_i |a_i - b_i| / max(max_i |b_i|, 1e-300); 0 when both are all-zero.
double relative_error(std::span<const double> a, std::span<const double> b);

struct VerifyReport {
  std::size_t trials = 0;
  double max_relative_error = 0.0;
};

/// Runs `trials` random inputs through the fused and the sequential path.
/// `corrupt_cache` perturbs one L_M entry first (negative control).
VerifyReport verify_network(const NetworkSpec& net, std::size_t trials, std::uint64_t seed,
                            bool corrupt_cache = false);

enum class BenchMode { fused, sequential };

struct BenchRecord {
  BenchMode mode = BenchMode::fused;
  std::size_t k = 0;
  std::size_t batch = 0;
  std::size_t reps = 0;
  double median_ns = 0.0;
  std::size_t buffers = 0;   ///< intermediate buffers per image
  std::size_t elements = 0;  ///< intermediate elements per image
  std::size_t nnz_lm = 0;
  std::size_t nnz_q = 0;
};

struct BenchConfig {
  std::size_t reps = 5;
  std::uint64_t seed = 0;
  /// Images per timed call in the depth benchmark.
  std::size_t batch = 16;
  /// Fused and sequential outputs must agree to this relative error.
  double tolerance = 1e-9;
};

/// Thrown when fused and sequential outputs disagree during a benchmark.
class BenchMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two records (fused, sequential) per depth, in k_list order.
std::vector<BenchRecord> bench_depth(std::span<const std::size_t> k_list, const BenchConfig& cfg,
                                     const DepthNetOptions& opts = {});

/// Two records per batch size on the three-stage network.
std::vector<BenchRecord> bench_batch(std::span<const std::size_t> sizes, const BenchConfig& cfg,
                                     const ThreeStageOptions& opts = {});

inline constexpr const char* kBenchCsvHeader = "mode,k,batch,reps,median_ns,buffers,elements,nnz_LM,nnz_Q";

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records);

/// Median of at least one sample.
double median(std::vector<double> samples);

}  // namespace conformal
