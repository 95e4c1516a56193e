#include "conformal/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include "conformal/error.hpp"
#include "conformal/netspec_io.hpp"
#include "conformal/reference.hpp"
#include "conformal/respro.hpp"

namespace conformal {

namespace {

Conv random_conv3x3(std::size_t in_c, std::size_t out_c, std::size_t pad, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  Conv c;
  c.out_channels = out_c;
  c.kernel = {3, 3};
  c.padding = {pad, pad};
  c.dilation = {1, 1};
  c.stride = {1, 1};
  c.weights.resize(out_c * in_c * 9);
  for (auto& w : c.weights) w = dist(rng);
  return c;
}

template <class F>
double time_ns(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::nano>(stop - start).count();
}

// One warm-up call, then the median of `reps` timed calls.
template <class F>
double median_time_ns(std::size_t reps, F&& f) {
  f();
  std::vector<double> samples;
  samples.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) samples.push_back(time_ns(f));
  return median(std::move(samples));
}

std::size_t respro_count(const NetworkSpec& net) {
  return static_cast<std::size_t>(
      std::ranges::count_if(net.layers, [](const LayerSpec& l) { return std::holds_alternative<ReSPro>(l); }));
}

// Times both paths on the same inputs and checks that they agree.
std::vector<BenchRecord> bench_network(const NetworkSpec& net, std::size_t k, std::size_t batch_size,
                                       const BenchConfig& cfg) {
  if (cfg.reps == 0) throw Error("benchmark needs at least one repetition");
  const LoweredNetwork lowered = lower_network(net);
  const FusedCache cache = build_cache(lowered);
  std::vector<double> alphas;
  for (const auto& s : lowered.stages)
    if (s.alpha) alphas.push_back(*s.alpha);

  const auto inputs = random_inputs(batch_size, lowered.d_in, cfg.seed + 7919 * k + batch_size, 0.0, 1.0);
  std::vector<HomVector> encoded;
  for (const auto& x : inputs) encoded.push_back(encode(x, net.encoding));
  const Batch batch(std::move(encoded));

  SequentialOptions seq_opts;
  seq_opts.alphas = alphas;

  const Batch fused_out = fused_forward_batch(cache, batch);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto seq = sequential_forward(net, inputs[i], seq_opts);
    const auto fused = decode_output(fused_out[i]);
    const double err = relative_error(fused, seq);
    if (!(err <= cfg.tolerance))
      throw BenchMismatch("fused and sequential outputs differ (relative error " + format_double(err) + ")");
  }

  AllocationCounter fused_counter;
  fused_forward(cache, batch[0], &fused_counter);
  AllocationCounter seq_counter;
  SequentialOptions counted = seq_opts;
  counted.counter = &seq_counter;
  sequential_forward_hom(net, inputs[0], counted);

  BenchRecord fused{BenchMode::fused, k, batch_size, cfg.reps, 0.0,
                    fused_counter.feature_map_buffers(), fused_counter.feature_map_elements(),
                    cache.lm.nnz(), cache.q.nnz()};
  fused.median_ns = median_time_ns(cfg.reps, [&] {
    const Batch out = fused_forward_batch(cache, batch);
    (void)out;
  });

  BenchRecord sequential{BenchMode::sequential, k, batch_size, cfg.reps, 0.0,
                         seq_counter.feature_map_buffers(), seq_counter.feature_map_elements(), 0, 0};
  sequential.median_ns = median_time_ns(cfg.reps, [&] {
    for (const auto& x : inputs) {
      const HomVector y = sequential_forward_hom(net, x, seq_opts);
      (void)y;
    }
  });
  return {fused, sequential};
}

}  // namespace

double median(std::vector<double> samples) {
  if (samples.empty()) throw Error("median of an empty sample");
  std::ranges::sort(samples);
  const std::size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

NetworkSpec make_depth_net(std::size_t k, std::uint64_t seed, const DepthNetOptions& opts) {
  std::mt19937_64 rng(seed);
  NetworkSpec net;
  net.input = {opts.in_channels, {opts.height, opts.width}};
  std::size_t channels = opts.in_channels;
  for (std::size_t i = 0; i < k; ++i) {
    net.layers.emplace_back(random_conv3x3(channels, opts.channels, 1, rng));
    net.layers.emplace_back(ReSPro{});
    channels = opts.channels;
  }
  return net;
}

NetworkSpec make_three_stage_net(std::uint64_t seed, const ThreeStageOptions& opts) {
  std::mt19937_64 rng(seed);
  NetworkSpec net;
  net.input = {opts.in_channels, {opts.height, opts.width}};
  std::size_t channels = opts.in_channels;
  for (int stage = 0; stage < 3; ++stage) {
    net.layers.emplace_back(random_conv3x3(channels, opts.channels, 0, rng));
    net.layers.emplace_back(ReSPro{});
    net.layers.emplace_back(AvgPool{{2, 2}, {0, 0}, {1, 1}});
    channels = opts.channels;
  }
  return net;
}

std::vector<std::vector<double>> random_inputs(std::size_t count, std::size_t dim, std::uint64_t seed,
                                               double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<std::vector<double>> out(count, std::vector<double>(dim));
  for (auto& x : out)
    for (auto& v : x) v = dist(rng);
  return out;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("relative_error: lengths differ");
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  if (std::isnan(diff)) return diff;
  if (diff == 0.0) return 0.0;
  return diff / std::max(scale, 1e-300);
}

VerifyReport verify_network(const NetworkSpec& net, std::size_t trials, std::uint64_t seed, bool corrupt_cache) {
  const LoweredNetwork lowered = lower_network(net);
  FusedCache cache = build_cache(lowered);
  std::vector<double> alphas;
  for (const auto& s : lowered.stages)
    if (s.alpha) alphas.push_back(*s.alpha);

  if (corrupt_cache) {
    auto entries = cache.lm.triplets();
    if (!entries.empty()) entries.front().value += 0.5 + std::abs(entries.front().value);
    cache.lm = SparseOperator::from_triplets(cache.lm.rows(), cache.lm.cols(), std::move(entries));
  }

  SequentialOptions opts;
  opts.alphas = alphas;
  VerifyReport report;
  report.trials = trials;
  for (const auto& x : random_inputs(trials, lowered.d_in, seed)) {
    const auto fused = decode_output(fused_forward(cache, encode(x, net.encoding)));
    const auto seq = sequential_forward(net, x, opts);
    const double err = relative_error(fused, seq);
    report.max_relative_error = std::isnan(err) ? err : std::max(report.max_relative_error, err);
  }
  return report;
}

std::vector<BenchRecord> bench_depth(std::span<const std::size_t> k_list, const BenchConfig& cfg,
                                     const DepthNetOptions& opts) {
  if (k_list.empty()) throw Error("bench-depth needs at least one depth");
  std::vector<BenchRecord> out;
  for (std::size_t k : k_list) {
    const NetworkSpec net = make_depth_net(k, cfg.seed + k, opts);
    auto recs = bench_network(net, respro_count(net), cfg.batch, cfg);
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

std::vector<BenchRecord> bench_batch(std::span<const std::size_t> sizes, const BenchConfig& cfg,
                                     const ThreeStageOptions& opts) {
  if (sizes.empty()) throw Error("bench-batch needs at least one batch size");
  const NetworkSpec net = make_three_stage_net(cfg.seed, opts);
  std::vector<BenchRecord> out;
  for (std::size_t size : sizes) {
    if (size == 0) throw Error("batch sizes must be positive");
    auto recs = bench_network(net, respro_count(net), size, cfg);
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << kBenchCsvHeader << '\n';
  for (const auto& r : records) {
    out << (r.mode == BenchMode::fused ? "fused" : "sequential") << ',' << r.k << ',' << r.batch << ','
        << r.reps << ',' << format_double(std::round(r.median_ns)) << ',' << r.buffers << ',' << r.elements
        << ',' << r.nnz_lm << ',' << r.nnz_q << '\n';
  }
}

}  // namespace conformal
