#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "conformal/bench.hpp"
#include "conformal/error.hpp"
#include "conformal/fusion.hpp"
#include "conformal/reference.hpp"
#include "conformal/respro.hpp"
#include "support.hpp"

using namespace conformal;
namespace ts = testing_support;

namespace {

NetworkSpec respro_net(std::size_t d, std::vector<double> alphas) {
  NetworkSpec net;
  net.input = {1, {d}};
  net.encoding = Encoding::canonical;
  for (double a : alphas) net.layers.push_back(ReSPro{a});
  return net;
}

Conv conv1d(std::vector<double> w, std::size_t pad = 0, std::size_t stride = 1) {
  Conv c;
  c.kernel = {w.size()};
  c.weights = std::move(w);
  c.padding = {pad};
  c.dilation = {1};
  c.stride = {stride};
  return c;
}

}  // namespace

TEST(BuildCache, SingleReSPro) {
  const auto cache = build_cache(lower_network(respro_net(3, {2.0})));
  EXPECT_EQ(cache.lm.to_dense(), SparseOperator::diagonal(std::vector<double>{1, 1, 1, 1}).to_dense());
  EXPECT_EQ(cache.q.to_dense(), SparseOperator::diagonal(std::vector<double>{0.25, 0.25, 0.25, 0}).to_dense());
}

TEST(BuildCache, TwoIdentityStages) {
  const double a1 = 2.0, a2 = 5.0;
  const auto cache = build_cache(lower_network(respro_net(2, {a1, a2})));
  const auto fm1 = SparseOperator::diagonal(std::vector<double>{1, 1, a1 / 2});
  const auto fm2 = SparseOperator::diagonal(std::vector<double>{1, 1, a2 / 2});
  EXPECT_EQ(cache.lm, spmm(fm2, fm1));
  const auto t1 = respro_tensors(ResProParams(a1, 2)).ft.slice();
  const auto t2 = respro_tensors(ResProParams(a2, 2)).ft.slice();
  const auto expect = add(t1.scaled(a2 / 2), spmm(fm1.transposed(), spmm(t2, fm1)));
  const DenseMatrix got = cache.q.to_dense(), want = expect.to_dense();
  EXPECT_LE(ts::max_abs_diff(got.values(), want.values()), 1e-15);
}

TEST(BuildCache, BottomRowOfLmIsHomogeneousOnly) {
  std::mt19937_64 rng(17);
  const auto cache = build_cache(lower_network(ts::random_network(rng)));
  const DenseMatrix lm = cache.lm.to_dense();
  for (std::size_t c = 0; c + 1 < lm.cols(); ++c) EXPECT_EQ(lm(lm.rows() - 1, c), 0.0);
  EXPECT_NE(lm(lm.rows() - 1, lm.cols() - 1), 0.0);
  EXPECT_EQ(cache.q.rows(), cache.d_in + 1);
}

TEST(FusedForward, Examples) {
  const auto cache = build_cache(lower_network(respro_net(2, {3.0})));
  const HomVector y = fused_forward(cache, encode(std::vector<double>{3, 0}, Encoding::canonical));
  EXPECT_EQ(decode(y), (std::vector<double>{1, 0}));
  EXPECT_EQ(decode(y), respro_closed_form(std::vector<double>{3, 0}, 3.0).y);

  NetworkSpec identity;
  identity.input = {1, {3}};
  const auto id_cache = build_cache(lower_network(identity));
  const HomVector x(std::vector<double>{1, -2, 3, 0.5});
  EXPECT_EQ(fused_forward(id_cache, x), x);
  EXPECT_THROW(fused_forward(id_cache, HomVector(std::vector<double>{1, 1})), DimensionError);
}

TEST(FusedForward, OneBuffer) {
  for (std::size_t k : {1u, 3u, 6u}) {
    const auto cache = build_cache(lower_network(respro_net(4, std::vector<double>(k, 1.5))));
    AllocationCounter counter;
    fused_forward(cache, HomVector(std::vector<double>{1, 2, 3, 4, 1}), &counter);
    EXPECT_EQ(counter.feature_map_buffers(), 1u);
    EXPECT_EQ(counter.feature_map_elements(), 5u);
  }
}

TEST(FusedForward, BatchMatchesSingles) {
  std::mt19937_64 rng(5);
  const NetworkSpec net = ts::random_network(rng);
  const auto lowered = lower_network(net);
  const auto cache = build_cache(lowered);
  std::vector<HomVector> samples;
  for (int i = 0; i < 64; ++i) samples.push_back(encode(ts::uniform_vector(rng, lowered.d_in), Encoding::norm));
  samples.push_back(samples.front());
  const Batch out = fused_forward_batch(cache, Batch(samples));
  for (std::size_t i = 0; i < samples.size(); ++i) EXPECT_EQ(out[i], fused_forward(cache, samples[i]));
  EXPECT_EQ(out[0], out[64]);
  const Batch one = fused_forward_batch(cache, Batch({samples[3]}));
  EXPECT_EQ(one[0], fused_forward(cache, samples[3]));
}

TEST(FusedForward, MatchesNestedRecursionAndExpansion) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const NetworkSpec net = ts::random_network(rng);
    const auto lowered = lower_network(net);
    const auto cache = build_cache(lowered);
    const HomVector x = encode(ts::uniform_vector(rng, lowered.d_in), net.encoding);
    const HomVector fused = fused_forward(cache, x);
    const auto nested = ts::nested_recursion(lowered, x.coeffs());
    const auto expanded = ts::induction_expansion(lowered, x.coeffs());
    const double scale = std::max(1.0, ts::norm2(nested));
    EXPECT_LE(ts::max_abs_diff(fused.coeffs(), nested), 1e-11 * scale) << "trial " << trial;
    EXPECT_LE(ts::max_abs_diff(expanded, nested), 1e-11 * scale) << "trial " << trial;
  }
}

TEST(FusedForward, MatchesSequentialOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const NetworkSpec net = ts::random_network(rng);
    const auto report = verify_network(net, 3, rng());
    EXPECT_LE(report.max_relative_error, 1e-9) << "trial " << trial;
  }
}

TEST(FusedForward, SharedDropoutMask) {
  NetworkSpec net;
  net.input = {1, {5}};
  net.layers = {conv1d({0.5, 1.0}), Dropout{0.5, std::vector<std::uint8_t>{1, 0, 0, 1}}, ReSPro{}};
  ConformalSequence seq(net);
  const std::vector<double> x{0.1, 0.2, -0.3, 0.4, 0.5};
  const auto fused = seq.forward(x);
  const auto oracle = sequential_forward(net, x);
  EXPECT_LE(relative_error(fused, oracle), 1e-12);
  EXPECT_EQ(fused[1], 0.0);
  EXPECT_EQ(fused[2], 0.0);
}

TEST(DenseExpand, KEqualsThreeBottomSlice) {
  std::mt19937_64 rng(99);
  ts::RandomNetOptions opts;
  opts.max_respro = 3;
  opts.max_d_in = 8;
  for (int trial = 0; trial < 10; ++trial) {
    const NetworkSpec net = ts::random_network(rng, opts);
    const auto lowered = lower_network(net);
    const auto lt = dense_expand_LT(lowered);
    const auto q = build_cache(lowered).q.to_dense();
    for (std::size_t i = 0; i + 1 < lt.dim1(); ++i)
      for (std::size_t j = 0; j < lt.dim2(); ++j)
        for (std::size_t k = 0; k < lt.dim3(); ++k) EXPECT_EQ(lt(i, j, k), 0.0);
    const auto bottom = lt.slice(lt.dim1() - 1);
    EXPECT_LE(ts::max_abs_diff(bottom.values(), q.values()), 1e-12);

    // (L_M + L_T X) X with the full dense tensor
    const HomVector x = encode(ts::uniform_vector(rng, lowered.d_in), net.encoding);
    const auto lm = build_cache(lowered).lm.to_dense();
    const DenseMatrix ltx = lt.contract(x.coeffs());
    std::vector<double> y(lm.rows(), 0.0);
    for (std::size_t r = 0; r < lm.rows(); ++r)
      for (std::size_t c = 0; c < lm.cols(); ++c) y[r] += (lm(r, c) + ltx(r, c)) * x.coeffs()[c];
    const auto nested = ts::nested_recursion(lowered, x.coeffs());
    EXPECT_LE(ts::max_abs_diff(y, nested), 1e-11 * std::max(1.0, ts::norm2(nested)));
  }
}

TEST(DenseExpand, Guards) {
  EXPECT_THROW(dense_expand_LT(lower_network(respro_net(9, {1.0}))), Error);
  EXPECT_THROW(dense_expand_LT(lower_network(respro_net(2, {1, 1, 1, 1}))), Error);
  EXPECT_NO_THROW(dense_expand_LT(lower_network(respro_net(8, {1, 1, 1}))));
}

TEST(DenseTensor3, TransposeAndProducts) {
  DenseTensor3 t(2, 3, 2);
  t(1, 2, 0) = 5.0;
  const auto tt = t.transposed12();
  EXPECT_EQ(tt.dim1(), 3u);
  EXPECT_EQ(tt(2, 1, 0), 5.0);
  DenseMatrix a(1, 2);
  a(0, 1) = 2.0;
  EXPECT_EQ((a * t)(0, 2, 0), 10.0);
  DenseMatrix b(2, 1);
  b(0, 0) = 3.0;
  EXPECT_EQ((t * b)(1, 2, 0), 15.0);
  EXPECT_THROW(b * t, DimensionError);
}

TEST(LowerNetwork, StagePartition) {
  NetworkSpec net;
  net.input = {1, {6}};
  net.layers = {conv1d({1, 1}), AvgPool{{1}, {0}, {1}}, ReSPro{}, ReSPro{2.0}, conv1d({1})};
  const auto lowered = lower_network(net);
  ASSERT_EQ(lowered.stages.size(), 3u);
  EXPECT_EQ(lowered.stages[0].first_layer, 0u);
  EXPECT_EQ(lowered.stages[0].end_layer, 3u);
  EXPECT_EQ(lowered.stages[1].linear, SparseOperator::identity(6));
  EXPECT_EQ(lowered.stages[1].alpha, 2.0);
  EXPECT_FALSE(lowered.stages[2].alpha.has_value());
  EXPECT_EQ(lowered.d_in, 6u);
  EXPECT_EQ(lowered.d_out, 5u);
}

TEST(LowerNetwork, ErrorsNameTheLayer) {
  NetworkSpec net;
  net.input = {1, {2}};
  net.layers = {ReSPro{}, conv1d({1, 1, 1})};
  try {
    lower_network(net);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(ConformalSequence, Invalidation) {
  NetworkSpec net;
  net.input = {1, {4}};
  net.layers = {conv1d({0.5, -0.25}), ReSPro{}, conv1d({1.0, 2.0}), ReSPro{}};
  ConformalSequence seq(net);
  EXPECT_FALSE(seq.is_valid());
  const std::vector<double> x{0.3, -0.1, 0.7, 0.2};
  const auto before = seq.forward(x);
  EXPECT_TRUE(seq.is_valid());
  seq.forward(x);
  EXPECT_TRUE(seq.is_valid());

  seq.set_conv_weights(2, {-1.0, 0.5});
  EXPECT_FALSE(seq.is_valid());
  const auto after = seq.forward(x);
  EXPECT_TRUE(seq.is_valid());
  EXPECT_NE(before, after);
  EXPECT_LE(relative_error(after, sequential_forward(seq.network(), x)), 1e-12);
  EXPECT_EQ(seq.alphas(), (std::vector<double>{0.75, 1.5}));

  EXPECT_THROW(seq.set_conv_weights(1, {1.0}), Error);
  EXPECT_THROW(seq.set_conv_weights(9, {1.0}), Error);
  EXPECT_TRUE(seq.is_valid());
  seq.set_layer(1, ReSPro{4.0});
  EXPECT_FALSE(seq.is_valid());
  seq.cache();
  seq.invalidate();
  EXPECT_FALSE(seq.is_valid());
}
