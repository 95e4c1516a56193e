#include <gtest/gtest.h>

#include <sstream>

#include "conformal/error.hpp"

#include "conformal/bench.hpp"
#include "conformal/fusion.hpp"
#include "conformal/reference.hpp"

using namespace conformal;

TEST(Generators, Shapes) {
  const NetworkSpec depth = make_depth_net(3, 1);
  EXPECT_EQ(depth.layers.size(), 6u);
  EXPECT_EQ(infer_shapes(depth).back(), (ShapeSpec{8, {8, 8}}));
  const NetworkSpec three = make_three_stage_net(1);
  EXPECT_EQ(three.layers.size(), 9u);
  EXPECT_EQ(infer_shapes(three).back(), (ShapeSpec{8, {3, 3}}));
  EXPECT_EQ(make_depth_net(2, 5), make_depth_net(2, 5));
}

TEST(BenchDepth, SingleDepthGivesTwoRecords) {
  BenchConfig cfg;
  cfg.batch = 2;
  const std::vector<std::size_t> ks{2};
  const auto recs = bench_depth(ks, cfg);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].mode, BenchMode::fused);
  EXPECT_EQ(recs[1].mode, BenchMode::sequential);
  EXPECT_GT(recs[0].median_ns, 0.0);
  EXPECT_EQ(recs[0].reps, 5u);
  EXPECT_EQ(recs[0].buffers, 1u);
  EXPECT_EQ(recs[1].buffers, 4u);
  EXPECT_THROW(bench_depth(std::span<const std::size_t>{}, cfg), Error);
}

TEST(BenchBatch, SequentialElementsDominate) {
  BenchConfig cfg;
  const std::vector<std::size_t> sizes{1};
  const auto recs = bench_batch(sizes, cfg);
  ASSERT_EQ(recs.size(), 2u);
  // 800 + 800 + 648 + 392 + 392 + 288 + 128 + 128 + 72 values plus one homogeneous
  // slot per buffer, against a single 72 + 1 output
  EXPECT_EQ(recs[1].elements, 3648u + 9u);
  EXPECT_EQ(recs[0].elements, 73u);
  EXPECT_GE(recs[1].elements, 3 * recs[0].elements);
}

TEST(BenchBatch, BatchOfOneMatchesOracle) {
  const NetworkSpec net = make_three_stage_net(4);
  const auto x = random_inputs(1, net.input.size(), 2, 0.0, 1.0).front();
  ConformalSequence seq(net);
  EXPECT_LE(relative_error(seq.forward(x), sequential_forward(net, x)), 1e-9);
}

TEST(BenchCsv, Format) {
  std::ostringstream out;
  write_bench_csv(out, {{BenchMode::fused, 2, 16, 5, 1234.4, 1, 513, 10, 20},
                        {BenchMode::sequential, 2, 16, 5, 99.6, 4, 2052, 0, 0}});
  EXPECT_EQ(out.str(),
            "mode,k,batch,reps,median_ns,buffers,elements,nnz_LM,nnz_Q\n"
            "fused,2,16,5,1234,1,513,10,20\n"
            "sequential,2,16,5,100,4,2052,0,0\n");
}

TEST(Helpers, MedianAndRelativeError) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), Error);
  EXPECT_EQ(relative_error(std::vector<double>{0, 0}, std::vector<double>{0, 0}), 0.0);
  EXPECT_EQ(relative_error(std::vector<double>{1, 2}, std::vector<double>{1, 4}), 0.5);
  EXPECT_THROW(relative_error(std::vector<double>{1}, std::vector<double>{1, 2}), DimensionError);
}

TEST(Verify, CorruptedCacheIsDetected) {
  const NetworkSpec net = make_depth_net(1, 3, {4, 4, 1, 2});
  EXPECT_LE(verify_network(net, 10, 1).max_relative_error, 1e-9);
  EXPECT_GT(verify_network(net, 10, 1, true).max_relative_error, 1e-9);
}
