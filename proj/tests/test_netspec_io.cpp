#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "conformal/bench.hpp"
#include "conformal/error.hpp"
#include "conformal/netspec_io.hpp"
#include "support.hpp"

using namespace conformal;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_network(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseNetwork, Minimal) {
  const NetworkSpec net = parse_network(R"({"input": [3], "layers": [{"type": "respro", "alpha": 3}]})");
  EXPECT_EQ(net.input, (ShapeSpec{1, {3}}));
  ASSERT_EQ(net.layers.size(), 1u);
  EXPECT_EQ(std::get<ReSPro>(net.layers[0]).alpha, 3.0);
  EXPECT_EQ(net.encoding, Encoding::norm);
}

TEST(ParseNetwork, ScalarAndArrayFields) {
  const NetworkSpec net = parse_network(R"({
    "input": [4, 4], "channels": 2, "order": "channel_last", "encoding": "canonical", "input_bound": 2.5,
    "layers": [
      {"type": "conv2d", "out_channels": 1, "kernel": [2, 1], "weights": [1, 2, 3, 4], "padding": 1},
      {"type": "avgpool2d", "kernel": 2},
      {"type": "dropout", "rate": 0.25, "mask": [1, 0, 1, 1, 0, 1]},
      {"type": "flatten"},
      {"type": "respro"}
    ]})");
  const auto& conv = std::get<Conv>(net.layers[0]);
  EXPECT_EQ(conv.kernel, (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(conv.padding, (std::vector<std::size_t>{1, 1}));
  EXPECT_EQ(conv.stride, (std::vector<std::size_t>{1, 1}));
  EXPECT_EQ(std::get<AvgPool>(net.layers[1]).stride, (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(net.order, ElementOrder::channel_last);
  EXPECT_EQ(net.encoding, Encoding::canonical);
  EXPECT_EQ(net.input_bound, 2.5);
  EXPECT_FALSE(std::get<ReSPro>(net.layers[4]).alpha.has_value());
}

TEST(ParseNetwork, Errors) {
  EXPECT_NE(error_of(R"({"input": [3], "layers": [{"type": "maxpool"}]})").find("unsupported layer kind"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"input": [3], "layers": [{"type": "respro"}, {"type": "conv1d", "kernel": 2,
              "weights": [1]}]})").find("layer 1"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"input": [3], "layers": [{"type": "conv1d", "kernel": 5, "weights": [1,1,1,1,1]}]})")
                .find("layer 0"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"input": [3], "layers": [{"type": "conv1d", "kernel": 1, "weights": ["x"]}]})")
                .find("layers[0].weights[0]"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"input": [3], "layers": [{"type": "respro", "alpha": -1}]})").find("alpha"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"input": [3], "order": 4, "layers": []})").find("order"), std::string::npos);
  EXPECT_NE(error_of("{not json").find("malformed JSON"), std::string::npos);
  EXPECT_NE(error_of(R"({"layers": []})").find("input"), std::string::npos);
}

TEST(ParseNetwork, NonFiniteWeight) {
  // JSON has no literal for infinity; an overflowing number is the closest input
  EXPECT_FALSE(error_of(R"({"input": [2], "layers": [{"type": "conv1d", "kernel": 1, "weights": [1e999]}]})")
                   .empty());
}

TEST(DumpNetwork, RoundTrips) {
  for (std::size_t k : {1u, 3u}) {
    const NetworkSpec net = make_depth_net(k, 42);
    EXPECT_EQ(parse_network(dump_network(net)), net);
  }
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const NetworkSpec net = testing_support::random_network(rng);
    EXPECT_EQ(parse_network(dump_network(net)), net);
  }
}

TEST(DumpNetwork, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "cfl_roundtrip_test.json";
  const NetworkSpec net = make_three_stage_net(3);
  save_network(net, path);
  EXPECT_EQ(load_network(path), net);
  std::filesystem::remove(path);
  EXPECT_THROW(load_network(path), Error);
}

TEST(Samples, ReadWrite) {
  std::istringstream in("1, 2.5,-3\n\n 4e-3,0,1\r\n");
  const auto s = read_samples(in);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], (std::vector<double>{1, 2.5, -3}));
  EXPECT_EQ(s[1], (std::vector<double>{4e-3, 0, 1}));
  std::ostringstream out;
  write_samples(out, {{0.1, -2}, {1e-20}});
  EXPECT_EQ(out.str(), "0.1,-2\n1e-20\n");
  std::istringstream bad("1,x\n");
  EXPECT_THROW(read_samples(bad), Error);
  std::istringstream empty_field("1,,2\n");
  EXPECT_THROW(read_samples(empty_field), Error);
}

TEST(Samples, FormatRoundTrips) {
  std::mt19937_64 rng(1);
  for (double v : testing_support::uniform_vector(rng, 100, -1e6, 1e6)) {
    std::istringstream in(format_double(v));
    EXPECT_EQ(read_samples(in)[0][0], v);
  }
}
