#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "conformal/network.hpp"

namespace conformal {

/// Parses a network document:
///
///   {
///     "input": [8, 8],            spatial dims (1 or 2 entries)
///     "channels": 3,              default 1
///     "order": "channel_major",   or "channel_last"; flatten output order
///     "encoding": "norm",         or "canonical"
///     "input_bound": 1.0,
///     "layers": [
///       {"type": "conv2d", "out_channels": 8, "kernel": [3, 3],
///        "weights": [...], "padding": 1, "dilation": 1, "stride": 1},
///       {"type": "respro", "alpha": 3.0},
///       {"type": "avgpool2d", "kernel": 2, "stride": 1, "padding": 0},
///       {"type": "dropout", "rate": 0.1, "mask": [1, 0, 1]},
///       {"type": "flatten"}
///     ]
///   }
///
/// Per-dimension fields accept a scalar or an array. Pooling stride defaults
/// to the kernel size. Errors name the layer index and the field.
NetworkSpec parse_network(const std::string& text);
NetworkSpec load_network(const std::filesystem::path& path);

std::string dump_network(const NetworkSpec& net);
void save_network(const NetworkSpec& net, const std::filesystem::path& path);

/// One sample per line, comma-separated decimals. Blank lines are skipped.
std::vector<std::vector<double>> read_samples(std::istream& in);
std::vector<std::vector<double>> load_samples(const std::filesystem::path& path);

/// Shortest round-trip decimal form, independent of the C++ locale.
std::string format_double(double value);
void write_samples(std::ostream& out, const std::vector<std::vector<double>>& samples);

}  // namespace conformal
