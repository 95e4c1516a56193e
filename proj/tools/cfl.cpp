// cfl: verify, run and benchmark fused conformal networks.
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "conformal/bench.hpp"
#include "conformal/error.hpp"
#include "conformal/fusion.hpp"
#include "conformal/netspec_io.hpp"
#include "conformal/reference.hpp"
#include "conformal/respro.hpp"

namespace cf = conformal;

namespace {

constexpr int kOk = 0;
constexpr int kTolerance = 1;
constexpr int kUsage = 2;
constexpr double kVerifyTolerance = 1e-9;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CF_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw CLI::ValidationError("CF_SEED", std::string("not an unsigned integer: '") + env + "'");
  }
  return 0;
}

int cmd_verify(const std::string& path, std::uint64_t seed, std::size_t trials, bool corrupt) {
  const cf::NetworkSpec net = cf::load_network(path);
  const cf::VerifyReport report = cf::verify_network(net, trials, seed, corrupt);
  std::cout << "trials " << report.trials << " max_relative_error "
            << cf::format_double(report.max_relative_error) << '\n';
  return report.max_relative_error <= kVerifyTolerance ? kOk : kTolerance;
}

int cmd_infer(const std::string& path, const std::string& in_path, const std::string& out_path,
              const std::string& mode) {
  const cf::NetworkSpec net = cf::load_network(path);
  const auto samples = cf::load_samples(in_path);
  std::vector<std::vector<double>> outputs;
  outputs.reserve(samples.size());
  if (mode == "fused") {
    cf::ConformalSequence seq(net);
    for (const auto& x : samples) outputs.push_back(seq.forward(x));
  } else {
    cf::SequentialOptions opts;
    opts.alphas = cf::estimate_alphas(net);
    const std::size_t d_in = cf::infer_shapes(net).front().size();
    for (const auto& x : samples) {
      if (x.size() != d_in)
        throw cf::DimensionError("input has " + std::to_string(x.size()) + " values, network expects " +
                                 std::to_string(d_in));
      outputs.push_back(cf::sequential_forward(net, x, opts));
    }
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw cf::Error("cannot write " + out_path);
  cf::write_samples(out, outputs);
  return kOk;
}

int write_records(const std::string& path, const std::vector<cf::BenchRecord>& recs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cf::Error("cannot write " + path);
  cf::write_bench_csv(out, recs);
  cf::write_bench_csv(std::cout, recs);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fused conformal network tool"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::size_t trials = 100;
  bool corrupt = false;
  std::string net_path, in_path, out_path, mode = "fused";
  std::vector<std::size_t> k_list, sizes;
  std::size_t reps = 5;

  auto* verify = app.add_subcommand("verify", "Compare fused and sequential inference on random inputs");
  verify->add_option("net", net_path, "Network JSON")->required()->check(CLI::ExistingFile);
  verify->add_option("--seed", seed, "RNG seed (falls back to CF_SEED)");
  verify->add_option("--trials", trials, "Number of random inputs")->check(CLI::PositiveNumber);
  verify->add_flag("--corrupt-cache", corrupt, "Perturb the fused operator first (negative control)");

  auto* infer = app.add_subcommand("infer", "Run a network over a sample file");
  infer->add_option("net", net_path, "Network JSON")->required()->check(CLI::ExistingFile);
  infer->add_option("input", in_path, "Input samples, one per line")->required()->check(CLI::ExistingFile);
  infer->add_option("output", out_path, "Output file")->required();
  infer->add_option("--mode", mode, "fused or sequential")->check(CLI::IsMember({"fused", "sequential"}));

  auto* depth = app.add_subcommand("bench-depth", "Time fused vs sequential inference over depth");
  depth->add_option("--k", k_list, "Depths")->required()->delimiter(',')->check(CLI::PositiveNumber);
  depth->add_option("--reps", reps, "Timed repetitions (>= 5)")->check(CLI::Range(5, 1000000));
  depth->add_option("--out", out_path, "CSV output")->required();
  depth->add_option("--seed", seed, "RNG seed (falls back to CF_SEED)");

  auto* batch = app.add_subcommand("bench-batch", "Time fused vs sequential inference over batch size");
  batch->add_option("--sizes", sizes, "Batch sizes")->required()->delimiter(',')->check(CLI::PositiveNumber);
  batch->add_option("--reps", reps, "Timed repetitions (>= 5)")->check(CLI::Range(5, 1000000));
  batch->add_option("--out", out_path, "CSV output")->required();
  batch->add_option("--seed", seed, "RNG seed (falls back to CF_SEED)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const std::uint64_t s = resolve_seed(seed);
    if (*verify) return cmd_verify(net_path, s, trials, corrupt);
    if (*infer) return cmd_infer(net_path, in_path, out_path, mode);
    cf::BenchConfig cfg;
    cfg.reps = reps;
    cfg.seed = s;
    if (*depth) return write_records(out_path, cf::bench_depth(k_list, cfg));
    return write_records(out_path, cf::bench_batch(sizes, cfg));
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const cf::BenchMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kTolerance;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
