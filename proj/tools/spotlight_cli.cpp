// spotlight: experiment runner for the flow-level load-balancing simulator.
//
//   spotlight run --config exp.json [--out DIR] [--seed N] [--jobs N] [--quiet]
//   spotlight gen --config exp.json [--out trace.csv] [--seed N]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spotlight/experiment.hpp"
#include "spotlight/traffic.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool quiet = false;
};

std::optional<spotlight::ExperimentSpec> load(const Options& opt) {
  try {
    auto spec = spotlight::load_experiment(opt.config);
    if (opt.seed) spec.base_seed = *opt.seed;
    if (opt.jobs) spec.jobs = *opt.jobs;
    if (opt.out) spec.output_dir = *opt.out;
    spotlight::validate(spec);
    return spec;
  } catch (const std::exception& e) {
    std::cerr << "spotlight: config error: " << e.what() << '\n';
    return std::nullopt;
  }
}

int cmd_run(const Options& opt) {
  auto spec = load(opt);
  if (!spec) return kConfigError;
  try {
    auto progress = [&](std::size_t done, std::size_t total, const spotlight::MetricsReport& r) {
      if (opt.quiet) return;
      std::fprintf(stderr, "[%zu/%zu] %s m=%d interval=%gms drop=%g seed=%llu omega=%.4f\n", done, total,
                   r.dispatcher.c_str(), r.m, r.interval * 1000.0, r.drop_prob,
                   static_cast<unsigned long long>(r.seed), r.mean_omega);
    };
    const auto reports = spotlight::run_experiment(*spec, progress);
    spotlight::write_results(*spec, reports);
    if (!opt.quiet) std::cerr << "wrote " << (spec->output_dir / "summary.csv").string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "spotlight: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}

int cmd_gen(const Options& opt) {
  auto spec = load(opt);
  if (!spec) return kConfigError;
  if (spec->traffic.kind != spotlight::TrafficSource::Kind::kSynthetic) {
    std::cerr << "spotlight: config error: gen needs synthetic traffic\n";
    return kConfigError;
  }
  const std::filesystem::path out = opt.out ? std::filesystem::path(*opt.out) : std::filesystem::path("trace.csv");
  const auto tmp = std::filesystem::path(out.string() + ".tmp");
  try {
    const auto trace = spotlight::build_trace(*spec, spec->base_seed, nullptr);
    spotlight::write_trace(tmp, trace);
    std::filesystem::rename(tmp, out);
    if (!opt.quiet) std::cerr << "wrote " << trace.flows.size() << " flows to " << out.string() << '\n';
  } catch (const std::exception& e) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    std::cerr << "spotlight: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config, "JSON experiment description")->required();
  cmd->add_option("--seed", opt.seed, "base seed (overrides the config)");
  cmd->add_flag("--quiet", opt.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-level L4 load-balancing simulator"};
  app.require_subcommand(1);

  Options opt;
  auto* run = app.add_subcommand("run", "run an experiment sweep and write CSV results");
  add_common(run, opt);
  run->add_option("--out", opt.out, "output directory (overrides the config)");
  run->add_option("--jobs", opt.jobs, "sweep points run concurrently")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen", "write a synthetic flow trace CSV");
  add_common(gen, opt);
  gen->add_option("--out", opt.out, "trace file to write (default trace.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  if (run->parsed()) return cmd_run(opt);
  return cmd_gen(opt);
}
