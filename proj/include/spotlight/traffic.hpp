#pragma once

// Workload synthesis (Poisson arrivals, exponential durations, Pareto rates),
// service-chain assignment and the flow-trace CSV format:
//
//   flow_id,start_s,end_s,size_units

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "spotlight/core.hpp"

namespace spotlight {

struct FlowTrace {
  std::vector<Flow> flows;  // sorted by start
  std::string unit = "units";

  [[nodiscard]] double last_arrival() const { return flows.empty() ? 0.0 : flows.back().start; }
};

struct SynthParams {
  std::uint64_t flow_count = 100000;
  double mean_interarrival = 0.001;
  double mean_duration = 10.0;
  double mean_rate = 2.0;
  double pareto_shape = 2.0;
  int chain_min = 1;
  int chain_max = 4;
  std::uint64_t seed = 1;
};

// Pareto scale giving the requested mean: x_m = mean * (alpha - 1) / alpha.
double pareto_scale(double mean, double shape);

// Flows carry no chain; see assign_chains.
FlowTrace generate_synthetic(const SynthParams& p);

// Chain length uniform in [min_len, max_len]; members are distinct VIPs drawn
// without replacement.
FlowTrace assign_chains(FlowTrace trace, std::span<const VipId> vips, int min_len, int max_len,
                        std::uint64_t seed);

// Key derived from a trace's flow id.
FlowKey flow_key_for_id(std::uint64_t flow_id);

FlowTrace load_trace(const std::filesystem::path& path, const std::string& unit = "units");
FlowTrace parse_trace(std::istream& in, const std::string& unit = "units");
void write_trace(std::ostream& out, const FlowTrace& trace);
void write_trace(const std::filesystem::path& path, const FlowTrace& trace);

}  // namespace spotlight
