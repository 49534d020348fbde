#pragma once

// Experiment descriptions (JSON config + presets), sweep expansion, parallel
// execution and result emission.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "spotlight/metrics.hpp"
#include "spotlight/simengine.hpp"
#include "spotlight/traffic.hpp"

namespace spotlight {

struct TrafficSource {
  enum class Kind { kSynthetic, kTraceFile };
  Kind kind = Kind::kSynthetic;
  SynthParams synth;     // chain range is taken from here for both kinds
  bool auto_rate = true; // derive synth.mean_rate from the load factor
  std::filesystem::path path;
  std::string unit = "units";
};

struct ExperimentSpec {
  SimConfig base;
  std::vector<DispatcherSpec> dispatchers;
  std::vector<int> m_values;        // expands bare "AWFD" entries
  std::vector<double> intervals;    // seconds
  std::vector<double> drop_probs;
  int replications = 1;
  std::uint64_t base_seed = 1;
  TrafficSource traffic;
  double load_factor = 1.1;         // offered demand / aggregate capacity
  std::filesystem::path output_dir = "results";
  bool write_series = true;
  int jobs = 1;
};

struct RunPoint {
  SimConfig cfg;
  int replication = 0;
};

// Parses a JSON document. A `preset` field seeds the spec, explicit fields
// override it.
ExperimentSpec parse_experiment(const std::string& json_text);
ExperimentSpec load_experiment(const std::filesystem::path& path);
ExperimentSpec preset(const std::string& name, const std::string& scale = "desk");

// Throws on empty axes, replications < 1 and similar.
void validate(const ExperimentSpec& spec);

// dispatchers x m x intervals x drops x replications, in that nesting order.
// Replication r runs with seed base_seed + r.
std::vector<RunPoint> expand_sweep(const ExperimentSpec& spec);

// Mean flow rate that puts the steady-state offered load at `load_factor`
// times the aggregate capacity of the topology.
double calibrated_mean_rate(const SynthParams& p, const TopologySpec& topo, double load_factor);

// Workload of one replication: synthetic or loaded, with chains assigned.
// For trace files the topology's base capacity is rescaled instead of rates.
FlowTrace build_trace(const ExperimentSpec& spec, std::uint64_t seed, TopologySpec* topology);

using ProgressFn = std::function<void(std::size_t done, std::size_t total, const MetricsReport&)>;

// Runs every sweep point (up to spec.jobs concurrently); results come back in
// sweep order regardless of scheduling.
std::vector<MetricsReport> run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {});

// File name of a run's series CSV.
std::string series_file_name(const MetricsReport& report);

// Writes summary.csv (and series/*.csv) into spec.output_dir via a staging
// directory, so a failure leaves no partial files behind.
void write_results(const ExperimentSpec& spec, const std::vector<MetricsReport>& reports);

}  // namespace spotlight
