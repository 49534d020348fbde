#include "spotlight/experiment.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

#include <json.hpp>

namespace spotlight {

using nlohmann::json;

namespace {

const std::vector<DispatcherSpec>& paper_dispatchers() {
  static const std::vector<DispatcherSpec> d = {
      {DispatcherKind::kEcmp, 0}, {DispatcherKind::kWcmp, 0}, {DispatcherKind::kLcf, 0},
      {DispatcherKind::kAwfd, 2}, {DispatcherKind::kAwfd, 4}, {DispatcherKind::kOracle, 0},
  };
  return d;
}

void apply_scale(ExperimentSpec& s, const std::string& scale) {
  // Desk scale keeps the per-instance arrival rate of the full setup: 5x
  // fewer instances per VIP, 5x sparser arrivals.
  if (scale == "desk") {
    s.base.topology.instances_per_vip = 20;
    s.traffic.synth.flow_count = 10000;
    s.traffic.synth.mean_interarrival = 0.005;
  } else if (scale == "full") {
    s.base.topology.instances_per_vip = 100;
    s.traffic.synth.flow_count = 100000;
    s.traffic.synth.mean_interarrival = 0.001;
  } else {
    throw Error("unknown scale '" + scale + "' (expected desk or full)");
  }
}

int parse_m(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return kInfiniteM;
    throw Error("m must be an integer or \"inf\"");
  }
  if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() > kInfiniteM) {
    throw Error("m must be an integer in [0, 2^20] or \"inf\"");
  }
  return v.get<int>();
}

template <typename T>
T get_as(const json& obj, const char* key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(std::string("config field '") + key + "': " + e.what());
  }
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.contains(it.key())) throw Error("unknown config field '" + it.key() + "' in " + where);
  }
}

void apply_traffic(ExperimentSpec& s, const json& t) {
  check_keys(t,
             {"kind", "flow_count", "mean_interarrival_s", "mean_duration_s", "mean_rate", "pareto_shape",
              "chain_min", "chain_max", "path", "unit"},
             "traffic");
  auto& p = s.traffic.synth;
  if (t.contains("kind")) {
    const auto kind = get_as<std::string>(t, "kind");
    if (kind == "synthetic") {
      s.traffic.kind = TrafficSource::Kind::kSynthetic;
    } else if (kind == "trace") {
      s.traffic.kind = TrafficSource::Kind::kTraceFile;
    } else {
      throw Error("traffic.kind must be synthetic or trace");
    }
  }
  if (t.contains("flow_count")) p.flow_count = get_as<std::uint64_t>(t, "flow_count");
  if (t.contains("mean_interarrival_s")) p.mean_interarrival = get_as<double>(t, "mean_interarrival_s");
  if (t.contains("mean_duration_s")) p.mean_duration = get_as<double>(t, "mean_duration_s");
  if (t.contains("mean_rate")) {
    if (t.at("mean_rate").is_string() && t.at("mean_rate").get<std::string>() == "auto") {
      s.traffic.auto_rate = true;
    } else {
      p.mean_rate = get_as<double>(t, "mean_rate");
      s.traffic.auto_rate = false;
    }
  }
  if (t.contains("pareto_shape")) p.pareto_shape = get_as<double>(t, "pareto_shape");
  if (t.contains("chain_min")) p.chain_min = get_as<int>(t, "chain_min");
  if (t.contains("chain_max")) p.chain_max = get_as<int>(t, "chain_max");
  if (t.contains("path")) s.traffic.path = get_as<std::string>(t, "path");
  if (t.contains("unit")) s.traffic.unit = get_as<std::string>(t, "unit");
}

}  // namespace

ExperimentSpec preset(const std::string& name, const std::string& scale) {
  ExperimentSpec s;
  s.base.topology = TopologySpec{4, 100, 1.0, 2.0};
  s.base.lb_count = 4;
  s.base.mode = CompletionMode::kFixedDuration;
  s.base.metrics_interval = 1.0;
  s.traffic.synth = SynthParams{};
  s.m_values = {4};
  s.drop_probs = {0.0};

  if (name == "paper-synth") {
    s.dispatchers = paper_dispatchers();
    s.intervals = {0.1, 0.25, 0.5, 1.0};
  } else if (name == "m-sweep") {
    for (int m : {1, 2, 4, 8, 16, kInfiniteM}) s.dispatchers.push_back({DispatcherKind::kAwfd, m});
    s.intervals = {0.5};
  } else if (name == "interval-sweep") {
    s.dispatchers = {{DispatcherKind::kLcf, 0}, {DispatcherKind::kAwfd, 4}};
    s.intervals = {0.1, 0.25, 0.5, 1.0};
  } else if (name == "drop-sweep") {
    s.dispatchers = {{DispatcherKind::kAwfd, 4}};
    s.intervals = {0.25};
    s.drop_probs = {0.0, 0.1, 0.2, 0.33};
  } else if (name != "none") {
    throw Error("unknown preset '" + name + "'");
  }
  apply_scale(s, scale);
  return s;
}

ExperimentSpec parse_experiment(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error("config must be a JSON object");
  check_keys(doc,
             {"preset", "scale", "topology", "lb_count", "dispatchers", "m", "intervals_s", "drop_probs",
              "replications", "seed", "mode", "metrics_interval_s", "stage2_hash", "capacity_mode",
              "measurement_noise", "ewma_alpha", "load_factor", "traffic", "output_dir", "write_series", "jobs"},
             "config");

  const std::string preset_name = doc.contains("preset") ? get_as<std::string>(doc, "preset") : "none";
  const std::string scale = doc.contains("scale") ? get_as<std::string>(doc, "scale") : "desk";
  ExperimentSpec s = preset(preset_name, scale);

  if (doc.contains("topology")) {
    const auto& t = doc.at("topology");
    check_keys(t, {"vips", "instances_per_vip", "base_capacity", "capacity_ratio"}, "topology");
    auto& topo = s.base.topology;
    if (t.contains("vips")) topo.vip_count = get_as<int>(t, "vips");
    if (t.contains("instances_per_vip")) topo.instances_per_vip = get_as<int>(t, "instances_per_vip");
    if (t.contains("base_capacity")) topo.base_capacity = get_as<double>(t, "base_capacity");
    if (t.contains("capacity_ratio")) topo.capacity_ratio = get_as<double>(t, "capacity_ratio");
  }
  if (doc.contains("lb_count")) s.base.lb_count = get_as<int>(doc, "lb_count");
  if (doc.contains("dispatchers")) {
    s.dispatchers.clear();
    for (const auto& d : doc.at("dispatchers")) {
      if (!d.is_string()) throw Error("dispatchers must be strings");
      s.dispatchers.push_back(DispatcherSpec::parse(d.get<std::string>()));
    }
    // Bare "AWFD" entries follow the m axis.
    std::vector<DispatcherSpec> expanded;
    for (std::size_t i = 0; i < s.dispatchers.size(); ++i) {
      const auto name = doc.at("dispatchers")[i].get<std::string>();
      if (s.dispatchers[i].kind == DispatcherKind::kAwfd && name.find('(') == std::string::npos) {
        expanded.push_back({DispatcherKind::kAwfd, -1});
      } else {
        expanded.push_back(s.dispatchers[i]);
      }
    }
    s.dispatchers = std::move(expanded);
  }
  if (doc.contains("m")) {
    s.m_values.clear();
    const auto& mv = doc.at("m");
    if (mv.is_array()) {
      for (const auto& v : mv) s.m_values.push_back(parse_m(v));
    } else {
      s.m_values.push_back(parse_m(mv));
    }
  }
  if (doc.contains("intervals_s")) s.intervals = get_as<std::vector<double>>(doc, "intervals_s");
  if (doc.contains("drop_probs")) s.drop_probs = get_as<std::vector<double>>(doc, "drop_probs");
  if (doc.contains("replications")) s.replications = get_as<int>(doc, "replications");
  if (doc.contains("seed")) s.base_seed = get_as<std::uint64_t>(doc, "seed");
  if (doc.contains("mode")) {
    const auto mode = get_as<std::string>(doc, "mode");
    if (mode == "fixed-duration") {
      s.base.mode = CompletionMode::kFixedDuration;
    } else if (mode == "size-conserving") {
      s.base.mode = CompletionMode::kSizeConserving;
    } else {
      throw Error("mode must be fixed-duration or size-conserving");
    }
  }
  if (doc.contains("metrics_interval_s")) s.base.metrics_interval = get_as<double>(doc, "metrics_interval_s");
  if (doc.contains("stage2_hash")) {
    const auto h = get_as<std::string>(doc, "stage2_hash");
    if (h == "faithful") {
      s.base.stage2 = Stage2Hash::kFaithful;
    } else if (h == "independent") {
      s.base.stage2 = Stage2Hash::kIndependent;
    } else {
      throw Error("stage2_hash must be faithful or independent");
    }
  }
  if (doc.contains("capacity_mode")) {
    const auto c = get_as<std::string>(doc, "capacity_mode");
    if (c == "true-rate") {
      s.base.capacity_mode = CapacityMode::kTrueRate;
    } else if (c == "measured") {
      s.base.capacity_mode = CapacityMode::kMeasured;
    } else {
      throw Error("capacity_mode must be true-rate or measured");
    }
  }
  if (doc.contains("measurement_noise")) s.base.measurement_noise = get_as<double>(doc, "measurement_noise");
  if (doc.contains("ewma_alpha")) s.base.ewma_alpha = get_as<double>(doc, "ewma_alpha");
  if (doc.contains("load_factor")) s.load_factor = get_as<double>(doc, "load_factor");
  if (doc.contains("traffic")) apply_traffic(s, doc.at("traffic"));
  if (doc.contains("output_dir")) s.output_dir = get_as<std::string>(doc, "output_dir");
  if (doc.contains("write_series")) s.write_series = get_as<bool>(doc, "write_series");
  if (doc.contains("jobs")) s.jobs = get_as<int>(doc, "jobs");

  validate(s);
  return s;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment(ss.str());
}

void validate(const ExperimentSpec& s) {
  if (s.dispatchers.empty()) throw Error("dispatchers axis is empty");
  if (s.intervals.empty()) throw Error("intervals_s axis is empty");
  if (s.drop_probs.empty()) throw Error("drop_probs axis is empty");
  bool bare_awfd = false;
  for (const auto& d : s.dispatchers) bare_awfd |= d.kind == DispatcherKind::kAwfd && d.m < 0;
  if (bare_awfd && s.m_values.empty()) throw Error("m axis is empty");
  if (s.replications < 1) throw Error("replications must be >= 1");
  if (s.jobs < 1) throw Error("jobs must be >= 1");
  for (double i : s.intervals) {
    if (!(i > 0.0)) throw Error("polling intervals must be positive");
  }
  for (double p : s.drop_probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("drop probabilities must lie in [0, 1]");
  }
  if (!(s.load_factor > 0.0)) throw Error("load_factor must be positive");
  const auto& topo = s.base.topology;
  if (topo.vip_count < 1 || topo.instances_per_vip < 1) throw Error("topology counts must be >= 1");
  if (!(topo.base_capacity > 0.0) || !(topo.capacity_ratio > 0.0)) throw Error("capacities must be positive");
  if (s.base.lb_count < 1) throw Error("lb_count must be >= 1");
  if (!(s.base.metrics_interval > 0.0)) throw Error("metrics_interval_s must be positive");
  if (!(s.base.ewma_alpha > 0.0 && s.base.ewma_alpha <= 1.0)) throw Error("ewma_alpha must be in (0, 1]");
  const auto& p = s.traffic.synth;
  if (p.chain_min < 1 || p.chain_max < p.chain_min) throw Error("invalid chain length range");
  if (p.chain_max > topo.vip_count) throw Error("too few VIPs for chain length");
  if (s.traffic.kind == TrafficSource::Kind::kSynthetic) {
    pareto_scale(1.0, p.pareto_shape);
    if (!(p.mean_interarrival > 0.0) || !(p.mean_duration > 0.0)) throw Error("synthetic means must be positive");
    if (!s.traffic.auto_rate && !(p.mean_rate > 0.0)) throw Error("mean_rate must be positive");
  } else if (s.traffic.path.empty()) {
    throw Error("trace traffic needs a path");
  }
}

std::vector<RunPoint> expand_sweep(const ExperimentSpec& spec) {
  std::vector<DispatcherSpec> dispatchers;
  for (const auto& d : spec.dispatchers) {
    if (d.kind == DispatcherKind::kAwfd && d.m < 0) {
      for (int m : spec.m_values) dispatchers.push_back({DispatcherKind::kAwfd, m});
    } else {
      dispatchers.push_back(d);
    }
  }
  std::vector<RunPoint> points;
  for (const auto& d : dispatchers) {
    for (double interval : spec.intervals) {
      for (double drop : spec.drop_probs) {
        for (int r = 0; r < spec.replications; ++r) {
          RunPoint p;
          p.cfg = spec.base;
          p.cfg.dispatcher = d;
          p.cfg.polling_interval = interval;
          p.cfg.drop_prob = drop;
          p.cfg.seed = spec.base_seed + static_cast<std::uint64_t>(r);
          p.replication = r;
          points.push_back(p);
        }
      }
    }
  }
  return points;
}

namespace {

double aggregate_capacity(const TopologySpec& topo) {
  double total = 0.0;
  for (const auto& v : build_topology(topo)) total += v.aggregate_capacity();
  return total;
}

}  // namespace

double calibrated_mean_rate(const SynthParams& p, const TopologySpec& topo, double load_factor) {
  const double concurrent = p.mean_duration / p.mean_interarrival;
  const double mean_chain = 0.5 * (p.chain_min + p.chain_max);
  return load_factor * aggregate_capacity(topo) / (concurrent * mean_chain);
}

FlowTrace build_trace(const ExperimentSpec& spec, std::uint64_t seed, TopologySpec* topology) {
  std::vector<VipId> vips;
  for (int j = 0; j < spec.base.topology.vip_count; ++j) vips.emplace_back(static_cast<std::uint32_t>(j));
  const auto& sp = spec.traffic.synth;

  if (spec.traffic.kind == TrafficSource::Kind::kSynthetic) {
    SynthParams p = sp;
    p.seed = seed;
    if (spec.traffic.auto_rate) p.mean_rate = calibrated_mean_rate(p, spec.base.topology, spec.load_factor);
    FlowTrace t = assign_chains(generate_synthetic(p), vips, p.chain_min, p.chain_max, seed);
    if (topology != nullptr) *topology = spec.base.topology;
    return t;
  }

  FlowTrace t = assign_chains(load_trace(spec.traffic.path, spec.traffic.unit), vips, sp.chain_min, sp.chain_max, seed);
  if (topology != nullptr) {
    *topology = spec.base.topology;
    if (t.flows.size() > 1) {
      double volume = 0.0;
      for (const auto& f : t.flows) volume += f.size() * static_cast<double>(f.chain.size());
      const double span = t.flows.back().start - t.flows.front().start;
      if (span > 0.0) {
        const double offered = volume / span;
        const double unit_capacity = aggregate_capacity(*topology) / topology->base_capacity;
        topology->base_capacity = offered / spec.load_factor / unit_capacity;
      }
    }
  }
  return t;
}

std::vector<MetricsReport> run_experiment(const ExperimentSpec& spec, const ProgressFn& progress) {
  validate(spec);
  const auto points = expand_sweep(spec);

  // One workload per replication, shared read-only by every sweep point.
  std::vector<FlowTrace> traces(static_cast<std::size_t>(spec.replications));
  std::vector<TopologySpec> topologies(traces.size());
  for (int r = 0; r < spec.replications; ++r) {
    traces[r] = build_trace(spec, spec.base_seed + static_cast<std::uint64_t>(r), &topologies[r]);
  }

  std::vector<MetricsReport> reports(points.size());
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex mu;
  std::exception_ptr failure;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        SimConfig cfg = points[i].cfg;
        cfg.topology = topologies[points[i].replication];
        auto report = run_simulation(cfg, traces[points[i].replication]);
        std::lock_guard lock(mu);
        reports[i] = std::move(report);
        ++done;
        if (progress) progress(done, points.size(), reports[i]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next.store(points.size());
        return;
      }
    }
  };

  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(spec.jobs), points.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return reports;
}

std::string series_file_name(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "series_%s_m%d_i%gms_d%g_s%llu.csv", r.dispatcher.c_str(), r.m, r.interval * 1000.0,
                r.drop_prob, static_cast<unsigned long long>(r.seed));
  return buf;
}

void write_results(const ExperimentSpec& spec, const std::vector<MetricsReport>& reports) {
  namespace fs = std::filesystem;
  const fs::path out = spec.output_dir;
  fs::create_directories(out);
  const fs::path staging = out / (".staging-" + std::to_string(::getpid()));
  fs::remove_all(staging);
  try {
    fs::create_directories(staging);
    {
      std::ofstream summary(staging / "summary.csv", std::ios::binary);
      write_summary_csv(summary, reports);
      if (!summary) throw Error("failed writing summary.csv");
    }
    if (spec.write_series) {
      fs::create_directories(staging / "series");
      for (const auto& r : reports) {
        std::ofstream series(staging / "series" / series_file_name(r), std::ios::binary);
        write_series_csv(series, r);
        if (!series) throw Error("failed writing series for " + r.dispatcher);
      }
    }
    if (spec.write_series) {
      fs::create_directories(out / "series");
      for (const auto& entry : fs::directory_iterator(staging / "series")) {
        fs::rename(entry.path(), out / "series" / entry.path().filename());
      }
    }
    fs::rename(staging / "summary.csv", out / "summary.csv");
    fs::remove_all(staging);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

}  // namespace spotlight
