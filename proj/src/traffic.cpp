#include "spotlight/traffic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "spotlight/hash.hpp"

namespace spotlight {

namespace {

constexpr const char* kTraceHeader = "flow_id,start_s,end_s,size_units";

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double exponential(std::mt19937_64& rng, double mean) { return -mean * std::log1p(-uniform01(rng)); }

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

double parse_real(const std::string& field, std::size_t line) {
  const std::string t = trim(field);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
    throw Error("trace line " + std::to_string(line) + ": malformed number '" + t + "'");
  }
  return v;
}

std::uint64_t parse_id(const std::string& field, std::size_t line) {
  const std::string t = trim(field);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    throw Error("trace line " + std::to_string(line) + ": malformed flow id '" + t + "'");
  }
  return v;
}

}  // namespace

double pareto_scale(double mean, double shape) {
  if (!(shape > 1.0)) throw Error("infinite mean: pareto shape must exceed 1");
  return mean * (shape - 1.0) / shape;
}

FlowKey flow_key_for_id(std::uint64_t flow_id) { return mix64(flow_id); }

FlowTrace generate_synthetic(const SynthParams& p) {
  const double scale = pareto_scale(p.mean_rate, p.pareto_shape);
  if (!(p.mean_interarrival > 0.0) || !(p.mean_duration > 0.0) || !(p.mean_rate > 0.0)) {
    throw Error("synthetic means must be positive");
  }
  if (p.chain_min < 1 || p.chain_max < p.chain_min) throw Error("invalid chain length range");

  std::mt19937_64 rng(p.seed);
  FlowTrace trace;
  trace.flows.reserve(p.flow_count);
  double t = 0.0;
  for (std::uint64_t i = 0; i < p.flow_count; ++i) {
    t += exponential(rng, p.mean_interarrival);
    Flow f;
    f.key = flow_key_for_id(i);
    f.start = t;
    do {
      f.duration = exponential(rng, p.mean_duration);
    } while (!(f.duration > 0.0));
    f.rate = scale / std::pow(1.0 - uniform01(rng), 1.0 / p.pareto_shape);
    trace.flows.push_back(std::move(f));
  }
  return trace;
}

FlowTrace assign_chains(FlowTrace trace, std::span<const VipId> vips, int min_len, int max_len,
                        std::uint64_t seed) {
  if (min_len < 1 || max_len < min_len) throw Error("invalid chain length range");
  if (vips.size() < static_cast<std::size_t>(max_len)) throw Error("too few VIPs for chain length");

  std::mt19937_64 rng(mix64(seed, 0xc4a1));
  std::vector<VipId> pool(vips.begin(), vips.end());
  const auto span_len = static_cast<std::uint64_t>(max_len - min_len + 1);
  for (auto& f : trace.flows) {
    const auto len = static_cast<std::size_t>(min_len) + uniform_below(rng, span_len);
    for (std::size_t i = 0; i < len; ++i) {
      const auto j = i + uniform_below(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    f.chain.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(len));
    f.assignments.clear();
  }
  return trace;
}

FlowTrace parse_trace(std::istream& in, const std::string& unit) {
  FlowTrace trace;
  trace.unit = unit;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<std::pair<std::uint64_t, Flow>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (t == kTraceHeader) continue;
      if (t.find_first_not_of("0123456789.,-+eE ") != std::string::npos) {
        throw Error("trace line " + std::to_string(line_no) + ": unexpected header '" + t + "'");
      }
    }
    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 4) {
      throw Error("trace line " + std::to_string(line_no) + ": expected 4 fields, got " +
                  std::to_string(fields.size()));
    }
    const std::uint64_t id = parse_id(fields[0], line_no);
    const double start = parse_real(fields[1], line_no);
    const double end = parse_real(fields[2], line_no);
    const double size = parse_real(fields[3], line_no);
    if (!(end > start)) {
      throw Error("trace line " + std::to_string(line_no) + ": end_s must exceed start_s");
    }
    if (!(size > 0.0)) throw Error("trace line " + std::to_string(line_no) + ": size must be positive");
    Flow f;
    f.key = flow_key_for_id(id);
    f.start = start;
    f.duration = end - start;
    f.rate = size / f.duration;
    rows.emplace_back(id, std::move(f));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second.start < b.second.start; });
  trace.flows.reserve(rows.size());
  for (auto& [id, f] : rows) trace.flows.push_back(std::move(f));
  return trace;
}

FlowTrace load_trace(const std::filesystem::path& path, const std::string& unit) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace " + path.string());
  return parse_trace(in, unit);
}

void write_trace(std::ostream& out, const FlowTrace& trace) {
  out << kTraceHeader << '\n';
  char buf[128];
  std::uint64_t id = 0;
  for (const auto& f : trace.flows) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g\n", static_cast<unsigned long long>(id++), f.start,
                  f.start + f.duration, f.size());
    out << buf;
  }
}

void write_trace(const std::filesystem::path& path, const FlowTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace " + path.string());
  write_trace(out, trace);
  if (!out) throw Error("failed writing trace " + path.string());
}

}  // namespace spotlight
