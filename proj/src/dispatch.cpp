#include "spotlight/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spotlight/hash.hpp"

namespace spotlight {

namespace {

// Ratios that land within this distance below an integer are snapped up, so
// c * A quantizes the same as A despite rounding in the division.
constexpr double kQuantizeSnap = 1e-9;

constexpr double kWcmpTolerance = 1e-6;
constexpr std::uint64_t kWcmpMaxMultiplier = 1000;
constexpr double kWcmpFallbackScale = 1e6;

template <typename Better>
InstanceId argmax_by(std::span<const InstanceValue> values, Better better) {
  if (values.empty()) throw Error("no instances");
  const InstanceValue* best = &values.front();
  for (const auto& v : values.subspan(1)) {
    if (better(v, *best)) best = &v;
  }
  return best->id;
}

bool higher_then_lower_id(const InstanceValue& a, const InstanceValue& b) {
  if (a.value != b.value) return a.value > b.value;
  return a.id < b.id;
}

}  // namespace

WeightVector quantize_weights(std::span<const InstanceValue> avail, int m, VipId vip,
                              std::uint64_t epoch) {
  if (avail.empty()) throw Error("no instances");
  if (m < 0) throw Error("m must be non-negative");

  double max_avail = 0.0;
  for (const auto& a : avail) {
    if (!(a.value >= 0.0)) throw Error("available capacity must be non-negative");
    max_avail = std::max(max_avail, a.value);
  }

  WeightVector out;
  out.vip = vip;
  out.m = m;
  out.epoch = epoch;
  for (const auto& a : avail) {
    int w = 0;
    if (m > 0 && max_avail > 0.0) {
      const double q = static_cast<double>(m) * (a.value / max_avail);
      double f = std::floor(q);
      if (q - f > 1.0 - kQuantizeSnap) f += 1.0;
      w = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(m)));
    }
    if (!out.weights.emplace(a.id, w).second) throw Error("duplicate instance id");
  }
  return out;
}

PriorityClasses PriorityClasses::from(const WeightVector& weights) {
  PriorityClasses pc;
  pc.vip = weights.vip;
  pc.m = weights.m;
  pc.classes.resize(static_cast<std::size_t>(weights.m) + 1);
  for (const auto& [id, w] : weights.weights) {
    if (w < 0 || w > weights.m) throw Error("weight outside [0, m]");
    pc.classes[static_cast<std::size_t>(w)].push_back(id);
  }
  return pc;
}

AwfdTables AwfdTables::build(const WeightVector& weights) {
  if (weights.weights.empty()) throw Error("no instances");
  AwfdTables t;
  t.vip_ = weights.vip;
  t.m_ = weights.m;
  t.epoch_ = weights.epoch;
  for (const auto& [id, w] : weights.weights) t.all_.push_back(id);

  // Only non-empty classes k >= 1 get a range; with m up to 2^20 this walks the
  // occupied weights rather than every k.
  std::map<int, std::vector<InstanceId>> occupied;
  for (const auto& [id, w] : weights.weights) {
    if (w < 0 || w > weights.m) throw Error("weight outside [0, m]");
    if (w > 0) occupied[w].push_back(id);
  }
  std::uint64_t lo = 0;
  for (auto& [k, members] : occupied) {
    const std::uint64_t len = static_cast<std::uint64_t>(k) * members.size();
    t.ranges_.push_back({k, lo, lo + len});
    t.groups_.push_back(std::move(members));
    lo += len;
  }
  t.weight_sum_ = lo;
  return t;
}

const std::vector<InstanceId>& AwfdTables::group(int k) const {
  static const std::vector<InstanceId> kEmpty;
  auto it = std::lower_bound(ranges_.begin(), ranges_.end(), k,
                             [](const ClassRange& r, int key) { return r.k < key; });
  if (it == ranges_.end() || it->k != k) return kEmpty;
  return groups_[static_cast<std::size_t>(it - ranges_.begin())];
}

int AwfdTables::select_class(FlowKey key) const {
  if (fallback()) throw Error("degenerate weights");
  const std::uint64_t residue = key % weight_sum_;
  auto it = std::upper_bound(ranges_.begin(), ranges_.end(), residue,
                             [](std::uint64_t r, const ClassRange& cr) { return r < cr.hi; });
  return it->k;
}

InstanceId AwfdTables::dispatch(FlowKey key, Stage2Hash mode) const {
  if (fallback()) return all_[key % all_.size()];
  const std::uint64_t residue = key % weight_sum_;
  auto it = std::upper_bound(ranges_.begin(), ranges_.end(), residue,
                             [](std::uint64_t r, const ClassRange& cr) { return r < cr.hi; });
  const auto& members = groups_[static_cast<std::size_t>(it - ranges_.begin())];
  const FlowKey member_key = mode == Stage2Hash::kFaithful ? key : mix64(key, kStage2Seed);
  return members[member_key % members.size()];
}

AwfdTables build_awfd_tables(const WeightVector& weights) { return AwfdTables::build(weights); }

InstanceId awfd_dispatch(const AwfdTables& tables, FlowKey key, Stage2Hash mode) {
  return tables.dispatch(key, mode);
}

double dispatch_probability(const WeightVector& weights, InstanceId f) {
  const std::uint64_t total = weights.sum();
  if (total == 0) throw Error("degenerate weights");
  return static_cast<double>(weights.weight_of(f)) / static_cast<double>(total);
}

InstanceId ecmp_dispatch(std::span<const InstanceId> instances, FlowKey key) {
  if (instances.empty()) throw Error("no instances");
  return instances[key % instances.size()];
}

InstanceId ecmp_dispatch(const Vip& vip, FlowKey key) {
  if (vip.instances.empty()) throw Error("no instances");
  return vip.instances[key % vip.instances.size()].id;
}

WcmpTable::WcmpTable(std::span<const InstanceValue> capacities) {
  if (capacities.empty()) throw Error("no instances");
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& c : capacities) {
    if (!(c.value > 0.0)) throw Error("capacity must be positive");
    smallest = std::min(smallest, c.value);
  }

  auto integral = [&](std::uint64_t mult) {
    std::vector<std::uint64_t> out;
    out.reserve(capacities.size());
    for (const auto& c : capacities) {
      const double scaled = c.value / smallest * static_cast<double>(mult);
      const double rounded = std::round(scaled);
      if (std::abs(scaled - rounded) > kWcmpTolerance * std::max(1.0, scaled)) return std::vector<std::uint64_t>{};
      out.push_back(static_cast<std::uint64_t>(rounded));
    }
    return out;
  };

  for (std::uint64_t mult = 1; mult <= kWcmpMaxMultiplier && weights_.empty(); ++mult) {
    weights_ = integral(mult);
  }
  if (weights_.empty()) {
    // Irrational-looking ratios: fixed-point approximation.
    for (const auto& c : capacities) {
      weights_.push_back(static_cast<std::uint64_t>(std::llround(c.value / smallest * kWcmpFallbackScale)));
    }
  }

  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < capacities.size(); ++i) {
    ids_.push_back(capacities[i].id);
    acc += weights_[i];
    ends_.push_back(acc);
  }
}

InstanceId WcmpTable::dispatch(FlowKey key) const {
  const std::uint64_t residue = key % ends_.back();
  auto it = std::upper_bound(ends_.begin(), ends_.end(), residue);
  return ids_[static_cast<std::size_t>(it - ends_.begin())];
}

InstanceId wcmp_dispatch(std::span<const InstanceValue> capacities, FlowKey key) {
  return WcmpTable(capacities).dispatch(key);
}

InstanceId lcf_dispatch(std::span<const InstanceValue> snapshot) {
  return argmax_by(snapshot, higher_then_lower_id);
}

InstanceId oracle_dispatch(std::span<const InstanceValue> live) {
  return argmax_by(live, higher_then_lower_id);
}

}  // namespace spotlight
