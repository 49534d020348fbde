#pragma once

// Domain types shared by the dispatchers, load balancers, controllers and the
// flow-level simulator.
//
// Rates and capacities are unit-agnostic doubles ("units/s"); traces carry
// their own unit label which is reported but never converted.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace spotlight {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Tag, typename Rep = std::uint32_t>
struct StrongId {
  Rep value{};

  constexpr StrongId() = default;
  constexpr explicit StrongId(Rep v) : value(v) {}

  friend constexpr auto operator<=>(StrongId, StrongId) = default;
};

struct InstanceTag;
struct VipTag;
struct LbTag;

using InstanceId = StrongId<InstanceTag>;
using VipId = StrongId<VipTag>;
using LbId = StrongId<LbTag>;

// Stands in for the hash of a connection's 5-tuple. Dispatchers only ever
// consume this value.
using FlowKey = std::uint64_t;

// One DIP (service instance).
struct Instance {
  InstanceId id;
  double capacity = 1.0;          // C
  double load = 0.0;              // L, sum of delivered rates of active flows
  double processing_time = 1.0;   // smoothed average processing time
  std::unordered_set<FlowKey> active_flows;

  // A = max(C - L, 0); an overloaded instance has nothing to offer.
  [[nodiscard]] double available() const;
  // U = L / C
  [[nodiscard]] double utilization() const;
};

struct Vip {
  VipId id;
  std::vector<Instance> instances;

  [[nodiscard]] std::size_t size() const { return instances.size(); }
  [[nodiscard]] double aggregate_capacity() const;
  [[nodiscard]] std::vector<InstanceId> instance_ids() const;
};

struct Flow {
  FlowKey key = 0;
  double rate = 0.0;       // demand, units/s
  double start = 0.0;      // s
  double duration = 0.0;   // nominal, s
  std::vector<VipId> chain;
  std::map<VipId, InstanceId> assignments;

  [[nodiscard]] double size() const { return rate * duration; }
};

// Per-VIP quantized weights. Entries are kept in instance-id order.
struct WeightVector {
  VipId vip;
  int m = 0;
  std::uint64_t epoch = 0;
  std::map<InstanceId, int> weights;

  [[nodiscard]] std::uint64_t sum() const;
  [[nodiscard]] int weight_of(InstanceId id) const;
};

// (id, value) pair used for availability snapshots and capacity lists.
struct InstanceValue {
  InstanceId id;
  double value = 0.0;
};

}  // namespace spotlight

template <typename Tag, typename Rep>
struct std::hash<spotlight::StrongId<Tag, Rep>> {
  std::size_t operator()(spotlight::StrongId<Tag, Rep> id) const noexcept {
    return std::hash<Rep>{}(id.value);
  }
};
