#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>

#include "spotlight/core.hpp"
#include "spotlight/dispatch.hpp"

namespace spotlight {

struct ConnectionKey {
  FlowKey flow = 0;
  VipId vip;

  friend bool operator==(const ConnectionKey&, const ConnectionKey&) = default;
};

struct ConnectionKeyHash {
  std::size_t operator()(const ConnectionKey& k) const noexcept;
};

// (flow, VIP) -> DIP. An entry is written once and only removed when the flow
// completes; lookups in between always see the original assignment.
class ConnectionTable {
 public:
  [[nodiscard]] std::optional<InstanceId> find(FlowKey flow, VipId vip) const;
  // Throws if the connection already has an entry.
  void insert(FlowKey flow, VipId vip, InstanceId instance);
  bool erase(FlowKey flow, VipId vip);
  [[nodiscard]] std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<ConnectionKey, InstanceId, ConnectionKeyHash> entries_;
};

// Table writes needed to move a switch from one weight vector to another.
struct UpdateStats {
  std::uint64_t range_writes = 0;
  std::uint64_t group_removals = 0;
  std::uint64_t group_additions = 0;
  std::uint64_t total = 0;

  UpdateStats& operator+=(const UpdateStats& o);
  friend bool operator==(const UpdateStats&, const UpdateStats&) = default;
};

// Diff of the stage-I ranges and stage-II groups between two weight vectors of
// the same VIP. An instance entering or leaving B_0 costs a single group op.
// total <= m + 2x where x is the number of instances whose weight changed.
UpdateStats compact_diff(const WeightVector& old_weights, const WeightVector& new_weights);

// Instances whose weight differs between the two vectors.
std::size_t changed_instances(const WeightVector& old_weights, const WeightVector& new_weights);

class LoadBalancer {
 public:
  explicit LoadBalancer(LbId id, Stage2Hash stage2 = Stage2Hash::kFaithful);

  [[nodiscard]] LbId id() const { return id_; }

  // Installs the initial (epoch-stamped) weights for a VIP without going
  // through the stale-epoch check.
  void install(const WeightVector& weights);

  // Connection-table hit returns the stored DIP; a miss dispatches via AWFD,
  // records the mapping and returns it.
  InstanceId handle_flow(FlowKey flow, VipId vip);
  InstanceId handle_flow(const Flow& flow, VipId vip) { return handle_flow(flow.key, vip); }

  // Same table semantics with a caller-supplied dispatcher for misses (used by
  // the baseline dispatchers).
  InstanceId handle_flow(FlowKey flow, VipId vip, const std::function<InstanceId()>& dispatch);

  // Rebuilds the VIP's AWFD tables from a fresher weight vector. Stale or
  // duplicate epochs are ignored and return zero stats.
  UpdateStats apply_weight_update(const WeightVector& weights);

  // Drops the connection-table entry of a completed flow.
  void complete_flow(FlowKey flow, VipId vip);

  [[nodiscard]] const ConnectionTable& connections() const { return connections_; }
  [[nodiscard]] const AwfdTables& tables(VipId vip) const;
  [[nodiscard]] const WeightVector& weights(VipId vip) const;
  [[nodiscard]] std::uint64_t epoch(VipId vip) const;
  [[nodiscard]] std::uint64_t stale_updates() const { return stale_updates_; }

 private:
  struct VipState {
    WeightVector weights;
    AwfdTables tables;
  };

  VipState& state(VipId vip);
  [[nodiscard]] const VipState& state(VipId vip) const;

  LbId id_;
  Stage2Hash stage2_;
  ConnectionTable connections_;
  std::unordered_map<VipId, VipState> vips_;
  std::uint64_t stale_updates_ = 0;
};

}  // namespace spotlight
