#include "spotlight/loadbalancer.hpp"

#include <set>

#include "spotlight/hash.hpp"

namespace spotlight {

std::size_t ConnectionKeyHash::operator()(const ConnectionKey& k) const noexcept {
  return static_cast<std::size_t>(mix64(k.flow, k.vip.value));
}

std::optional<InstanceId> ConnectionTable::find(FlowKey flow, VipId vip) const {
  auto it = entries_.find({flow, vip});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ConnectionTable::insert(FlowKey flow, VipId vip, InstanceId instance) {
  if (!entries_.emplace(ConnectionKey{flow, vip}, instance).second) {
    throw Error("connection already present");
  }
}

bool ConnectionTable::erase(FlowKey flow, VipId vip) { return entries_.erase({flow, vip}) > 0; }

UpdateStats& UpdateStats::operator+=(const UpdateStats& o) {
  range_writes += o.range_writes;
  group_removals += o.group_removals;
  group_additions += o.group_additions;
  total += o.total;
  return *this;
}

namespace {

void check_same_instances(const WeightVector& a, const WeightVector& b) {
  if (a.weights.size() != b.weights.size()) throw Error("mismatched instance sets");
  auto ia = a.weights.begin();
  for (auto ib = b.weights.begin(); ib != b.weights.end(); ++ia, ++ib) {
    if (ia->first != ib->first) throw Error("mismatched instance sets");
  }
}

}  // namespace

std::size_t changed_instances(const WeightVector& old_weights, const WeightVector& new_weights) {
  check_same_instances(old_weights, new_weights);
  std::size_t x = 0;
  auto io = old_weights.weights.begin();
  for (auto in = new_weights.weights.begin(); in != new_weights.weights.end(); ++io, ++in) {
    if (io->second != in->second) ++x;
  }
  return x;
}

UpdateStats compact_diff(const WeightVector& old_weights, const WeightVector& new_weights) {
  check_same_instances(old_weights, new_weights);
  if (old_weights.vip != new_weights.vip) throw Error("weight vectors of different VIPs");

  UpdateStats stats;
  auto io = old_weights.weights.begin();
  for (auto in = new_weights.weights.begin(); in != new_weights.weights.end(); ++io, ++in) {
    if (io->second == in->second) continue;
    if (io->second > 0) ++stats.group_removals;
    if (in->second > 0) ++stats.group_additions;
  }

  if (stats.group_removals + stats.group_additions > 0 || old_weights.m != new_weights.m) {
    const AwfdTables old_tables = AwfdTables::build(old_weights);
    const AwfdTables new_tables = AwfdTables::build(new_weights);
    // A class's range entry needs a write whenever its bounds move, appear or
    // disappear.
    std::set<int> classes;
    for (const auto& r : old_tables.ranges()) classes.insert(r.k);
    for (const auto& r : new_tables.ranges()) classes.insert(r.k);
    auto find = [](const AwfdTables& t, int k) -> const ClassRange* {
      for (const auto& r : t.ranges()) {
        if (r.k == k) return &r;
      }
      return nullptr;
    };
    for (int k : classes) {
      const ClassRange* a = find(old_tables, k);
      const ClassRange* b = find(new_tables, k);
      if (a == nullptr || b == nullptr || *a != *b) ++stats.range_writes;
    }
  }
  stats.total = stats.range_writes + stats.group_removals + stats.group_additions;
  return stats;
}

LoadBalancer::LoadBalancer(LbId id, Stage2Hash stage2) : id_(id), stage2_(stage2) {}

void LoadBalancer::install(const WeightVector& weights) {
  vips_[weights.vip] = VipState{weights, AwfdTables::build(weights)};
}

LoadBalancer::VipState& LoadBalancer::state(VipId vip) {
  auto it = vips_.find(vip);
  if (it == vips_.end()) throw Error("unknown vip");
  return it->second;
}

const LoadBalancer::VipState& LoadBalancer::state(VipId vip) const {
  auto it = vips_.find(vip);
  if (it == vips_.end()) throw Error("unknown vip");
  return it->second;
}

InstanceId LoadBalancer::handle_flow(FlowKey flow, VipId vip) {
  const VipState& s = state(vip);
  if (auto hit = connections_.find(flow, vip)) return *hit;
  const InstanceId chosen = s.tables.dispatch(flow, stage2_);
  connections_.insert(flow, vip, chosen);
  return chosen;
}

InstanceId LoadBalancer::handle_flow(FlowKey flow, VipId vip,
                                     const std::function<InstanceId()>& dispatch) {
  if (auto hit = connections_.find(flow, vip)) return *hit;
  const InstanceId chosen = dispatch();
  connections_.insert(flow, vip, chosen);
  return chosen;
}

UpdateStats LoadBalancer::apply_weight_update(const WeightVector& weights) {
  VipState& s = state(weights.vip);
  if (weights.epoch <= s.weights.epoch) {
    ++stale_updates_;
    return {};
  }
  const UpdateStats stats = compact_diff(s.weights, weights);
  s.tables = AwfdTables::build(weights);
  s.weights = weights;
  return stats;
}

void LoadBalancer::complete_flow(FlowKey flow, VipId vip) { connections_.erase(flow, vip); }

const AwfdTables& LoadBalancer::tables(VipId vip) const { return state(vip).tables; }

const WeightVector& LoadBalancer::weights(VipId vip) const { return state(vip).weights; }

std::uint64_t LoadBalancer::epoch(VipId vip) const { return state(vip).weights.epoch; }

}  // namespace spotlight
