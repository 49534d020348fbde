#pragma once

// Deterministic discrete-event flow-level simulator.
//
// Flows arrive, pick an instance at every VIP of their service chain through a
// load balancer, share instance capacity max-min fairly along the chain, and
// depart. Controllers poll periodically and push weights to the load
// balancers. The event loop is single-threaded; independent runs share no
// state.

#include <cstdint>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "spotlight/controller.hpp"
#include "spotlight/core.hpp"
#include "spotlight/dispatch.hpp"
#include "spotlight/metrics.hpp"
#include "spotlight/traffic.hpp"

namespace spotlight {

// Stand-in for m = infinity (weights proportional to available capacity).
inline constexpr int kInfiniteM = 1 << 20;

enum class DispatcherKind { kEcmp, kWcmp, kLcf, kAwfd, kOracle };

struct DispatcherSpec {
  DispatcherKind kind = DispatcherKind::kAwfd;
  int m = 4;  // AWFD only

  // "ECMP", "WCMP", "LCF", "ORACLE", "AWFD(4)", "AWFD(inf)".
  static DispatcherSpec parse(std::string_view text);
  [[nodiscard]] std::string family() const;
  [[nodiscard]] std::string label() const;
};

enum class CompletionMode {
  kFixedDuration,   // departs at start + d; congestion loses traffic
  kSizeConserving,  // departs once r * d units are delivered
};

struct TopologySpec {
  int vip_count = 4;
  int instances_per_vip = 100;
  double base_capacity = 1.0;   // type-1 instance capacity
  double capacity_ratio = 2.0;  // type-2 / type-1; instance types alternate
};

struct SimConfig {
  TopologySpec topology;
  int lb_count = 4;
  DispatcherSpec dispatcher;
  double polling_interval = 0.5;
  double drop_prob = 0.0;
  CompletionMode mode = CompletionMode::kFixedDuration;
  std::uint64_t seed = 1;
  double metrics_interval = 1.0;
  Stage2Hash stage2 = Stage2Hash::kFaithful;
  CapacityMode capacity_mode = CapacityMode::kTrueRate;
  double measurement_noise = 0.0;  // sigma of log-normal noise on processing time
  double ewma_alpha = 0.5;
};

// VIP j owns global instance ids [j * N, (j + 1) * N). Even local indices are
// type 1, odd are type 2.
std::vector<Vip> build_topology(const TopologySpec& spec);

// Per-VIP connection key: the 5-tuple differs per VIP, so each hop hashes
// independently.
FlowKey hop_key(FlowKey flow, VipId vip, std::uint64_t seed);

enum class EventType : std::uint8_t { kDeparture = 0, kPoll = 1, kArrival = 2, kMetricsTick = 3 };

struct Event {
  double time = 0.0;
  EventType type = EventType::kArrival;
  std::uint64_t seq = 0;
  std::uint32_t payload = 0;
};

// Non-decreasing time; equal times ordered Departure < Poll < Arrival <
// MetricsTick, then by insertion.
class EventQueue {
 public:
  void push(double time, EventType type, std::uint32_t payload = 0);
  [[nodiscard]] const Event& top() const { return heap_.top(); }
  Event pop();
  [[nodiscard]] bool empty() const { return heap_.empty(); }
  [[nodiscard]] std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const;
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

// Throws if the trace is not sorted by start time or a flow has no chain.
MetricsReport run_simulation(const SimConfig& cfg, const FlowTrace& trace);

}  // namespace spotlight
