#pragma once

// Per-VIP controller: polls instances, estimates available capacity,
// quantizes weights and broadcasts them to every load balancer over a lossy
// channel.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "spotlight/core.hpp"
#include "spotlight/loadbalancer.hpp"

namespace spotlight {

// C = 1 / t
double estimate_capacity(double processing_time);
// A = max(C - L, 0)
double estimate_available(double capacity, double load);
double ewma_update(double prev, double sample, double alpha);

struct PollSample {
  InstanceId instance;
  double processing_time = 1.0;
  double load = 0.0;
};

enum class CapacityMode {
  kTrueRate,  // ground-truth C and L
  kMeasured,  // C estimated from EWMA-smoothed processing-time samples
};

struct ControllerConfig {
  double polling_interval = 0.25;
  int m = 4;
  double ewma_alpha = 0.5;
  double drop_prob = 0.0;
  CapacityMode mode = CapacityMode::kTrueRate;
};

struct BroadcastReport {
  std::uint64_t epoch = 0;
  std::vector<LbId> delivered;
  std::vector<LbId> dropped;
  UpdateStats stats;  // summed over delivered updates
};

class VipController {
 public:
  VipController(VipId vip, ControllerConfig cfg);

  [[nodiscard]] VipId vip() const { return vip_; }
  [[nodiscard]] const ControllerConfig& config() const { return cfg_; }
  [[nodiscard]] std::uint64_t epoch() const { return epoch_; }

  // Epoch-0 weights for an idle pool; load balancers start from these.
  [[nodiscard]] WeightVector initial_weights(const Vip& vip) const;

  // Reads (t, L) from every instance and returns the next weight vector. In
  // true-rate mode the instance's capacity is read directly.
  WeightVector poll(const Vip& vip);

  // Weight vector from explicit samples (measured pathway).
  WeightVector weights_from_samples(std::span<const PollSample> samples);

  // Each load balancer independently loses the update with drop_prob.
  BroadcastReport broadcast(const WeightVector& weights, std::span<LoadBalancer> lbs,
                            std::mt19937_64& rng) const;

  BroadcastReport poll_and_broadcast(const Vip& vip, std::span<LoadBalancer> lbs,
                                     std::mt19937_64& rng);

 private:
  VipId vip_;
  ControllerConfig cfg_;
  std::uint64_t epoch_ = 0;
  std::map<InstanceId, double> smoothed_;  // EWMA of processing time
};

// Bernoulli(p) from one 64-bit draw; shared by the controller and simulator
// so the same rng stream gives the same drops.
bool bernoulli(std::mt19937_64& rng, double p);

// Control traffic of l load balancers updating n DIP weights:
// msg_bytes * updates_per_sec * n * l.
double control_traffic_rate(std::uint64_t dip_count, std::uint64_t lb_count,
                            std::uint64_t msg_bytes = 64, double updates_per_sec = 4.0);

}  // namespace spotlight
