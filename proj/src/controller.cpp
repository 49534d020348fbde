#include "spotlight/controller.hpp"

#include <algorithm>

#include "spotlight/dispatch.hpp"

namespace spotlight {

double estimate_capacity(double processing_time) {
  if (!(processing_time > 0.0)) throw Error("processing time must be positive");
  return 1.0 / processing_time;
}

double estimate_available(double capacity, double load) { return std::max(capacity - load, 0.0); }

double ewma_update(double prev, double sample, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("ewma alpha must be in (0, 1]");
  return alpha * sample + (1.0 - alpha) * prev;
}

bool bernoulli(std::mt19937_64& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return u < p;
}

VipController::VipController(VipId vip, ControllerConfig cfg) : vip_(vip), cfg_(cfg) {
  if (!(cfg_.polling_interval > 0.0)) throw Error("polling interval must be positive");
  if (cfg_.m < 0) throw Error("m must be non-negative");
  if (!(cfg_.drop_prob >= 0.0 && cfg_.drop_prob <= 1.0)) throw Error("drop probability outside [0, 1]");
  if (!(cfg_.ewma_alpha > 0.0 && cfg_.ewma_alpha <= 1.0)) throw Error("ewma alpha must be in (0, 1]");
}

WeightVector VipController::initial_weights(const Vip& vip) const {
  std::vector<InstanceValue> avail;
  avail.reserve(vip.size());
  for (const auto& in : vip.instances) avail.push_back({in.id, in.capacity});
  return quantize_weights(avail, cfg_.m, vip_, 0);
}

WeightVector VipController::weights_from_samples(std::span<const PollSample> samples) {
  std::vector<InstanceValue> avail;
  avail.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.load < 0.0) throw Error("negative load sample");
    auto [it, fresh] = smoothed_.try_emplace(s.instance, s.processing_time);
    if (!fresh) it->second = ewma_update(it->second, s.processing_time, cfg_.ewma_alpha);
    const double capacity = estimate_capacity(it->second);
    avail.push_back({s.instance, estimate_available(capacity, s.load)});
  }
  return quantize_weights(avail, cfg_.m, vip_, ++epoch_);
}

WeightVector VipController::poll(const Vip& vip) {
  if (cfg_.mode == CapacityMode::kMeasured) {
    std::vector<PollSample> samples;
    samples.reserve(vip.size());
    for (const auto& in : vip.instances) samples.push_back({in.id, in.processing_time, in.load});
    return weights_from_samples(samples);
  }
  std::vector<InstanceValue> avail;
  avail.reserve(vip.size());
  for (const auto& in : vip.instances) avail.push_back({in.id, estimate_available(in.capacity, in.load)});
  return quantize_weights(avail, cfg_.m, vip_, ++epoch_);
}

BroadcastReport VipController::broadcast(const WeightVector& weights, std::span<LoadBalancer> lbs,
                                         std::mt19937_64& rng) const {
  BroadcastReport report;
  report.epoch = weights.epoch;
  for (auto& lb : lbs) {
    if (bernoulli(rng, cfg_.drop_prob)) {
      report.dropped.push_back(lb.id());
    } else {
      report.delivered.push_back(lb.id());
      report.stats += lb.apply_weight_update(weights);
    }
  }
  return report;
}

BroadcastReport VipController::poll_and_broadcast(const Vip& vip, std::span<LoadBalancer> lbs,
                                                  std::mt19937_64& rng) {
  return broadcast(poll(vip), lbs, rng);
}

double control_traffic_rate(std::uint64_t dip_count, std::uint64_t lb_count, std::uint64_t msg_bytes,
                            double updates_per_sec) {
  return static_cast<double>(msg_bytes) * updates_per_sec * static_cast<double>(dip_count) *
         static_cast<double>(lb_count);
}

}  // namespace spotlight
