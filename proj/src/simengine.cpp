#include "spotlight/simengine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "spotlight/hash.hpp"
#include "spotlight/loadbalancer.hpp"
#include "spotlight/sharing.hpp"

namespace spotlight {

DispatcherSpec DispatcherSpec::parse(std::string_view text) {
  std::string t;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (t == "ECMP") return {DispatcherKind::kEcmp, 0};
  if (t == "WCMP") return {DispatcherKind::kWcmp, 0};
  if (t == "LCF") return {DispatcherKind::kLcf, 0};
  if (t == "ORACLE") return {DispatcherKind::kOracle, 0};
  if (t == "AWFD") return {DispatcherKind::kAwfd, 4};
  if (t.starts_with("AWFD(") && t.ends_with(")")) {
    const std::string arg = t.substr(5, t.size() - 6);
    if (arg == "INF" || arg == "INFINITY") return {DispatcherKind::kAwfd, kInfiniteM};
    int m = -1;
    try {
      std::size_t used = 0;
      m = std::stoi(arg, &used);
      if (used != arg.size()) m = -1;
    } catch (const std::exception&) {
      m = -1;
    }
    if (m < 0) throw Error("invalid AWFD weight bound in '" + std::string(text) + "'");
    return {DispatcherKind::kAwfd, m};
  }
  throw Error("unknown dispatcher '" + std::string(text) + "'");
}

std::string DispatcherSpec::family() const {
  switch (kind) {
    case DispatcherKind::kEcmp: return "ECMP";
    case DispatcherKind::kWcmp: return "WCMP";
    case DispatcherKind::kLcf: return "LCF";
    case DispatcherKind::kAwfd: return "AWFD";
    case DispatcherKind::kOracle: return "ORACLE";
  }
  return "?";
}

std::string DispatcherSpec::label() const {
  if (kind != DispatcherKind::kAwfd) return family();
  return "AWFD(" + std::to_string(m) + ")";
}

std::vector<Vip> build_topology(const TopologySpec& spec) {
  if (spec.vip_count < 1 || spec.instances_per_vip < 1) throw Error("topology counts must be >= 1");
  if (!(spec.base_capacity > 0.0) || !(spec.capacity_ratio > 0.0)) throw Error("capacities must be positive");
  std::vector<Vip> vips;
  for (int j = 0; j < spec.vip_count; ++j) {
    Vip v;
    v.id = VipId(static_cast<std::uint32_t>(j));
    for (int i = 0; i < spec.instances_per_vip; ++i) {
      Instance in;
      in.id = InstanceId(static_cast<std::uint32_t>(j * spec.instances_per_vip + i));
      in.capacity = spec.base_capacity * (i % 2 == 0 ? 1.0 : spec.capacity_ratio);
      in.processing_time = 1.0 / in.capacity;
      v.instances.push_back(std::move(in));
    }
    vips.push_back(std::move(v));
  }
  return vips;
}

FlowKey hop_key(FlowKey flow, VipId vip, std::uint64_t seed) {
  return mix64(mix64(flow, kHopSeed + vip.value), seed);
}

bool EventQueue::Later::operator()(const Event& a, const Event& b) const {
  if (a.time != b.time) return a.time > b.time;
  if (a.type != b.type) return a.type > b.type;
  return a.seq > b.seq;
}

void EventQueue::push(double time, EventType type, std::uint32_t payload) {
  heap_.push(Event{time, type, next_seq_++, payload});
}

Event EventQueue::pop() {
  Event e = heap_.top();
  heap_.pop();
  return e;
}

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

struct ActiveFlow {
  std::uint32_t trace_index = 0;
  std::uint32_t dense = kNone;  // position in the active arrays
  double demand = 0.0;
};

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

class Simulation {
 public:
  Simulation(const SimConfig& cfg, const FlowTrace& trace);
  MetricsReport run();

 private:
  void advance(double t);
  void recompute();
  void on_arrival(std::uint32_t index);
  void depart(std::uint32_t slot);
  void on_poll(std::uint32_t k);
  void on_tick(std::uint32_t k);
  std::uint32_t check_pcc(std::uint32_t slot);
  InstanceId dispatch(std::uint32_t vip, FlowKey key, std::uint32_t lb);
  void sync_instances(std::uint32_t vip);
  double gaussian();

  const SimConfig& cfg_;
  const FlowTrace& trace_;
  std::vector<Vip> vips_;
  std::uint32_t per_vip_ = 0;
  std::vector<double> capacity_;
  std::vector<double> demand_sum_;  // committed demand per instance
  std::vector<double> load_;        // delivered rate per instance
  std::vector<std::vector<InstanceId>> vip_ids_;
  std::vector<WcmpTable> wcmp_;
  std::vector<LoadBalancer> lbs_;
  std::vector<VipController> controllers_;
  std::vector<std::vector<InstanceId>> lcf_choice_;  // [lb][vip]
  std::mt19937_64 rng_;

  EventQueue queue_;
  double now_ = 0.0;
  double window_end_ = 0.0;
  double last_arrival_ = 0.0;

  std::size_t stride_ = 1;  // longest chain in the trace
  std::vector<ActiveFlow> slots_;
  std::vector<FlowKey> slot_keys_;       // [slot * stride + h]
  std::vector<std::uint32_t> slot_lbs_;  // [slot * stride + h]
  std::vector<std::uint32_t> free_slots_;
  std::vector<std::uint32_t> by_demand_;  // slot ids, ascending (demand, slot)

  // Active flows, densely packed; removal swaps the last entry in.
  std::vector<std::uint32_t> active_;  // slot ids
  std::vector<double> demand_;
  std::vector<double> rate_;
  std::vector<double> delivered_;
  std::vector<double> remaining_;
  std::vector<double> size_;
  std::vector<std::uint32_t> hops_;  // [dense * stride + h], global instance ids
  std::vector<std::uint8_t> hop_count_;

  ChainAllocator allocator_;
  std::vector<std::uint32_t> order_;

  std::vector<double> vip_rate_;  // current T^j
  std::vector<double> vip_full_;  // integral over the window
  std::vector<double> vip_mid_;
  std::vector<double> vip_tick_;
  double last_tick_ = 0.0;

  MetricsReport report_;
  double fct_sum_ = 0.0;
};

Simulation::Simulation(const SimConfig& cfg, const FlowTrace& trace)
    : cfg_(cfg), trace_(trace), vips_(build_topology(cfg.topology)), rng_(mix64(cfg.seed, 0xd209)) {
  if (cfg_.lb_count < 1) throw Error("lb count must be >= 1");
  if (!(cfg_.polling_interval > 0.0)) throw Error("polling interval must be positive");
  if (!(cfg_.metrics_interval > 0.0)) throw Error("metrics interval must be positive");
  if (!(cfg_.drop_prob >= 0.0 && cfg_.drop_prob <= 1.0)) throw Error("drop probability outside [0, 1]");
  for (std::size_t i = 1; i < trace_.flows.size(); ++i) {
    if (trace_.flows[i].start < trace_.flows[i - 1].start) throw Error("trace not sorted by arrival time");
  }
  for (const auto& f : trace_.flows) {
    if (f.chain.empty()) throw Error("flow without service chain");
    if (!(f.rate > 0.0) || !(f.duration > 0.0)) throw Error("flow rate and duration must be positive");
    if (f.chain.size() > 255) throw Error("service chain too long");
    for (auto v : f.chain) {
      if (v.value >= vips_.size()) throw Error("flow chain references unknown vip");
    }
    stride_ = std::max(stride_, f.chain.size());
  }

  per_vip_ = static_cast<std::uint32_t>(cfg_.topology.instances_per_vip);
  const std::size_t n_inst = vips_.size() * per_vip_;
  capacity_.resize(n_inst);
  demand_sum_.assign(n_inst, 0.0);
  load_.assign(n_inst, 0.0);
  for (const auto& v : vips_) {
    std::vector<InstanceValue> caps;
    for (const auto& in : v.instances) {
      capacity_[in.id.value] = in.capacity;
      caps.push_back({in.id, in.capacity});
    }
    vip_ids_.push_back(v.instance_ids());
    wcmp_.emplace_back(caps);
  }

  ControllerConfig ccfg;
  ccfg.polling_interval = cfg_.polling_interval;
  ccfg.m = cfg_.dispatcher.kind == DispatcherKind::kAwfd ? cfg_.dispatcher.m : 0;
  ccfg.ewma_alpha = cfg_.ewma_alpha;
  ccfg.drop_prob = cfg_.drop_prob;
  ccfg.mode = cfg_.capacity_mode;
  for (const auto& v : vips_) controllers_.emplace_back(v.id, ccfg);

  for (int l = 0; l < cfg_.lb_count; ++l) {
    LoadBalancer lb(LbId(static_cast<std::uint32_t>(l)), cfg_.stage2);
    for (std::size_t j = 0; j < vips_.size(); ++j) lb.install(controllers_[j].initial_weights(vips_[j]));
    lbs_.push_back(std::move(lb));
    std::vector<InstanceId> choice;
    for (const auto& v : vips_) {
      std::vector<InstanceValue> avail;
      for (const auto& in : v.instances) avail.push_back({in.id, in.capacity});
      choice.push_back(lcf_dispatch(avail));
    }
    lcf_choice_.push_back(std::move(choice));
  }

  vip_rate_.assign(vips_.size(), 0.0);
  vip_full_.assign(vips_.size(), 0.0);
  vip_mid_.assign(vips_.size(), 0.0);
  vip_tick_.assign(vips_.size(), 0.0);

  last_arrival_ = trace_.last_arrival();
  window_end_ = last_arrival_;
  if (!(window_end_ > 0.0)) {
    // Degenerate offered window (all arrivals at t = 0): measure the whole run.
    for (const auto& f : trace_.flows) window_end_ = std::max(window_end_, f.start + f.duration);
  }

  report_.dispatcher = cfg_.dispatcher.family();
  report_.m = cfg_.dispatcher.kind == DispatcherKind::kAwfd ? cfg_.dispatcher.m : 0;
  report_.interval = cfg_.polling_interval;
  report_.drop_prob = cfg_.drop_prob;
  report_.seed = cfg_.seed;
  report_.unit = trace_.unit;
  report_.window_end = window_end_;
  for (const auto& v : vips_) report_.vip_capacity.push_back(v.aggregate_capacity());
}

double Simulation::gaussian() {
  const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void Simulation::advance(double t) {
  const double dt = t - now_;
  if (dt <= 0.0) return;
  const std::size_t n = active_.size();
  for (std::size_t d = 0; d < n; ++d) {
    const double moved = rate_[d] * dt;
    delivered_[d] += moved;
    remaining_[d] -= moved;
  }
  const double full = overlap(now_, t, 0.0, window_end_);
  const double mid = overlap(now_, t, 0.1 * window_end_, 0.9 * window_end_);
  for (std::size_t j = 0; j < vips_.size(); ++j) {
    vip_full_[j] += vip_rate_[j] * full;
    vip_mid_[j] += vip_rate_[j] * mid;
    vip_tick_[j] += vip_rate_[j] * dt;
  }
  now_ = t;
}

void Simulation::recompute() {
  const std::size_t n = active_.size();
  order_.resize(n);
  for (std::size_t k = 0; k < n; ++k) order_[k] = slots_[by_demand_[k]].dense;
  allocator_.solve(capacity_, demand_, hops_, stride_, hop_count_, order_, rate_);

  std::fill(load_.begin(), load_.end(), 0.0);
  std::fill(vip_rate_.begin(), vip_rate_.end(), 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    const double r = rate_[d];
    const std::uint32_t* h = hops_.data() + d * stride_;
    for (std::uint8_t k = 0; k < hop_count_[d]; ++k) {
      load_[h[k]] += r;
      vip_rate_[h[k] / per_vip_] += r;  // chains visit each VIP at most once
    }
  }
  for (std::size_t i = 0; i < load_.size(); ++i) {
    report_.max_overshoot = std::max(report_.max_overshoot, load_[i] - capacity_[i]);
  }
}

InstanceId Simulation::dispatch(std::uint32_t vip, FlowKey key, std::uint32_t lb) {
  const VipId v(vip);
  switch (cfg_.dispatcher.kind) {
    case DispatcherKind::kAwfd:
      return lbs_[lb].handle_flow(key, v);
    case DispatcherKind::kEcmp:
      return lbs_[lb].handle_flow(key, v, [&] { return ecmp_dispatch(vip_ids_[vip], key); });
    case DispatcherKind::kWcmp:
      return lbs_[lb].handle_flow(key, v, [&] { return wcmp_[vip].dispatch(key); });
    case DispatcherKind::kLcf:
      return lbs_[lb].handle_flow(key, v, [&] { return lcf_choice_[lb][vip]; });
    case DispatcherKind::kOracle:
      return lbs_[lb].handle_flow(key, v, [&] {
        // Knows flow sizes: headroom is capacity minus committed demand.
        std::vector<InstanceValue> live;
        live.reserve(per_vip_);
        for (auto id : vip_ids_[vip]) live.push_back({id, capacity_[id.value] - demand_sum_[id.value]});
        return oracle_dispatch(live);
      });
  }
  throw Error("unknown dispatcher");
}

void Simulation::on_arrival(std::uint32_t index) {
  const Flow& flow = trace_.flows[index];
  std::uint32_t slot;
  if (!free_slots_.empty()) {
    slot = free_slots_.back();
    free_slots_.pop_back();
  } else {
    slot = static_cast<std::uint32_t>(slots_.size());
    slots_.emplace_back();
    slot_keys_.resize(slots_.size() * stride_);
    slot_lbs_.resize(slots_.size() * stride_);
  }
  ActiveFlow& f = slots_[slot];
  f.trace_index = index;
  f.demand = flow.rate;
  f.dense = static_cast<std::uint32_t>(active_.size());

  active_.push_back(slot);
  demand_.push_back(flow.rate);
  rate_.push_back(0.0);
  delivered_.push_back(0.0);
  remaining_.push_back(flow.size());
  size_.push_back(flow.size());
  hop_count_.push_back(static_cast<std::uint8_t>(flow.chain.size()));
  hops_.resize(active_.size() * stride_, 0);
  std::uint32_t* hops = hops_.data() + f.dense * stride_;
  for (std::size_t h = 0; h < flow.chain.size(); ++h) {
    const VipId v = flow.chain[h];
    const FlowKey key = hop_key(flow.key, v, cfg_.seed);
    const auto lb = static_cast<std::uint32_t>(mix64(key, kLbSeed) % lbs_.size());
    const InstanceId chosen = dispatch(v.value, key, lb);
    hops[h] = chosen.value;
    slot_keys_[slot * stride_ + h] = key;
    slot_lbs_[slot * stride_ + h] = lb;
    demand_sum_[chosen.value] += flow.rate;
    report_.demanded_units += flow.size();
  }

  auto pos = std::lower_bound(by_demand_.begin(), by_demand_.end(), slot, [&](std::uint32_t a, std::uint32_t b) {
    return slots_[a].demand < slots_[b].demand || (slots_[a].demand == slots_[b].demand && a < b);
  });
  by_demand_.insert(pos, slot);

  if (cfg_.mode == CompletionMode::kFixedDuration) {
    queue_.push(flow.start + flow.duration, EventType::kDeparture, slot);
  }
  recompute();
}

std::uint32_t Simulation::check_pcc(std::uint32_t slot) {
  std::uint32_t violations = 0;
  const ActiveFlow& f = slots_[slot];
  const Flow& flow = trace_.flows[f.trace_index];
  const std::uint32_t* hops = hops_.data() + f.dense * stride_;
  for (std::size_t h = 0; h < flow.chain.size(); ++h) {
    ++report_.pcc_checks;
    const auto hit = lbs_[slot_lbs_[slot * stride_ + h]].connections().find(slot_keys_[slot * stride_ + h],
                                                                            flow.chain[h]);
    if (!hit || hit->value != hops[h]) ++violations;
  }
  return violations;
}

void Simulation::depart(std::uint32_t slot) {
  ActiveFlow& f = slots_[slot];
  const Flow& flow = trace_.flows[f.trace_index];
  report_.pcc_violations += check_pcc(slot);
  const std::uint32_t d = f.dense;
  for (std::size_t h = 0; h < flow.chain.size(); ++h) {
    lbs_[slot_lbs_[slot * stride_ + h]].complete_flow(slot_keys_[slot * stride_ + h], flow.chain[h]);
    demand_sum_[hops_[d * stride_ + h]] -= f.demand;
    report_.delivered_units += delivered_[d];
  }
  fct_sum_ += now_ - flow.start;
  ++report_.flows_completed;

  const std::size_t last = active_.size() - 1;
  if (d != last) {
    active_[d] = active_[last];
    slots_[active_[d]].dense = d;
    demand_[d] = demand_[last];
    rate_[d] = rate_[last];
    delivered_[d] = delivered_[last];
    remaining_[d] = remaining_[last];
    size_[d] = size_[last];
    hop_count_[d] = hop_count_[last];
    std::copy_n(hops_.begin() + static_cast<std::ptrdiff_t>(last * stride_), stride_,
                hops_.begin() + static_cast<std::ptrdiff_t>(d * stride_));
  }
  active_.pop_back();
  demand_.pop_back();
  rate_.pop_back();
  delivered_.pop_back();
  remaining_.pop_back();
  size_.pop_back();
  hop_count_.pop_back();
  hops_.resize(active_.size() * stride_);
  f.dense = kNone;

  auto pos = std::lower_bound(by_demand_.begin(), by_demand_.end(), slot, [&](std::uint32_t a, std::uint32_t b) {
    return slots_[a].demand < slots_[b].demand || (slots_[a].demand == slots_[b].demand && a < b);
  });
  by_demand_.erase(pos);
  free_slots_.push_back(slot);
}

void Simulation::sync_instances(std::uint32_t vip) {
  for (auto& in : vips_[vip].instances) {
    in.load = load_[in.id.value];
    if (cfg_.capacity_mode == CapacityMode::kMeasured) {
      in.processing_time = std::exp(cfg_.measurement_noise * gaussian()) / in.capacity;
    }
  }
}

void Simulation::on_poll(std::uint32_t k) {
  for (std::uint32_t s : active_) report_.pcc_violations += check_pcc(s);

  if (cfg_.dispatcher.kind == DispatcherKind::kAwfd) {
    for (std::uint32_t j = 0; j < vips_.size(); ++j) {
      sync_instances(j);
      const auto br = controllers_[j].poll_and_broadcast(vips_[j], lbs_, rng_);
      report_.ctrl_msgs_sent += lbs_.size();
      report_.ctrl_msgs_delivered += br.delivered.size();
      report_.ctrl_msgs_dropped += br.dropped.size();
      report_.table_updates += br.stats.total;
    }
  } else if (cfg_.dispatcher.kind == DispatcherKind::kLcf) {
    for (std::uint32_t j = 0; j < vips_.size(); ++j) {
      sync_instances(j);
      std::vector<InstanceValue> snapshot;
      for (const auto& in : vips_[j].instances) snapshot.push_back({in.id, in.available()});
      const InstanceId choice = lcf_dispatch(snapshot);
      for (std::size_t l = 0; l < lbs_.size(); ++l) {
        ++report_.ctrl_msgs_sent;
        if (bernoulli(rng_, cfg_.drop_prob)) {
          ++report_.ctrl_msgs_dropped;
        } else {
          ++report_.ctrl_msgs_delivered;
          lcf_choice_[l][j] = choice;
        }
      }
    }
  }

  const double next = static_cast<double>(k + 1) * cfg_.polling_interval;
  if (next <= last_arrival_) queue_.push(next, EventType::kPoll, k + 1);
}

void Simulation::on_tick(std::uint32_t k) {
  const double dt = now_ - last_tick_;
  double total = 0.0;
  double cap = 0.0;
  for (std::size_t j = 0; j < vips_.size(); ++j) {
    const double thr = vip_tick_[j] / dt;
    report_.series.push_back({now_, static_cast<int>(j), thr, thr / report_.vip_capacity[j]});
    total += thr;
    cap += report_.vip_capacity[j];
    vip_tick_[j] = 0.0;
  }
  report_.series.push_back({now_, kAllVips, total, total / cap});
  last_tick_ = now_;
  if (!active_.empty() || !queue_.empty()) {
    queue_.push(static_cast<double>(k + 1) * cfg_.metrics_interval, EventType::kMetricsTick, k + 1);
  }
}

MetricsReport Simulation::run() {
  for (std::uint32_t i = 0; i < trace_.flows.size(); ++i) {
    queue_.push(trace_.flows[i].start, EventType::kArrival, i);
  }
  queue_.push(0.0, EventType::kPoll, 0);
  queue_.push(cfg_.metrics_interval, EventType::kMetricsTick, 1);

  const bool conserving = cfg_.mode == CompletionMode::kSizeConserving;
  const double inf = std::numeric_limits<double>::infinity();
  while (true) {
    double t_done = inf;
    std::uint32_t first_done = kNone;
    if (conserving) {
      for (std::size_t d = 0; d < active_.size(); ++d) {
        if (rate_[d] <= 0.0) continue;
        const double t = now_ + std::max(remaining_[d], 0.0) / rate_[d];
        if (t < t_done) {
          t_done = t;
          first_done = static_cast<std::uint32_t>(d);
        }
      }
    }
    const double t_event = queue_.empty() ? inf : queue_.top().time;
    if (t_done == inf && t_event == inf) break;

    // Ticks alone never keep the loop alive.
    if (!queue_.empty() && queue_.top().type == EventType::kMetricsTick && active_.empty() &&
        queue_.size() == 1 && t_done == inf) {
      break;
    }

    ++report_.events;
    if (t_done <= t_event) {
      advance(t_done);
      remaining_[first_done] = 0.0;
      std::vector<std::uint32_t> finished;
      for (std::size_t d = 0; d < active_.size(); ++d) {
        if (remaining_[d] <= 1e-12 * size_[d]) finished.push_back(active_[d]);
      }
      for (std::uint32_t s : finished) depart(s);
      recompute();
      continue;
    }

    const Event e = queue_.pop();
    advance(e.time);
    switch (e.type) {
      case EventType::kDeparture:
        depart(e.payload);
        recompute();
        break;
      case EventType::kPoll:
        on_poll(e.payload);
        break;
      case EventType::kArrival:
        on_arrival(e.payload);
        break;
      case EventType::kMetricsTick:
        on_tick(e.payload);
        break;
    }
  }

  double total_full = 0.0;
  double total_mid = 0.0;
  double total_cap = 0.0;
  const double mid_len = 0.8 * window_end_;
  for (std::size_t j = 0; j < vips_.size(); ++j) {
    const double thr = window_end_ > 0.0 ? vip_full_[j] / window_end_ : 0.0;
    const double thr_mid = mid_len > 0.0 ? vip_mid_[j] / mid_len : 0.0;
    report_.vip_throughput.push_back(thr);
    report_.vip_throughput_mid80.push_back(thr_mid);
    total_full += thr;
    total_mid += thr_mid;
    total_cap += report_.vip_capacity[j];
  }
  report_.mean_omega = total_full / total_cap;
  report_.mean_omega_mid80 = total_mid / total_cap;
  report_.mean_fct = report_.flows_completed > 0 ? fct_sum_ / static_cast<double>(report_.flows_completed) : 0.0;
  for (const auto& lb : lbs_) report_.stale_updates += lb.stale_updates();
  return std::move(report_);
}

}  // namespace

MetricsReport run_simulation(const SimConfig& cfg, const FlowTrace& trace) {
  Simulation sim(cfg, trace);
  return sim.run();
}

}  // namespace spotlight
