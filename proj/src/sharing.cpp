#include "spotlight/sharing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace spotlight {

std::vector<double> recompute_shares(double capacity, std::span<const double> demands) {
  std::vector<double> shares(demands.size(), 0.0);
  std::vector<std::size_t> order(demands.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return demands[a] < demands[b] || (demands[a] == demands[b] && a < b);
  });

  double remaining = std::max(capacity, 0.0);
  std::size_t left = demands.size();
  for (std::size_t pos = 0; pos < order.size(); ++pos, --left) {
    const std::size_t f = order[pos];
    if (demands[f] < 0.0) throw Error("negative demand");
    const double level = remaining / static_cast<double>(left);
    if (demands[f] <= level) {
      shares[f] = demands[f];
      remaining -= demands[f];
      continue;
    }
    for (std::size_t rest = pos; rest < order.size(); ++rest) shares[order[rest]] = level;
    break;
  }
  return shares;
}

std::map<FlowKey, double> recompute_shares(const Instance& instance,
                                           const std::map<FlowKey, double>& demands) {
  std::vector<double> d;
  d.reserve(demands.size());
  for (const auto& [key, rate] : demands) d.push_back(rate);
  const auto s = recompute_shares(instance.capacity, d);
  std::map<FlowKey, double> out;
  std::size_t i = 0;
  for (const auto& [key, rate] : demands) out.emplace(key, s[i++]);
  return out;
}

double flow_effective_rate(std::span<const double> hop_shares) {
  if (hop_shares.empty()) throw Error("flow has an unassigned hop");
  return *std::min_element(hop_shares.begin(), hop_shares.end());
}

namespace {

// Fill level of one instance: the share an unbounded flow would receive.
// Infinite while the instance is not saturated.
double water_level(double capacity, std::span<const double> demands, std::vector<double>& sorted) {
  sorted.assign(demands.begin(), demands.end());
  std::sort(sorted.begin(), sorted.end());
  double remaining = std::max(capacity, 0.0);
  std::size_t left = sorted.size();
  for (double d : sorted) {
    const double level = remaining / static_cast<double>(left);
    if (d > level) return level;
    remaining -= d;
    --left;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

FixpointResult solve_chain_fixpoint(const ChainProblem& problem, int max_iterations, double tolerance) {
  const std::size_t n_inst = problem.capacities.size();
  const std::size_t n_flows = problem.flows.size();

  std::vector<std::vector<std::size_t>> members(n_inst);
  for (std::size_t f = 0; f < n_flows; ++f) {
    const auto& fl = problem.flows[f];
    if (fl.hops.empty()) throw Error("flow has an unassigned hop");
    for (auto h : fl.hops) {
      if (h >= n_inst) throw Error("hop outside instance range");
      members[h].push_back(f);
    }
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> level(n_inst, inf);
  std::vector<double> next(n_inst, inf);
  std::vector<double> demand;
  std::vector<double> scratch;
  std::vector<double> hop_shares;

  auto offered_elsewhere = [&](std::size_t f, std::size_t here) {
    double d = problem.flows[f].demand;
    for (auto h : problem.flows[f].hops) {
      if (h != here) d = std::min(d, level[h]);
    }
    return d;
  };

  FixpointResult result;
  for (int it = 1; it <= max_iterations; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < n_inst; ++i) {
      demand.clear();
      for (auto f : members[i]) demand.push_back(offered_elsewhere(f, i));
      next[i] = water_level(problem.capacities[i], demand, scratch);
      if (next[i] != level[i]) change = std::max(change, std::isinf(next[i]) || std::isinf(level[i]) ? inf : std::abs(next[i] - level[i]));
    }
    std::swap(level, next);
    result.iterations = it;
    if (change < tolerance) {
      result.converged = true;
      break;
    }
  }

  // A flow's share at each hop is water-filling against what its chain can
  // use; its rate is the smallest of those shares.
  result.rates.resize(n_flows);
  for (std::size_t f = 0; f < n_flows; ++f) {
    const auto& fl = problem.flows[f];
    hop_shares.clear();
    for (auto h : fl.hops) hop_shares.push_back(std::min(offered_elsewhere(f, h), level[h]));
    result.rates[f] = flow_effective_rate(hop_shares);
  }
  return result;
}

void ChainAllocator::solve(std::span<const double> capacity, std::span<const double> demand,
                           std::span<const std::uint32_t> hops, std::size_t stride,
                           std::span<const std::uint8_t> hop_count,
                           std::span<const std::uint32_t> demand_order, std::span<double> rate) {
  const std::size_t n_inst = capacity.size();
  const std::size_t n_flows = demand.size();

  remaining_.assign(capacity.begin(), capacity.end());
  unfrozen_count_.assign(n_inst, 0);
  for (std::size_t f = 0; f < n_flows; ++f) {
    const std::uint32_t* h = hops.data() + f * stride;
    for (std::uint8_t k = 0; k < hop_count[f]; ++k) ++unfrozen_count_[h[k]];
  }

  inst_offset_.resize(n_inst + 1);
  inst_offset_[0] = 0;
  for (std::size_t i = 0; i < n_inst; ++i) inst_offset_[i + 1] = inst_offset_[i] + unfrozen_count_[i];
  inst_flows_.resize(inst_offset_[n_inst]);
  cursor_.assign(inst_offset_.begin(), inst_offset_.end() - 1);
  for (std::size_t f = 0; f < n_flows; ++f) {
    const std::uint32_t* h = hops.data() + f * stride;
    for (std::uint8_t k = 0; k < hop_count[f]; ++k) inst_flows_[cursor_[h[k]]++] = static_cast<std::uint32_t>(f);
  }

  if (demand_order.empty()) {
    order_.resize(n_flows);
    std::iota(order_.begin(), order_.end(), 0u);
    std::sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) {
      return demand[a] < demand[b] || (demand[a] == demand[b] && a < b);
    });
    demand_order = order_;
  }

  frozen_.assign(n_flows, 0);
  std::size_t unfrozen = n_flows;
  auto freeze = [&](std::uint32_t f, double r) {
    rate[f] = r;
    frozen_[f] = 1;
    --unfrozen;
    const std::uint32_t* h = hops.data() + f * stride;
    for (std::uint8_t k = 0; k < hop_count[f]; ++k) {
      remaining_[h[k]] -= r;
      --unfrozen_count_[h[k]];
    }
  };

  std::size_t pos = 0;
  while (unfrozen > 0) {
    double level = std::numeric_limits<double>::infinity();
    std::size_t bottleneck = n_inst;
    for (std::size_t i = 0; i < n_inst; ++i) {
      if (unfrozen_count_[i] == 0) continue;
      const double lv = std::max(remaining_[i], 0.0) / unfrozen_count_[i];
      if (lv < level) {
        level = lv;
        bottleneck = i;
      }
    }

    // Flows whose demand sits at or below the lowest saturation level are
    // satisfied; freezing them can only raise the other levels.
    bool advanced = false;
    while (pos < demand_order.size()) {
      const std::uint32_t f = demand_order[pos];
      if (frozen_[f]) {
        ++pos;
        continue;
      }
      if (!(demand[f] <= level)) break;
      freeze(f, demand[f]);
      ++pos;
      advanced = true;
    }
    if (advanced || unfrozen == 0) continue;

    for (std::uint32_t k = inst_offset_[bottleneck]; k < inst_offset_[bottleneck + 1]; ++k) {
      const std::uint32_t f = inst_flows_[k];
      if (!frozen_[f]) freeze(f, level);
    }
  }
}

std::vector<double> ChainAllocator::solve(const ChainProblem& problem) {
  std::size_t stride = 1;
  for (const auto& f : problem.flows) {
    if (f.hops.empty()) throw Error("flow has an unassigned hop");
    if (f.hops.size() > 255) throw Error("chain too long");
    stride = std::max(stride, f.hops.size());
  }
  std::vector<double> demand;
  std::vector<std::uint32_t> hops(problem.flows.size() * stride, 0);
  std::vector<std::uint8_t> count;
  for (std::size_t f = 0; f < problem.flows.size(); ++f) {
    const auto& fl = problem.flows[f];
    demand.push_back(fl.demand);
    count.push_back(static_cast<std::uint8_t>(fl.hops.size()));
    for (std::size_t k = 0; k < fl.hops.size(); ++k) {
      if (fl.hops[k] >= problem.capacities.size()) throw Error("hop outside instance range");
      hops[f * stride + k] = fl.hops[k];
    }
  }
  std::vector<double> rate(problem.flows.size(), 0.0);
  solve(problem.capacities, demand, hops, stride, count, {}, rate);
  return rate;
}

}  // namespace spotlight
