#pragma once

// Max-min fair rate allocation: per instance, and across service chains where
// a flow's rate is the minimum of its shares along the chain.

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "spotlight/core.hpp"

namespace spotlight {

// Water-filling on one instance: each flow gets min(demand, fair level).
std::vector<double> recompute_shares(double capacity, std::span<const double> demands);
std::map<FlowKey, double> recompute_shares(const Instance& instance,
                                           const std::map<FlowKey, double>& demands);

// Minimum over the chain's per-hop shares.
double flow_effective_rate(std::span<const double> hop_shares);

// A set of chained flows over capacitated instances.
struct ChainProblem {
  struct FlowSpec {
    double demand = 0.0;
    std::vector<std::uint32_t> hops;  // instance indices, distinct
  };
  std::vector<double> capacities;
  std::vector<FlowSpec> flows;
};

struct FixpointResult {
  std::vector<double> rates;
  int iterations = 0;
  bool converged = false;
};

// Alternates per-instance water-filling with chain minimums. At instance i a
// flow demands min(r, fill levels at its other hops); iteration stops once no
// level moves by more than `tolerance`. Feeding back levels rather than the
// flow's own shares keeps mutually capped hops from locking each other low.
FixpointResult solve_chain_fixpoint(const ChainProblem& problem, int max_iterations = 64,
                                    double tolerance = 1e-9);

// Progressive filling: all unfrozen flows rise together; a flow freezes when it
// meets its demand or one of its instances saturates. Produces the same
// max-min fair allocation the fixpoint converges to, in O(hops + I^2) per
// solve. Buffers are reused across calls.
class ChainAllocator {
 public:
  // Flow f visits hops[f * stride .. f * stride + hop_count[f]).
  // `demand_order` lists flows by ascending demand; an empty span sorts
  // internally.
  void solve(std::span<const double> capacity, std::span<const double> demand,
             std::span<const std::uint32_t> hops, std::size_t stride,
             std::span<const std::uint8_t> hop_count, std::span<const std::uint32_t> demand_order,
             std::span<double> rate);

  std::vector<double> solve(const ChainProblem& problem);

 private:
  std::vector<double> remaining_;
  std::vector<std::uint32_t> unfrozen_count_;
  std::vector<std::uint32_t> inst_offset_;
  std::vector<std::uint32_t> inst_flows_;
  std::vector<std::uint32_t> cursor_;
  std::vector<char> frozen_;
  std::vector<std::uint32_t> order_;
};

}  // namespace spotlight
