#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "spotlight/sharing.hpp"

using namespace spotlight;

namespace {

ChainProblem random_problem(std::mt19937_64& rng, std::size_t instances, std::size_t flows) {
  ChainProblem p;
  std::uniform_real_distribution<double> cap(1.0, 5.0);
  for (std::size_t i = 0; i < instances; ++i) p.capacities.push_back(cap(rng));
  for (std::size_t f = 0; f < flows; ++f) {
    ChainProblem::FlowSpec s;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    s.demand = 0.2 / std::sqrt(1.0 - u);  // Pareto(2)
    const std::size_t len = 1 + rng() % std::min<std::size_t>(4, instances);
    while (s.hops.size() < len) {
      const auto h = static_cast<std::uint32_t>(rng() % instances);
      if (std::find(s.hops.begin(), s.hops.end(), h) == s.hops.end()) s.hops.push_back(h);
    }
    p.flows.push_back(std::move(s));
  }
  return p;
}

}  // namespace

TEST_CASE("water-filling examples") {
  using V = std::vector<double>;
  CHECK(recompute_shares(10, V{8, 8}) == V{5, 5});
  CHECK(recompute_shares(10, V{2, 8}) == V{2, 8});
  CHECK(recompute_shares(10, V{2, 20}) == V{2, 8});
  CHECK(recompute_shares(10, V{}).empty());
  CHECK_THROWS_AS(recompute_shares(1, V{-1}), Error);

  Instance in;
  in.capacity = 10;
  const auto m = recompute_shares(in, {{1, 2.0}, {2, 20.0}});
  CHECK(m.at(1) == 2.0);
  CHECK(m.at(2) == 8.0);
}

TEST_CASE("water-filling matches the bisection oracle") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    std::vector<double> d;
    for (std::size_t i = 0; i < n; ++i) d.push_back(std::uniform_real_distribution<double>(0.0, 5.0)(rng));
    const double c = std::uniform_real_distribution<double>(0.1, 30.0)(rng);
    const auto got = recompute_shares(c, d);
    const auto want = oracle::water_fill(c, d);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-9 * std::max(want[i], 1e-300));
  }
}

TEST_CASE("effective rate is the chain minimum") {
  CHECK(flow_effective_rate(std::vector<double>{5, 3, 4}) == 3.0);
  CHECK(flow_effective_rate(std::vector<double>{7}) == 7.0);
  CHECK_THROWS_AS(flow_effective_rate(std::vector<double>{}), Error);
}

TEST_CASE("chain fixpoint converges quickly and agrees with progressive filling") {
  std::mt19937_64 rng(31);
  ChainAllocator alloc;
  int worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_problem(rng, 4 + rng() % 30, 100);
    const auto fx = solve_chain_fixpoint(p);
    CHECK(fx.converged);
    worst = std::max(worst, fx.iterations);
    const auto pf = alloc.solve(p);
    for (std::size_t f = 0; f < p.flows.size(); ++f) CHECK(std::abs(fx.rates[f] - pf[f]) <= 1e-7);
  }
  CHECK(worst <= 16);
}

TEST_CASE("progressive filling is max-min fair") {
  std::mt19937_64 rng(8);
  ChainAllocator alloc;
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = random_problem(rng, 2 + rng() % 40, 1 + rng() % 300);
    const auto r = alloc.solve(p);
    std::vector<double> load(p.capacities.size(), 0.0);
    std::vector<double> top(p.capacities.size(), 0.0);
    for (std::size_t f = 0; f < p.flows.size(); ++f) {
      CHECK(r[f] >= 0.0);
      CHECK(r[f] <= p.flows[f].demand * (1 + 1e-12));
      for (auto h : p.flows[f].hops) {
        load[h] += r[f];
        top[h] = std::max(top[h], r[f]);
      }
    }
    for (std::size_t i = 0; i < load.size(); ++i) CHECK(load[i] <= p.capacities[i] * (1 + 1e-12));
    // Every flow below its demand has a saturated hop where nobody gets more.
    for (std::size_t f = 0; f < p.flows.size(); ++f) {
      if (r[f] >= p.flows[f].demand * (1 - 1e-12)) continue;
      bool bottleneck = false;
      for (auto h : p.flows[f].hops) {
        if (load[h] >= p.capacities[h] * (1 - 1e-9) && top[h] <= r[f] * (1 + 1e-9)) bottleneck = true;
      }
      CHECK(bottleneck);
    }
  }
}

TEST_CASE("single instance allocation equals water-filling") {
  std::mt19937_64 rng(2);
  ChainAllocator alloc;
  for (int trial = 0; trial < 200; ++trial) {
    ChainProblem p;
    p.capacities = {std::uniform_real_distribution<double>(0.5, 10.0)(rng)};
    std::vector<double> d;
    for (std::size_t f = 0; f < 1 + rng() % 20; ++f) {
      d.push_back(std::uniform_real_distribution<double>(0.0, 3.0)(rng));
      p.flows.push_back({d.back(), {0}});
    }
    const auto got = alloc.solve(p);
    const auto want = recompute_shares(p.capacities[0], d);
    for (std::size_t f = 0; f < d.size(); ++f) CHECK(got[f] == doctest::Approx(want[f]).epsilon(1e-12));
  }
}
