#include "spotlight/core.hpp"

#include <algorithm>
#include <numeric>

namespace spotlight {

double Instance::available() const { return std::max(capacity - load, 0.0); }

double Instance::utilization() const { return load / capacity; }

double Vip::aggregate_capacity() const {
  return std::accumulate(instances.begin(), instances.end(), 0.0,
                         [](double acc, const Instance& in) { return acc + in.capacity; });
}

std::vector<InstanceId> Vip::instance_ids() const {
  std::vector<InstanceId> ids;
  ids.reserve(instances.size());
  for (const auto& in : instances) ids.push_back(in.id);
  return ids;
}

std::uint64_t WeightVector::sum() const {
  std::uint64_t total = 0;
  for (const auto& [id, w] : weights) total += static_cast<std::uint64_t>(w);
  return total;
}

int WeightVector::weight_of(InstanceId id) const {
  auto it = weights.find(id);
  if (it == weights.end()) throw Error("instance not in weight vector");
  return it->second;
}

}  // namespace spotlight
