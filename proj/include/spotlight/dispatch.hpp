#pragma once

// Flow dispatchers: ECMP, WCMP, LCF, AWFD and the instantaneous-knowledge
// oracle. Every function here is pure; tables are immutable once built.

#include <cstdint>
#include <span>
#include <vector>

#include "spotlight/core.hpp"

namespace spotlight {

// Quantizes available capacity into integer weights in [0, m]:
//   w_i = floor(m * A_i / max A)
// All weights are 0 when m == 0 or nothing is available.
WeightVector quantize_weights(std::span<const InstanceValue> avail, int m, VipId vip = VipId{},
                              std::uint64_t epoch = 0);

// How stage II picks a member of the chosen priority class.
//   kFaithful:    key % |B_k|, the same key that stage I consumed.
//   kIndependent: mix64(key, kStage2Seed) % |B_k|.
enum class Stage2Hash { kFaithful, kIndependent };

// Instances grouped by weight; classes[k] holds every instance with weight k.
struct PriorityClasses {
  VipId vip;
  int m = 0;
  std::vector<std::vector<InstanceId>> classes;  // size m + 1

  static PriorityClasses from(const WeightVector& weights);
};

// Stage-I residue interval [lo, hi) for class k, hi - lo == k * |B_k|.
struct ClassRange {
  int k = 0;
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  friend bool operator==(const ClassRange&, const ClassRange&) = default;
};

class AwfdTables {
 public:
  AwfdTables() = default;

  static AwfdTables build(const WeightVector& weights);

  [[nodiscard]] VipId vip() const { return vip_; }
  [[nodiscard]] int m() const { return m_; }
  [[nodiscard]] std::uint64_t epoch() const { return epoch_; }
  [[nodiscard]] std::uint64_t weight_sum() const { return weight_sum_; }
  // Set when every weight is zero; dispatch then falls back to uniform
  // selection over all instances.
  [[nodiscard]] bool fallback() const { return weight_sum_ == 0; }
  [[nodiscard]] const std::vector<ClassRange>& ranges() const { return ranges_; }
  // Members of class k (k >= 1). Empty for classes without a range.
  [[nodiscard]] const std::vector<InstanceId>& group(int k) const;
  [[nodiscard]] const std::vector<InstanceId>& all_instances() const { return all_; }

  // Stage I: the class whose range holds key % weight_sum. Requires !fallback().
  [[nodiscard]] int select_class(FlowKey key) const;
  [[nodiscard]] InstanceId dispatch(FlowKey key, Stage2Hash mode = Stage2Hash::kFaithful) const;

  friend bool operator==(const AwfdTables&, const AwfdTables&) = default;

 private:
  VipId vip_;
  int m_ = 0;
  std::uint64_t epoch_ = 0;
  std::uint64_t weight_sum_ = 0;
  std::vector<ClassRange> ranges_;
  std::vector<std::vector<InstanceId>> groups_;  // parallel to ranges_
  std::vector<InstanceId> all_;
};

AwfdTables build_awfd_tables(const WeightVector& weights);

InstanceId awfd_dispatch(const AwfdTables& tables, FlowKey key,
                         Stage2Hash mode = Stage2Hash::kFaithful);

// p[f] = w_f / sum(w). Throws on an all-zero weight vector.
double dispatch_probability(const WeightVector& weights, InstanceId f);

// Uniform: the instance at index key % N.
InstanceId ecmp_dispatch(const Vip& vip, FlowKey key);
InstanceId ecmp_dispatch(std::span<const InstanceId> instances, FlowKey key);

// Static capacity-weighted ranges over key residues. Capacities are reduced
// to the smallest integer ratio that matches within 1e-6.
class WcmpTable {
 public:
  explicit WcmpTable(std::span<const InstanceValue> capacities);

  [[nodiscard]] InstanceId dispatch(FlowKey key) const;
  [[nodiscard]] std::uint64_t weight_sum() const { return ends_.empty() ? 0 : ends_.back(); }
  [[nodiscard]] const std::vector<std::uint64_t>& integer_weights() const { return weights_; }

 private:
  std::vector<InstanceId> ids_;
  std::vector<std::uint64_t> weights_;
  std::vector<std::uint64_t> ends_;  // cumulative weights
};

InstanceId wcmp_dispatch(std::span<const InstanceValue> capacities, FlowKey key);

// Argmax of the availability snapshot taken at the last poll; ties go to the
// lowest id.
InstanceId lcf_dispatch(std::span<const InstanceValue> snapshot);

// Argmax of live availability, ties to the lowest id.
InstanceId oracle_dispatch(std::span<const InstanceValue> live);

}  // namespace spotlight
