#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spotlight/core.hpp"

namespace spotlight {

inline constexpr int kAllVips = -1;

struct SeriesPoint {
  double time = 0.0;
  int vip = kAllVips;  // kAllVips for the aggregate row
  double throughput = 0.0;
  double omega = 0.0;
};

struct MetricsReport {
  // Run identity, echoed into the summary row.
  std::string dispatcher;
  int m = 0;
  double interval = 0.0;
  double drop_prob = 0.0;
  std::uint64_t seed = 0;
  std::string unit;

  std::vector<SeriesPoint> series;

  // Omega is averaged over the offered-traffic window [0, last arrival]; the
  // mid-80 variant drops its first and last 10%.
  double window_end = 0.0;
  std::vector<double> vip_capacity;
  std::vector<double> vip_throughput;        // time-averaged T^j
  std::vector<double> vip_throughput_mid80;
  double mean_omega = 0.0;
  double mean_omega_mid80 = 0.0;

  double mean_fct = 0.0;
  std::uint64_t flows_completed = 0;
  double delivered_units = 0.0;
  double demanded_units = 0.0;  // sum of nominal r * d over flow-hops

  std::uint64_t pcc_checks = 0;
  std::uint64_t pcc_violations = 0;

  std::uint64_t ctrl_msgs_sent = 0;
  std::uint64_t ctrl_msgs_delivered = 0;
  std::uint64_t ctrl_msgs_dropped = 0;
  std::uint64_t stale_updates = 0;
  std::uint64_t table_updates = 0;

  // Largest observed excess of an instance's delivered load over its
  // capacity; stays at rounding level.
  double max_overshoot = 0.0;
  std::uint64_t events = 0;
};

// Time-averaged T^j / C^j.
double utilization(const MetricsReport& report, VipId vip);

void write_series_csv(std::ostream& out, const MetricsReport& report);

std::string summary_header();
std::string summary_row(const MetricsReport& report);
void write_summary_csv(std::ostream& out, const std::vector<MetricsReport>& reports);

}  // namespace spotlight
