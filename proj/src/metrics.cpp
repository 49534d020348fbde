#include "spotlight/metrics.hpp"

#include <cstdio>
#include <ostream>

namespace spotlight {

double utilization(const MetricsReport& report, VipId vip) {
  const auto j = static_cast<std::size_t>(vip.value);
  if (j >= report.vip_capacity.size()) throw Error("unknown vip");
  if (!(report.vip_capacity[j] > 0.0)) throw Error("zero capacity");
  return report.vip_throughput[j] / report.vip_capacity[j];
}

void write_series_csv(std::ostream& out, const MetricsReport& report) {
  out << "time_s,vip,throughput,omega\n";
  char buf[160];
  for (const auto& p : report.series) {
    if (p.vip == kAllVips) {
      std::snprintf(buf, sizeof buf, "%.6f,all,%.9g,%.9g\n", p.time, p.throughput, p.omega);
    } else {
      std::snprintf(buf, sizeof buf, "%.6f,%d,%.9g,%.9g\n", p.time, p.vip, p.throughput, p.omega);
    }
    out << buf;
  }
}

std::string summary_header() {
  return "dispatcher,m,interval_ms,drop_prob,seed,mean_omega,mean_fct_s,pcc_violations,"
         "ctrl_msgs_sent,ctrl_msgs_dropped,table_updates,mean_omega_mid80";
}

std::string summary_row(const MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%d,%g,%g,%llu,%.9f,%.9f,%llu,%llu,%llu,%llu,%.9f", r.dispatcher.c_str(), r.m,
                r.interval * 1000.0, r.drop_prob, static_cast<unsigned long long>(r.seed), r.mean_omega,
                r.mean_fct, static_cast<unsigned long long>(r.pcc_violations),
                static_cast<unsigned long long>(r.ctrl_msgs_sent),
                static_cast<unsigned long long>(r.ctrl_msgs_dropped),
                static_cast<unsigned long long>(r.table_updates), r.mean_omega_mid80);
  return buf;
}

void write_summary_csv(std::ostream& out, const std::vector<MetricsReport>& reports) {
  out << summary_header() << '\n';
  for (const auto& r : reports) out << summary_row(r) << '\n';
}

}  // namespace spotlight
