// Acceptance suite: one PASS/FAIL line per criterion, with tolerances and
// runtime budgets fixed below.
//
//   acceptance [--cli PATH] [--full-scale-pcc]
//
// --cli runs the determinism check through the command-line tool instead of
// the library. --full-scale-pcc runs only the 100-instance, 100k-flow PCC
// sweep.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "oracles.hpp"
#include "spotlight/controller.hpp"
#include "spotlight/dispatch.hpp"
#include "spotlight/experiment.hpp"
#include "spotlight/loadbalancer.hpp"
#include "spotlight/sharing.hpp"

using namespace spotlight;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

constexpr int kReplications = 3;

const InstanceId f1(1), f2(2), f3(3), f4(4);

std::vector<InstanceValue> example_availability() { return {{f1, 2}, {f2, 1}, {f3, 0}, {f4, 0}}; }

Outcome worked_example() {
  const auto w = quantize_weights(example_availability(), 2);
  const std::map<InstanceId, double> want{{f1, 2.0 / 3.0}, {f2, 1.0 / 3.0}, {f3, 0.0}, {f4, 0.0}};
  bool ok = true;
  for (const auto& [id, p] : want) ok &= dispatch_probability(w, id) == p;
  const auto t = build_awfd_tables(w);
  std::map<InstanceId, std::uint64_t> hits;
  for (FlowKey r = 0; r < t.weight_sum(); ++r) ++hits[awfd_dispatch(t, r)];
  ok &= t.weight_sum() == 3 && hits[f1] == 2 && hits[f2] == 1 && hits[f3] == 0 && hits[f4] == 0;
  return {ok, fmt("p = {%.6f, %.6f, %.6f, %.6f}; residues 0..2 -> f1 x%llu, f2 x%llu", dispatch_probability(w, f1),
                  dispatch_probability(w, f2), dispatch_probability(w, f3), dispatch_probability(w, f4),
                  static_cast<unsigned long long>(hits[f1]), static_cast<unsigned long long>(hits[f2]))};
}

// Two elephants are both fully served only on distinct non-overwhelmed DIPs.
Outcome elephant_collisions() {
  constexpr int kTrials = 100000;
  constexpr double kTol = 0.015;
  const auto avail = example_availability();
  const std::vector<InstanceId> ids{f1, f2, f3, f4};
  const auto weights = quantize_weights(avail, 2);
  std::mt19937_64 rng(2024);

  auto served = [](InstanceId a, InstanceId b) {
    const bool a_ok = a == f1 || a == f2;
    const bool b_ok = b == f1 || b == f2;
    return a_ok && b_ok && a != b;
  };
  int ecmp = 0, awfd = 0, lcf = 0;
  for (int t = 0; t < kTrials; ++t) {
    const FlowKey k1 = rng(), k2 = rng();
    ecmp += served(ecmp_dispatch(ids, k1), ecmp_dispatch(ids, k2));
    LoadBalancer lb(LbId(0));
    lb.install(weights);
    awfd += served(lb.handle_flow(k1, VipId{}), lb.handle_flow(k2, VipId{}));
    lcf += served(lcf_dispatch(avail), lcf_dispatch(avail));
  }
  const double pe = static_cast<double>(ecmp) / kTrials;
  const double pa = static_cast<double>(awfd) / kTrials;
  const double pl = static_cast<double>(lcf) / kTrials;
  const bool ok = std::abs(pe - 0.125) <= kTol && std::abs(pa - 4.0 / 9.0) <= kTol && std::abs(pl) <= kTol;
  return {ok, fmt("ECMP %.4f (0.125), AWFD(2) %.4f (0.444), LCF %.4f (0), tol +-%.3f", pe, pa, pl, kTol)};
}

Outcome class_exactness() {
  std::mt19937_64 rng(3);
  int vectors = 0;
  std::uint64_t residues = 0;
  bool ok = true;
  while (vectors < 1000) {
    const int n = 1 + static_cast<int>(rng() % 64);
    const int m = 1 + static_cast<int>(rng() % 16);
    WeightVector w;
    w.m = m;
    for (int i = 0; i < n; ++i) w.weights[InstanceId(static_cast<std::uint32_t>(i))] = static_cast<int>(rng() % (m + 1));
    if (w.sum() == 0) continue;
    ++vectors;
    const auto t = build_awfd_tables(w);
    const auto pc = PriorityClasses::from(w);
    std::vector<std::uint64_t> seen(static_cast<std::size_t>(m) + 1, 0);
    for (FlowKey r = 0; r < t.weight_sum(); ++r, ++residues) {
      ++seen[static_cast<std::size_t>(t.select_class(r))];
      ok &= w.weight_of(awfd_dispatch(t, r)) >= 1;
      ok &= w.weight_of(awfd_dispatch(t, r, Stage2Hash::kIndependent)) >= 1;
    }
    for (int k = 0; k <= m; ++k) ok &= seen[k] == static_cast<std::uint64_t>(k) * pc.classes[k].size();
  }
  return {ok, fmt("%d vectors, %llu residues enumerated", vectors, static_cast<unsigned long long>(residues))};
}

Outcome update_bound() {
  std::mt19937_64 rng(4);
  bool ok = true;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 64);
    const int m = 1 + static_cast<int>(rng() % 16);
    WeightVector a;
    a.m = m;
    for (int i = 0; i < n; ++i) a.weights[InstanceId(static_cast<std::uint32_t>(i))] = static_cast<int>(rng() % (m + 1));
    WeightVector b = a;
    const int changes = static_cast<int>(rng() % (n + 1));
    for (int c = 0; c < changes; ++c) {
      b.weights[InstanceId(static_cast<std::uint32_t>(rng() % n))] = static_cast<int>(rng() % (m + 1));
    }
    const auto s = compact_diff(a, b);
    const auto bound = static_cast<std::uint64_t>(m) + 2 * changed_instances(a, b);
    ok &= s.total <= bound;
    if (bound > 0) worst = std::max(worst, static_cast<double>(s.total) / static_cast<double>(bound));
  }
  return {ok, fmt("1000 pairs, max total/(m+2x) = %.3f", worst)};
}

ExperimentSpec desk(const std::string& preset_name) {
  auto s = preset(preset_name, "desk");
  s.write_series = false;
  s.jobs = jobs();
  return s;
}

Outcome pcc_sweep(const std::string& scale) {
  auto s = preset("paper-synth", scale);
  s.intervals = {0.25};
  s.drop_probs = {0.2};
  s.write_series = false;
  s.jobs = jobs();
  std::uint64_t violations = 0, checks = 0, dropped = 0;
  for (const auto& r : run_experiment(s)) {
    violations += r.pcc_violations;
    checks += r.pcc_checks;
    dropped += r.ctrl_msgs_dropped;
  }
  return {violations == 0, fmt("%zu dispatchers, %llu checks, %llu dropped updates, %llu violations",
                               s.dispatchers.size(), static_cast<unsigned long long>(checks),
                               static_cast<unsigned long long>(dropped), static_cast<unsigned long long>(violations))};
}

std::string label(const MetricsReport& r) {
  if (r.dispatcher != "AWFD") return r.dispatcher;
  return r.m == kInfiniteM ? std::string("AWFD(inf)") : "AWFD(" + std::to_string(r.m) + ")";
}

// Mean omega per key, averaged over replications.
std::map<std::string, double> mean_omega_by(const std::vector<MetricsReport>& reports,
                                            const std::function<std::string(const MetricsReport&)>& key) {
  std::map<std::string, double> sum;
  std::map<std::string, int> n;
  for (const auto& r : reports) {
    sum[key(r)] += r.mean_omega;
    ++n[key(r)];
  }
  for (auto& [k, v] : sum) v /= n[k];
  return sum;
}

Outcome dispatcher_ordering() {
  auto s = desk("paper-synth");
  s.intervals = {0.5};
  s.replications = kReplications;
  const auto om = mean_omega_by(run_experiment(s), label);
  const double oracle = om.at("ORACLE"), a4 = om.at("AWFD(4)"), a2 = om.at("AWFD(2)"), wcmp = om.at("WCMP"),
               ecmp = om.at("ECMP");
  const bool ok = oracle >= a4 && a4 >= a2 && a2 >= wcmp && wcmp >= ecmp && a4 - ecmp >= 0.05;
  return {ok, fmt("ORACLE %.4f >= AWFD(4) %.4f >= AWFD(2) %.4f >= WCMP %.4f >= ECMP %.4f (LCF %.4f); "
                  "AWFD(4) - ECMP = %.1f pp",
                  oracle, a4, a2, wcmp, ecmp, om.at("LCF"), 100 * (a4 - ecmp))};
}

Outcome interval_sensitivity() {
  auto s = desk("interval-sweep");
  s.intervals = {0.1, 1.0};
  s.replications = kReplications;
  const auto om = mean_omega_by(run_experiment(s), [](const MetricsReport& r) {
    return label(r) + "@" + std::to_string(std::lround(r.interval * 1000));
  });
  const double lcf = om.at("LCF@100") - om.at("LCF@1000");
  const double awfd = om.at("AWFD(4)@100") - om.at("AWFD(4)@1000");
  const bool ok = lcf > awfd && awfd < 0.05;
  return {ok, fmt("100 ms -> 1 s: LCF drops %.1f pp (%.4f -> %.4f), AWFD(4) drops %.1f pp (%.4f -> %.4f)",
                  100 * lcf, om.at("LCF@100"), om.at("LCF@1000"), 100 * awfd, om.at("AWFD(4)@100"),
                  om.at("AWFD(4)@1000"))};
}

Outcome m_saturation() {
  auto s = desk("m-sweep");
  s.dispatchers = {{DispatcherKind::kAwfd, 4}, {DispatcherKind::kAwfd, kInfiniteM}};
  s.replications = kReplications;
  const auto om = mean_omega_by(run_experiment(s), label);
  const double ratio = om.at("AWFD(4)") / om.at("AWFD(inf)");
  return {ratio >= 0.97,
          fmt("AWFD(4) %.4f / AWFD(2^20) %.4f = %.4f (>= 0.97)", om.at("AWFD(4)"), om.at("AWFD(inf)"), ratio)};
}

Outcome control_loss() {
  auto s = desk("drop-sweep");
  s.drop_probs = {0.0, 0.2, 0.33};
  s.replications = kReplications;
  const auto reports = run_experiment(s);
  std::uint64_t violations = 0;
  for (const auto& r : reports) violations += r.pcc_violations;
  const auto om = mean_omega_by(reports, [](const MetricsReport& r) { return fmt("%.2f", r.drop_prob); });
  const double o0 = om.at("0.00"), o20 = om.at("0.20"), o33 = om.at("0.33");
  const bool ok = std::abs(o20 - o0) <= 0.03 && o33 <= o0 && violations == 0;
  return {ok, fmt("drop 0: %.4f, 0.2: %.4f (|diff| %.2f pp <= 3), 0.33: %.4f (<= drop 0); %llu PCC violations", o0,
                  o20, 100 * std::abs(o20 - o0), o33, static_cast<unsigned long long>(violations))};
}

Outcome control_traffic() {
  const double r = control_traffic_rate(1000, 50);
  return {r == 12800000.0, fmt("control_traffic_rate(1000, 50) = %.1f B/s", r)};
}

Outcome water_filling_oracle() {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    std::vector<double> d;
    for (std::size_t i = 0; i < n; ++i) d.push_back(std::uniform_real_distribution<double>(0.01, 10.0)(rng));
    const double c = std::uniform_real_distribution<double>(0.1, 60.0)(rng);
    const auto got = recompute_shares(c, d);
    const auto want = oracle::water_fill(c, d);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(got[i] - want[i]) / want[i]);
  }
  return {worst <= 1e-9, fmt("1000 instances, max relative error %.2e (<= 1e-9)", worst)};
}

Outcome fct_improvement() {
  auto s = desk("paper-synth");
  s.dispatchers = {{DispatcherKind::kAwfd, 4}, {DispatcherKind::kEcmp, 0}};
  s.intervals = {0.5};
  s.base.mode = CompletionMode::kSizeConserving;
  s.replications = kReplications;
  std::map<std::string, double> fct;
  for (const auto& r : run_experiment(s)) fct[label(r)] += r.mean_fct / kReplications;
  const double a = fct.at("AWFD(4)"), e = fct.at("ECMP");
  return {a < e, fmt("size-conserving mean FCT: AWFD(4) %.3f s < ECMP %.3f s (%.1f%% lower)", a, e, 100 * (1 - a / e))};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::string& cli, double& first_run_s) {
  const fs::path dir = fs::temp_directory_path() / ("spotlight_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<double> times;
  for (const char* sub : {"a", "b"}) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path out = dir / sub;
    if (!cli.empty()) {
      const fs::path cfg = dir / "paper-synth.json";
      std::ofstream(cfg) << R"({"preset": "paper-synth", "write_series": false})";
      const std::string cmd = "'" + cli + "' run --quiet --config '" + cfg.string() + "' --out '" + out.string() +
                              "' --jobs " + std::to_string(jobs());
      if (std::system(cmd.c_str()) != 0) return {false, "cli run failed: " + cmd};
    } else {
      auto s = desk("paper-synth");
      s.output_dir = out;
      write_results(s, run_experiment(s));
    }
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  first_run_s = times[0];
  const auto a = slurp(dir / "a" / "summary.csv");
  const auto b = slurp(dir / "b" / "summary.csv");
  fs::remove_all(dir);
  const auto rows = std::count(a.begin(), a.end(), '\n') - 1;
  return {!a.empty() && a == b, fmt("%s, %ld rows, %zu bytes, %s", cli.empty() ? "library" : "cli",
                                    static_cast<long>(rows), a.size(), a == b ? "byte-identical" : "DIFFERENT")};
}

void report(const std::string& id, const std::string& name, const Outcome& o, double dt, double budget, int& failed) {
  const bool in_time = dt < budget;
  const bool pass = o.pass && in_time;
  failed += !pass;
  std::printf("%s  %-4s %s: %s [%.2f s, budget %.1f s%s]\n", pass ? "PASS" : "FAIL", id.c_str(), name.c_str(),
              o.detail.c_str(), dt, budget, in_time ? "" : ", OVER BUDGET");
  std::fflush(stdout);
}

int run_all(const std::vector<Criterion>& criteria) {
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report(c.id, c.name, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), c.budget_s,
           failed);
  }
  return failed;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  bool full = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--full-scale-pcc") {
      full = true;
    } else if (a == "--cli" && i + 1 < argc) {
      cli = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--cli PATH] [--full-scale-pcc]\n");
      return 2;
    }
  }

  if (full) {
    const int failed = run_all({{"5F", "PCC, full scale (4 x 100 instances, 100k flows, 250 ms, drop 0.2)", 7200,
                                 [] { return pcc_sweep("full"); }}});
    return failed == 0 ? 0 : 1;
  }

  const std::vector<Criterion> criteria = {
      {"1", "worked-example probabilities", 1, worked_example},
      {"2", "elephant collision rates", 10, elephant_collisions},
      {"3", "stage-I class exactness", 10, class_exactness},
      {"4", "compact update bound", 5, update_bound},
      {"5", "PCC under lossy control (desk scale, 250 ms, drop 0.2)", 60, [] { return pcc_sweep("desk"); }},
      {"6", "dispatcher ordering at 500 ms", 300, dispatcher_ordering},
      {"7", "polling interval sensitivity", 300, interval_sensitivity},
      {"8", "m saturation", 300, m_saturation},
      {"9", "control-loss resilience", 300, control_loss},
      {"10", "control traffic arithmetic", 1, control_traffic},
      {"11", "water-filling oracle equivalence", 5, water_filling_oracle},
      {"FCT", "size-conserving completion time", 300, fct_improvement},
  };
  int failed = run_all(criteria);

  // The determinism budget is relative to the first of its two executions,
  // with 10% allowance for timing jitter.
  double first_run_s = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = determinism(cli, first_run_s);
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report("12", "summary determinism (paper-synth, two executions)", o, dt, 2.0 * first_run_s * 1.1, failed);

  std::printf("%zu criteria, %d failed\n", criteria.size() + 1, failed);
  return failed == 0 ? 0 : 1;
}
