#include "wpnoma/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace wpnoma::experiment {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw ConfigError("failed to write " + path.string());
}

}  // namespace

const char* to_string(Scheme s) { return s == Scheme::lcd ? "lcd" : "sicd"; }

const char* to_string(Axis a) {
  switch (a) {
    case Axis::s_th: return "s_th";
    case Axis::d_er_ap: return "d_er_ap";
    case Axis::k: return "k";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "lcd") return Scheme::lcd;
  if (name == "sicd") return Scheme::sicd;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

Axis parse_axis(std::string_view name) {
  if (name == "s_th") return Axis::s_th;
  if (name == "d_er_ap") return Axis::d_er_ap;
  if (name == "k") return Axis::k;
  throw ConfigError("unknown axis '" + std::string(name) + "'");
}

double to_mbps(double bits, std::size_t slots, double bandwidth_hz) {
  if (slots == 0) throw ConfigError("slot count must be positive");
  return bits / static_cast<double>(slots) * bandwidth_hz / 1e6;
}

std::vector<double> axis_values(Axis axis, double from, double to, int steps) {
  if (steps < 1) throw ConfigError("steps must be at least 1");
  if (!std::isfinite(from) || !std::isfinite(to)) throw ConfigError("axis range must be finite");
  std::vector<double> out;
  for (int n = 0; n < steps; ++n) {
    const double v = steps == 1 ? from : from + (to - from) * n / (steps - 1);
    out.push_back(v);
  }
  if (axis == Axis::k) {
    for (double& v : out) {
      v = std::round(v);
      if (v < 1.0) throw ConfigError("K must be at least 1");
    }
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  if (axis == Axis::d_er_ap) {
    for (double v : out) {
      if (!(v > 0.0)) throw ConfigError("distance must be positive");
    }
  }
  return out;
}

ScenarioConfig apply_axis(ScenarioConfig c, Axis axis, double value) {
  switch (axis) {
    case Axis::s_th: c.set_threshold_db(value); break;
    case Axis::d_er_ap: c.er_ap_distance_m = value; break;
    case Axis::k: c.set_users(static_cast<std::size_t>(std::llround(value))); break;
  }
  return c;
}

PointResult solve_point(const Scenario& scenario, const sicd::SicdOptions& sicd_options,
                        const lcd::LcdOptions& lcd_options) {
  PointResult p;
  p.scenario = scenario;
  p.sicd = sicd::solve_sicd(scenario, sicd_options);
  if (p.sicd.report.status == SolveStatus::infeasible) {
    p.lcd.allocation = p.sicd.allocation;
    p.lcd.rates = rates(Decoding::lcd, scenario, p.lcd.allocation);
    p.lcd.report.status = SolveStatus::infeasible;
    p.lcd.report.message = "no SICD solution to take tau from: " + p.sicd.report.message;
    return p;
  }
  p.lcd = lcd::solve_lcd_given_tau(scenario, p.sicd.allocation.tau, lcd_options);
  return p;
}

SweepRow make_row(Scheme scheme, Axis axis, double value, const Scenario& s, const SolveResult& r) {
  SweepRow row;
  row.scheme = scheme;
  row.axis = axis;
  row.value = value;
  row.status = r.report.status;
  row.feasible = r.report.status != SolveStatus::infeasible;
  row.iterations = r.report.iterations;
  if (row.feasible) {
    row.sum_throughput_mbps = to_mbps(r.sum_throughput(), s.slots, s.bandwidth_hz);
    row.avg_user_throughput_mbps = row.sum_throughput_mbps / static_cast<double>(s.users);
    row.downlink_energy_j = downlink_energy(s, r.allocation);
    row.transferred_energy_j = transferred_energy(s, r.allocation);
    row.tau_mean = mean(r.allocation.tau);
  }
  return row;
}

std::size_t workers_from_env() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SweepRow> run_sweep(const ScenarioConfig& config, Axis axis,
                                std::span<const double> values, std::size_t workers) {
  std::vector<Scenario> scenarios;
  for (double v : values) scenarios.push_back(build_scenario(apply_axis(config, axis, v)));

  std::vector<SweepRow> rows(2 * values.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  auto work = [&] {
    for (std::size_t k = next++; k < values.size(); k = next++) {
      try {
        const PointResult p = solve_point(scenarios[k]);
        rows[2 * k] = make_row(Scheme::sicd, axis, values[k], p.scenario, p.sicd);
        rows[2 * k + 1] = make_row(Scheme::lcd, axis, values[k], p.scenario, p.lcd);
      } catch (...) {
        const std::lock_guard<std::mutex> hold(failure_lock);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t count = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, values.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < count; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "# wpnoma sweep csv v" << kCsvVersion << "\n";
  out << "scheme,axis,value,feasible,status,avg_user_throughput_mbps,sum_throughput_mbps,"
         "downlink_energy_j,transferred_energy_j,tau_mean,iterations\n";
  for (const SweepRow& r : rows) {
    out << to_string(r.scheme) << ',' << to_string(r.axis) << ',' << fmt(r.value) << ','
        << (r.feasible ? 1 : 0) << ',' << to_string(r.status) << ','
        << fmt(r.avg_user_throughput_mbps) << ',' << fmt(r.sum_throughput_mbps) << ','
        << fmt(r.downlink_energy_j) << ',' << fmt(r.transferred_energy_j) << ','
        << fmt(r.tau_mean) << ',' << r.iterations << '\n';
  }
}

void write_solve_csv(std::ostream& out, Scheme scheme, const Scenario& s, const SolveResult& r) {
  const SolverReport& rep = r.report;
  out << "# wpnoma solve csv v" << kCsvVersion << "\n";
  out << "record,user,slot,value\n";
  auto scalar = [&](const char* name, const std::string& v) { out << name << ",,," << v << '\n'; };
  scalar("scheme", to_string(scheme));
  scalar("status", to_string(rep.status));
  scalar("users", std::to_string(s.users));
  scalar("slots", std::to_string(s.slots));
  scalar("sum_throughput_bits", fmt(r.sum_throughput()));
  scalar("sum_throughput_mbps", fmt(to_mbps(r.sum_throughput(), s.slots, s.bandwidth_hz)));
  scalar("downlink_energy_j", fmt(downlink_energy(s, r.allocation)));
  scalar("transferred_energy_j", fmt(transferred_energy(s, r.allocation)));
  scalar("iterations", std::to_string(rep.iterations));
  scalar("newton_steps", std::to_string(rep.newton_steps));
  scalar("duality_gap", fmt(rep.duality_gap));
  scalar("relative_gap", fmt(rep.relative_gap));
  scalar("kkt_residual", fmt(rep.kkt_residual));
  scalar("causality_violation_j", fmt(rep.causality_violation));
  scalar("threshold_violation", fmt(rep.threshold_violation));
  for (std::size_t k = 0; k < rep.objective_trace.size(); ++k) {
    out << "objective_trace,," << k << ',' << fmt(rep.objective_trace[k]) << '\n';
  }
  for (std::size_t t = 0; t < r.allocation.slots(); ++t) {
    out << "tau,," << t << ',' << fmt(r.allocation.tau[t]) << '\n';
  }
  for (std::size_t i = 0; i < r.allocation.users(); ++i) {
    for (std::size_t t = 0; t < r.allocation.slots(); ++t) {
      out << "energy_j," << i << ',' << t << ',' << fmt(r.allocation.energy(i, t)) << '\n';
    }
  }
  for (std::size_t i = 0; i < r.rates.rate.users(); ++i) {
    for (std::size_t t = 0; t < r.rates.rate.slots(); ++t) {
      out << "sinr," << i << ',' << t << ',' << fmt(r.rates.sinr(i, t)) << '\n';
      out << "rate_bits," << i << ',' << t << ',' << fmt(r.rates.rate(i, t)) << '\n';
    }
  }
  for (std::size_t i = 0; i < r.rates.rate.users(); ++i) {
    out << "user_throughput_mbps," << i << ",,"
        << fmt(to_mbps(r.rates.user_total(i), s.slots, s.bandwidth_hz)) << '\n';
  }
  if (!rep.message.empty()) {
    std::string m = rep.message;
    std::replace(m.begin(), m.end(), ',', ';');
    std::replace(m.begin(), m.end(), '\n', ' ');
    scalar("message", m);
  }
}

int cmd_solve(const std::filesystem::path& config, Scheme scheme, const std::filesystem::path& out,
              std::ostream& log) {
  try {
    const Scenario s = build_scenario(load_config(config));
    const SolveResult r = scheme == Scheme::sicd ? SolveResult(sicd::solve_sicd(s))
                                                 : SolveResult(solve_point(s).lcd);
    std::ostringstream text;
    write_solve_csv(text, scheme, s, r);
    write_file(out, text.str());
    switch (r.report.status) {
      case SolveStatus::optimal: return 0;
      case SolveStatus::infeasible:
        log << to_string(scheme) << ": infeasible: " << r.report.message << "\n";
        return 2;
      case SolveStatus::max_iterations: break;
    }
    log << to_string(scheme) << ": stopped before convergence: " << r.report.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_sweep(const std::filesystem::path& config, Axis axis, double from, double to, int steps,
              const std::filesystem::path& out, std::ostream& log) {
  try {
    const ScenarioConfig c = load_config(config);
    const std::vector<double> values = axis_values(axis, from, to, steps);
    const std::vector<SweepRow> rows = run_sweep(c, axis, values, workers_from_env());
    std::ostringstream text;
    write_sweep_csv(text, rows);
    write_file(out, text.str());
    return 0;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace wpnoma::experiment
