#pragma once

// Single solves and parameter sweeps with CSV output.
//
// Sweep CSV, one row per point and scheme in axis order, SICD first:
//   scheme,axis,value,feasible,status,avg_user_throughput_mbps,
//   sum_throughput_mbps,downlink_energy_j,transferred_energy_j,tau_mean,iterations
// downlink_energy_j is sum_t P_B tau_t; transferred_energy_j is the energy
// the users receive, sum_{i,t} eta_i h_{i,t} P_B tau_t.
//
// LCD points reuse the harvesting fractions of the SICD solution of the
// same point.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wpnoma/config.hpp"
#include "wpnoma/lcd.hpp"
#include "wpnoma/sicd.hpp"

namespace wpnoma::experiment {

inline constexpr int kCsvVersion = 1;
inline constexpr const char* kWorkersEnv = "WPNOMA_WORKERS";

enum class Scheme { lcd, sicd };
enum class Axis { s_th, d_er_ap, k };

const char* to_string(Scheme s);
const char* to_string(Axis a);
// Throw ConfigError on unknown names.
Scheme parse_scheme(std::string_view name);
Axis parse_axis(std::string_view name);

// (bits/slot/Hz summed over slots) / T x bandwidth, in Mbit/s.
double to_mbps(double bits, std::size_t slots, double bandwidth_hz);

// N evenly spaced values from `from` to `to`; the k axis rounds to
// integers, drops duplicates and requires values >= 1.
std::vector<double> axis_values(Axis axis, double from, double to, int steps);

// Copy of config with the axis parameter set (S_th in dB, d in m, K).
ScenarioConfig apply_axis(ScenarioConfig config, Axis axis, double value);

struct PointResult {
  Scenario scenario;
  sicd::SicdResult sicd;
  lcd::LcdResult lcd;
};

// SICD, then LCD with the SICD harvesting fractions. When SICD reports the
// point infeasible LCD is reported infeasible without a solve.
PointResult solve_point(const Scenario& scenario, const sicd::SicdOptions& sicd_options = {},
                        const lcd::LcdOptions& lcd_options = {});

struct SweepRow {
  Scheme scheme = Scheme::sicd;
  Axis axis = Axis::k;
  double value = 0.0;
  bool feasible = false;
  SolveStatus status = SolveStatus::max_iterations;
  double avg_user_throughput_mbps = 0.0;
  double sum_throughput_mbps = 0.0;
  double downlink_energy_j = 0.0;
  double transferred_energy_j = 0.0;
  double tau_mean = 0.0;
  int iterations = 0;
};

SweepRow make_row(Scheme scheme, Axis axis, double value, const Scenario& scenario,
                  const SolveResult& result);

// Worker count from WPNOMA_WORKERS, else the hardware concurrency, at least 1.
std::size_t workers_from_env();

// Points run concurrently on up to `workers` threads; rows come back in
// axis order regardless of completion order.
std::vector<SweepRow> run_sweep(const ScenarioConfig& config, Axis axis,
                                std::span<const double> values, std::size_t workers);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

// Long format: record,user,slot,value with user/slot empty where unused.
void write_solve_csv(std::ostream& out, Scheme scheme, const Scenario& scenario,
                     const SolveResult& result);

// Exit codes: 0 optimal, 2 infeasible, 1 on errors and on solves that stop
// before convergence (the CSV is still written for those).
int cmd_solve(const std::filesystem::path& config, Scheme scheme, const std::filesystem::path& out,
              std::ostream& log);

// Exit 0 once the CSV is written; per-point statuses live in the rows.
// Bad configs or axis values give 1.
int cmd_sweep(const std::filesystem::path& config, Axis axis, double from, double to, int steps,
              const std::filesystem::path& out, std::ostream& log);

}  // namespace wpnoma::experiment
