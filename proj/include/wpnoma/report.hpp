#pragma once

#include <limits>
#include <string>
#include <vector>

#include "wpnoma/model.hpp"

namespace wpnoma {

enum class SolveStatus { optimal, infeasible, max_iterations };

const char* to_string(SolveStatus s);

struct SolverReport {
  SolveStatus status = SolveStatus::max_iterations;
  std::vector<double> objective_trace;  // bits/slot/Hz summed over the horizon
  int iterations = 0;
  int newton_steps = 0;
  double duality_gap = std::numeric_limits<double>::quiet_NaN();
  double relative_gap = std::numeric_limits<double>::quiet_NaN();
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  double causality_violation = 0.0;   // joules
  double threshold_violation = 0.0;   // linear SINR
  std::string message;
};

struct SolveResult {
  Allocation allocation;
  RateVector rates;
  SolverReport report;

  double sum_throughput() const { return rates.sum(); }
};

// Largest negative prefix slack, joules; zero for causal allocations.
double causality_violation(const Scenario& scenario, const Allocation& alloc);

}  // namespace wpnoma
