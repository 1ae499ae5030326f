#include "wpnoma/report.hpp"

#include <algorithm>

namespace wpnoma {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::max_iterations: return "max_iter";
  }
  return "unknown";
}

double causality_violation(const Scenario& scenario, const Allocation& alloc) {
  double worst = 0.0;
  const SlotMatrix slack = energy_causality_slack(scenario, alloc);
  for (double s : slack.values()) worst = std::max(worst, -s);
  return worst;
}

}  // namespace wpnoma
