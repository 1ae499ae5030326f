#include "wpnoma/lcd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wpnoma::lcd {

namespace {

void check_tau(std::span<const double> tau, std::size_t slots) {
  if (tau.size() != slots) throw DomainError("tau must have one entry per slot");
  for (double v : tau) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("tau must lie in [0, 1]");
  }
}

SlotMatrix cumulative_harvest(const Scenario& s, std::span<const double> tau) {
  SlotMatrix h(s.users, s.slots);
  for (std::size_t i = 0; i < s.users; ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < s.slots; ++t) {
      acc += s.harvest_rate(i, t) * tau[t];
      h(i, t) = acc;
    }
  }
  return h;
}

bool can_transmit(const Scenario& s, std::span<const double> tau, const SlotMatrix& harvest,
                  std::size_t i, std::size_t t) {
  return tau[t] < 1.0 && s.uplink_gain(i, t) > 0.0 && harvest(i, t) > 0.0;
}

double floor_for(const Scenario& s, std::size_t i) { return std::max(s.threshold[i], kSinrFloor); }

// Spreads the user's horizon harvest evenly over the slots `use` accepts,
// never spending more than is banked; the bank is empty after the last one.
template <typename Use>
void spread(const Scenario& s, const SlotMatrix& harvest, std::size_t i, Use use, Allocation& alloc) {
  std::vector<int> remaining(s.slots + 1, 0);
  for (std::size_t t = s.slots; t-- > 0;) remaining[t] = remaining[t + 1] + (use(t) ? 1 : 0);
  const double total = harvest(i, s.slots - 1);
  double spent = 0.0;
  for (std::size_t t = 0; t < s.slots; ++t) {
    if (!use(t)) continue;
    const double bank = harvest(i, t) - spent;
    const double e = remaining[t + 1] == 0 ? bank : std::min(bank, (total - spent) / remaining[t]);
    alloc.energy(i, t) = e;
    spent += e;
  }
}

void set_sinr(const Scenario& s, InitialPoint& p) {
  p.x_bar = SlotMatrix(s.users, s.slots);
  for (std::size_t t = 0; t < s.slots; ++t) {
    for (std::size_t i = 0; i < s.users; ++i) {
      const double x = p.allocation.tau[t] < 1.0 ? sinr_lcd(s, p.allocation, i, t) : 0.0;
      p.x_bar(i, t) = std::max(x, floor_for(s, i));
    }
  }
}

}  // namespace

Condensation condense(const SlotMatrix& x_bar, std::span<const double> tau) {
  check_tau(tau, x_bar.slots());
  Condensation c;
  c.y = SlotMatrix(x_bar.users(), x_bar.slots());
  for (std::size_t i = 0; i < x_bar.users(); ++i) {
    for (std::size_t t = 0; t < x_bar.slots(); ++t) {
      const double x = x_bar(i, t);
      if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("x_bar must be positive");
      const double y = x / (1.0 + x);
      c.y(i, t) = y;
      c.log_c += (1.0 - tau[t]) * (std::log1p(x) - y * std::log(x));
    }
  }
  return c;
}

double log_objective(const SlotMatrix& x, std::span<const double> tau) {
  check_tau(tau, x.slots());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.users(); ++i) {
    for (std::size_t t = 0; t < x.slots(); ++t) acc += (1.0 - tau[t]) * std::log1p(x(i, t));
  }
  return acc;
}

double log_surrogate(const SlotMatrix& x, const Condensation& cond, std::span<const double> tau) {
  check_tau(tau, x.slots());
  double acc = cond.log_c;
  for (std::size_t i = 0; i < x.users(); ++i) {
    for (std::size_t t = 0; t < x.slots(); ++t) {
      acc += cond.y(i, t) * (1.0 - tau[t]) * std::log(x(i, t));
    }
  }
  return acc;
}

double condensation_gap(double x, double x_bar) {
  if (!(x > 0.0) || !(x_bar > 0.0)) throw DomainError("condensation points must be positive");
  const double y = x_bar / (1.0 + x_bar);
  return std::log1p(x_bar) + y * (std::log(x) - std::log(x_bar)) - std::log1p(x);
}

BoundCheck check_condensation_bound(const SlotMatrix& x, const SlotMatrix& x_bar) {
  if (x.users() != x_bar.users() || x.slots() != x_bar.slots()) {
    throw DomainError("condensation points must have the same shape");
  }
  BoundCheck b;
  b.worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < x.values().size(); ++k) {
    b.worst = std::max(b.worst, condensation_gap(x.values()[k], x_bar.values()[k]));
  }
  b.holds = b.worst <= 0.0;
  return b;
}

InitialPoint initial_point(const Scenario& s, std::span<const double> tau) {
  s.validate();
  check_tau(tau, s.slots);
  const SlotMatrix harvest = cumulative_harvest(s, tau);
  InitialPoint p;
  p.allocation = Allocation(s.users, s.slots);
  std::copy(tau.begin(), tau.end(), p.allocation.tau.begin());
  for (std::size_t i = 0; i < s.users; ++i) {
    spread(s, harvest, i, [&](std::size_t t) { return can_transmit(s, tau, harvest, i, t); },
           p.allocation);
    for (std::size_t t = 0; t < s.slots; ++t) {
      if (!can_transmit(s, tau, harvest, i, t) && tau[t] < 1.0 && s.threshold[i] > 0.0) {
        p.infeasible = true;
        p.reason = "user " + std::to_string(i) + " cannot reach its threshold in slot " +
                   std::to_string(t);
      }
    }
  }
  set_sinr(s, p);
  return p;
}

InitialPoint tdma_point(const Scenario& s, std::span<const double> tau) {
  s.validate();
  check_tau(tau, s.slots);
  const SlotMatrix harvest = cumulative_harvest(s, tau);
  std::vector<std::size_t> ranked(s.users);
  std::vector<double> mean_gain(s.users, 0.0);
  for (std::size_t i = 0; i < s.users; ++i) {
    ranked[i] = i;
    for (std::size_t t = 0; t < s.slots; ++t) mean_gain[i] += s.uplink_gain(i, t);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return mean_gain[a] > mean_gain[b]; });
  std::vector<std::size_t> owner(s.slots);
  for (std::size_t t = 0; t < s.slots; ++t) owner[t] = ranked[t % s.users];

  InitialPoint p;
  p.allocation = Allocation(s.users, s.slots);
  std::copy(tau.begin(), tau.end(), p.allocation.tau.begin());
  for (std::size_t i = 0; i < s.users; ++i) {
    spread(s, harvest, i,
           [&](std::size_t t) { return owner[t] == i && can_transmit(s, tau, harvest, i, t); },
           p.allocation);
  }
  set_sinr(s, p);
  return p;
}

CondensedGp build_condensed_gp(const Scenario& s, std::span<const double> tau,
                               const Condensation& cond) {
  s.validate();
  check_tau(tau, s.slots);
  if (cond.y.users() != s.users || cond.y.slots() != s.slots) {
    throw DomainError("condensation does not match the scenario");
  }
  const SlotMatrix harvest = cumulative_harvest(s, tau);
  CondensedGp out;
  out.energy_var.assign(s.users * s.slots, -1);
  out.sinr_var.assign(s.users * s.slots, -1);
  out.log_c = cond.log_c;
  int next = 0;
  for (std::size_t i = 0; i < s.users; ++i) {
    for (std::size_t t = 0; t < s.slots; ++t) {
      if (can_transmit(s, tau, harvest, i, t)) {
        out.energy_var[i * s.slots + t] = next++;
        out.sinr_var[i * s.slots + t] = next++;
      } else if (tau[t] < 1.0 && s.threshold[i] > 0.0) {
        out.infeasible = true;
        out.reason = "user " + std::to_string(i) + " cannot transmit in slot " +
                     std::to_string(t) + " but has a positive threshold";
      }
    }
  }
  gp::GpProgram& prog = out.program;
  prog.num_vars = next;
  prog.objective = gp::Posynomial(gp::Monomial(1.0));
  gp::Monomial& obj = prog.objective.terms.front();

  for (std::size_t t = 0; t < s.slots; ++t) {
    for (std::size_t i = 0; i < s.users; ++i) {
      const int e = out.energy_id(s, i, t);
      if (e < 0) continue;
      const int x = out.sinr_id(s, i, t);
      const double gi = s.uplink_gain(i, t);
      obj.exponents[x] = -cond.y(i, t) * (1.0 - tau[t]);

      gp::Posynomial sinr_def(gp::Monomial(s.noise_power * (1.0 - tau[t]) / gi, {{x, 1.0}, {e, -1.0}}));
      for (std::size_t j = 0; j < s.users; ++j) {
        const int ej = out.energy_id(s, j, t);
        if (j == i || ej < 0) continue;
        sinr_def += gp::Monomial(s.uplink_gain(j, t) / gi, {{x, 1.0}, {ej, 1.0}, {e, -1.0}});
      }
      prog.constraints.push_back(std::move(sinr_def));
    }
  }
  for (std::size_t i = 0; i < s.users; ++i) {
    for (std::size_t t = 0; t < s.slots; ++t) {
      if (out.energy_id(s, i, t) < 0) continue;
      gp::Posynomial causal;
      for (std::size_t n = 0; n <= t; ++n) {
        const int e = out.energy_id(s, i, n);
        if (e >= 0) causal += gp::Monomial(1.0 / harvest(i, t), {{e, 1.0}});
      }
      prog.constraints.push_back(std::move(causal));
    }
  }
  for (std::size_t i = 0; i < s.users; ++i) {
    for (std::size_t t = 0; t < s.slots; ++t) {
      const int x = out.sinr_id(s, i, t);
      if (x >= 0) prog.constraints.emplace_back(gp::Monomial(floor_for(s, i), {{x, -1.0}}));
    }
  }
  return out;
}

namespace {

// One condensation run from a given start, in normalized units.
struct Run {
  Allocation best;
  double best_value = -std::numeric_limits<double>::infinity();
  SolverReport report;
  CondensationState state;
};

Run condensation_run(const Scenario& s, std::span<const double> tau, const InitialPoint& init,
                     const LcdOptions& options) {
  Run run;
  SolverReport& rep = run.report;
  run.state.x_bar = init.x_bar;
  Allocation current = init.allocation;
  run.best = init.allocation;
  if (init.infeasible) {
    rep.status = SolveStatus::infeasible;
    rep.message = init.reason;
    return run;
  }

  const SlotMatrix harvest = cumulative_harvest(s, tau);
  bool converged = false;
  double previous = 0.0;
  for (int round = 0; round < options.max_rounds; ++round) {
    const Condensation cond = condense(run.state.x_bar, tau);
    run.state.condensation = cond;
    const CondensedGp cg = build_condensed_gp(s, tau, cond);
    if (cg.infeasible) {
      rep.status = SolveStatus::infeasible;
      rep.message = cg.reason;
      run.best = current;
      return run;
    }
    if (cg.program.num_vars == 0) {
      run.best = current;
      run.best_value = 0.0;
      rep.objective_trace.push_back(0.0);
      rep.kkt_residual = 0.0;
      converged = true;
      break;
    }

    std::vector<double> start(static_cast<std::size_t>(cg.program.num_vars));
    for (std::size_t i = 0; i < s.users; ++i) {
      for (std::size_t t = 0; t < s.slots; ++t) {
        const int e = cg.energy_id(s, i, t);
        if (e < 0) continue;
        start[static_cast<std::size_t>(e)] = std::max(current.energy(i, t), 1e-6 * harvest(i, t));
        start[static_cast<std::size_t>(cg.sinr_id(s, i, t))] = run.state.x_bar(i, t);
      }
    }
    const gp::GpSolution sol = gp::solve_gp(cg.program, start, options.gp);
    rep.newton_steps += sol.newton_steps;
    ++rep.iterations;
    if (sol.status == gp::GpStatus::infeasible) {
      rep.status = SolveStatus::infeasible;
      rep.message = "condensed program has no strictly feasible point";
      run.best = current;
      return run;
    }
    if (sol.status != gp::GpStatus::optimal) {
      rep.message = std::string("inner GP stopped with status ") + gp::to_string(sol.status);
      break;
    }
    rep.kkt_residual = sol.kkt_residual;

    for (std::size_t i = 0; i < s.users; ++i) {
      for (std::size_t t = 0; t < s.slots; ++t) {
        const int e = cg.energy_id(s, i, t);
        current.energy(i, t) = e < 0 ? 0.0 : sol.values[static_cast<std::size_t>(e)];
        if (e >= 0) {
          const double x = sol.values[static_cast<std::size_t>(cg.sinr_id(s, i, t))];
          run.state.x_bar(i, t) = std::max(x, kSinrFloor);
        }
      }
    }
    const double value = sum_throughput(Decoding::lcd, s, current);
    if (value > run.best_value) {
      run.best_value = value;
      run.best = current;
    }
    rep.objective_trace.push_back(run.best_value);
    run.state.iteration = round + 1;
    if (round > 0 && std::abs(value - previous) <= options.tolerance * std::max(std::abs(previous), 1e-300)) {
      converged = true;
      break;
    }
    previous = value;
  }
  run.state.objective_trace = rep.objective_trace;
  rep.status = converged ? SolveStatus::optimal : SolveStatus::max_iterations;
  return run;
}

}  // namespace

LcdResult solve_lcd_given_tau(const Scenario& scenario, std::span<const double> tau,
                              const LcdOptions& options) {
  scenario.validate();
  check_tau(tau, scenario.slots);
  const NormalizedScenario ns = normalize(scenario);
  const Scenario& s = ns.scenario;

  Run run = condensation_run(s, tau, initial_point(s, tau), options);
  if (options.tdma_start && s.users > 1 && run.report.status != SolveStatus::infeasible) {
    Run alt = condensation_run(s, tau, tdma_point(s, tau), options);
    const bool usable = alt.report.status != SolveStatus::infeasible;
    const bool better = alt.best_value > run.best_value ||
                        (alt.report.status == SolveStatus::optimal &&
                         run.report.status != SolveStatus::optimal &&
                         alt.best_value >= run.best_value);
    if (usable && better) run = std::move(alt);
  }

  LcdResult res;
  res.state = std::move(run.state);
  res.report = std::move(run.report);
  res.allocation = ns.to_physical(run.best);
  res.rates = rates(Decoding::lcd, scenario, res.allocation);
  res.report.causality_violation = causality_violation(scenario, res.allocation);
  res.report.threshold_violation = threshold_violation(Decoding::lcd, scenario, res.allocation);
  return res;
}

}  // namespace wpnoma::lcd
