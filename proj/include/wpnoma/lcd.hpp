#pragma once

// Sum-throughput maximization without interference cancellation, for
// harvesting fractions tau fixed by the caller. The rate product
// prod (1 + x)^(1 - tau) is replaced by its best local monomial
// c prod x^(y (1 - tau)) and the resulting GP is solved repeatedly.

#include <span>
#include <string>
#include <vector>

#include "wpnoma/gp.hpp"
#include "wpnoma/model.hpp"
#include "wpnoma/report.hpp"

namespace wpnoma::lcd {

inline constexpr double kSinrFloor = 1e-6;

struct Condensation {
  double log_c = 0.0;  // c can overflow for long horizons
  SlotMatrix y;        // x_bar / (1 + x_bar)
};

// Throws DomainError for nonpositive x_bar or tau outside [0, 1].
Condensation condense(const SlotMatrix& x_bar, std::span<const double> tau);

// log prod (1 + x)^(1 - tau), in nats.
double log_objective(const SlotMatrix& x, std::span<const double> tau);

// log c + sum y (1 - tau) log x.
double log_surrogate(const SlotMatrix& x, const Condensation& cond, std::span<const double> tau);

// G(x) = log((1 + x_bar) (x / x_bar)^y / (1 + x)) for one entry.
double condensation_gap(double x, double x_bar);

struct BoundCheck {
  bool holds = true;
  double worst = 0.0;  // largest G over the entries, <= 0 when it holds
};

BoundCheck check_condensation_bound(const SlotMatrix& x, const SlotMatrix& x_bar);

struct CondensationState {
  SlotMatrix x_bar;
  Condensation condensation;
  int iteration = 0;
  std::vector<double> objective_trace;
};

struct InitialPoint {
  Allocation allocation;
  SlotMatrix x_bar;
  bool infeasible = false;
  std::string reason;
};

// Each user spreads its horizon harvest evenly over the slots where it can
// transmit, capped by what it has banked so far, and ends with an empty
// bank; x_bar is the resulting SINR, floored at max(S_th, 1e-6).
InitialPoint initial_point(const Scenario& scenario, std::span<const double> tau);

// Second start: slot t belongs to the user ranked t mod K by mean uplink
// gain; owners spread their harvest over the slots they own in the same way
// and the others stay silent.
InitialPoint tdma_point(const Scenario& scenario, std::span<const double> tau);

struct CondensedGp {
  gp::GpProgram program;
  std::vector<int> energy_var;  // users x slots, -1 when fixed at zero
  std::vector<int> sinr_var;
  double log_c = 0.0;           // objective is 1 / f~ up to the factor 1 / c
  bool infeasible = false;
  std::string reason;

  int energy_id(const Scenario& s, std::size_t i, std::size_t t) const {
    return energy_var[i * s.slots + t];
  }
  int sinr_id(const Scenario& s, std::size_t i, std::size_t t) const {
    return sinr_var[i * s.slots + t];
  }
};

// Variables E and x for every (i, t) that can transmit; constraints
// x (sigma^2 (1 - tau) + sum_{j != i} g_j E_j) / (g_i E_i) <= 1, cumulative
// spend over cumulative harvest <= 1, and max(S_th, 1e-6) / x <= 1. The
// floor keeps the program bounded when switching a user off is best.
CondensedGp build_condensed_gp(const Scenario& scenario, std::span<const double> tau,
                               const Condensation& cond);

struct LcdOptions {
  double tolerance = 1e-6;  // relative change of the sum-throughput
  int max_rounds = 100;
  // Also run from tdma_point when K > 1 and keep the better local optimum.
  bool tdma_start = true;
  gp::GpOptions gp;
};

struct LcdResult : SolveResult {
  CondensationState state;
};

LcdResult solve_lcd_given_tau(const Scenario& scenario, std::span<const double> tau,
                              const LcdOptions& options = {});

}  // namespace wpnoma::lcd
