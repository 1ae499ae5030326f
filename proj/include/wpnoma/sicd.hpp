#pragma once

// Sum-throughput maximization with successive interference cancellation.
// The problem is jointly concave in (tau, E); it is solved through its
// Lagrangian dual with multipliers lambda (energy causality, one per
// user and slot prefix) and mu (decodability, one per user and slot).
//
// The decodability constraint is used in its linear form
//   psi = g_i E_i - S_i (sigma^2 (1 - tau) + sum_{j > i} g_j E_j) >= 0,
// which is what the stationarity coefficients a and b below differentiate.
// Multipliers carry units of bits per unit of constraint.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "wpnoma/model.hpp"
#include "wpnoma/report.hpp"

namespace wpnoma::sicd {

struct DualState {
  SlotMatrix lambda;  // lambda(i, n) multiplies the causality slack of prefix n
  SlotMatrix mu;
  double step_lambda = 0.0;  // a / sqrt(k) schedule, one base step per family
  double step_mu = 0.0;
  int iteration = 0;

  DualState() = default;
  DualState(std::size_t users, std::size_t slots)
      : lambda(users, slots), mu(users, slots) {}
};

struct InnerState {
  std::vector<double> tau;
  SlotMatrix energy;
  SlotMatrix a;
  std::vector<double> b;
  std::vector<double> z_star;
  bool unbounded = false;  // some a <= 0 for a user that can be heard
  int sweeps = 0;

  Allocation allocation() const;
};

// ln2 (sum_{n >= t} lambda(i, n) + g_i sum_{j < i} mu_j S_j - mu_i g_i).
double a_coeff(const Scenario& scenario, const DualState& dual, std::size_t i, std::size_t t);

// ln2 (sigma^2 sum_i mu_i S_i + sum_i sum_{n >= t} lambda(i, n) gamma_{i,t}).
double b_coeff(const Scenario& scenario, const DualState& dual, std::size_t t);

// f(z) = ln(1 + z) - z / (1 + z).
double f_z(double z);

// Unique z >= 0 with f(z) = b, to relative tolerance tol.
double solve_z(double b, double tol = 1e-12);

// min[(1 - sum g E / (z sigma^2))^+, 1]; z = 0 gives 1 for zero power, else 0.
double tau_update(const Scenario& scenario, std::span<const double> energy_slot, double z_star,
                  std::size_t t);

struct EnergyUpdate {
  double energy = 0.0;
  bool unbounded = false;
};

// Coordinate maximizer of the Lagrangian in E_{i,t} with the other users
// fixed. For a <= 0 the maximizer does not exist; the result is clamped at
// 1e3 x the user's total harvest and flagged.
EnergyUpdate energy_update(const Scenario& scenario, const DualState& dual, const Allocation& alloc,
                           std::size_t i, std::size_t t);

struct InnerOptions {
  double tolerance = 1e-12;
  int max_sweeps = 200;
  std::vector<std::size_t> slot_order;  // empty means 0..T-1
};

// Maximizes the Lagrangian over 0 <= tau <= 1, E >= 0. Per slot, tau then
// users in index order are updated until nothing moves. The Lagrangian is
// positively homogeneous per slot, so the sweeps either grow 1 - tau to 1,
// shrink it geometrically to 0, or stall on a tie; the end point is placed
// directly once the direction is known.
InnerState inner_maximize(const Scenario& scenario, const DualState& dual,
                          const InnerOptions& options = {});

struct Subgradients {
  SlotMatrix nu;   // cumulative causality slack, joules
  SlotMatrix psi;  // linear decodability slack
};

Subgradients subgradients(const Scenario& scenario, const Allocation& alloc);

// Lagrangian value in bits.
double lagrangian(const Scenario& scenario, const Allocation& alloc, const DualState& dual);

// G(lambda, mu); +inf when the inner problem is unbounded.
double dual_function(const Scenario& scenario, const DualState& dual);

// G(lambda, mu) - primal objective of alloc, bits.
double duality_gap(const Scenario& scenario, const Allocation& alloc, const DualState& dual);

struct KktReport {
  double stationarity = 0.0;   // largest residual over interior coordinates
  double boundary = 0.0;       // largest sign violation at bounds
  double slackness = 0.0;      // max |lambda nu| and |mu psi|, bits
  double primal = 0.0;         // max causality (J) and threshold shortfall
  int interior_coordinates = 0;
};

// Residuals f(z) - b for tau and 1 / (1 + z) - a sigma^2 / g for E.
KktReport kkt_report(const Scenario& scenario, const Allocation& alloc, const DualState& dual);

struct SicdOptions {
  double gap_tolerance = 1e-5;        // relative to max(1, objective)
  double violation_tolerance = 1e-6;  // relative to the harvest scale
  int max_subgradient_iterations = 2000;
  double first_step_fraction = 0.1;
  InnerOptions inner;
  // Applied to the final allocation; used by fault-injection checks.
  std::function<Allocation(const Scenario&, const Allocation&)> tamper;
};

struct SicdResult : SolveResult {
  DualState dual;
  KktReport kkt;
  std::vector<double> dual_trace;  // running best G along the subgradient phase
  bool recovered = false;          // primal came from the barrier stage
};

SicdResult solve_sicd(const Scenario& scenario, const SicdOptions& options = {});

}  // namespace wpnoma::sicd
