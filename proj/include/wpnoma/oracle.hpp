#pragma once

// Brute-force and numerical-differentiation checks for the solvers.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "wpnoma/model.hpp"

namespace wpnoma::oracle {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Seed used by every probe unless the caller passes another one.
inline constexpr std::uint64_t kDefaultSeed = 20180611;

struct GridOptions {
  int resolution = 100;  // points per dimension, endpoints included
  // Fixed harvesting fractions; empty means tau is part of the grid.
  std::vector<double> tau;
  std::size_t max_evaluations = 100'000'000;
};

struct GridResult {
  Allocation allocation;
  double objective = 0.0;  // bits per slot per Hz, summed over slots
  bool feasible = false;   // some grid point met every threshold
  std::size_t evaluations = 0;
};

// Exhaustive search over tau (unless fixed) and over the fraction of the
// banked energy each user spends in each slot, so every grid point is
// causal. Points that miss a threshold are skipped. Refuses more than four
// energy dimensions or a grid above max_evaluations.
GridResult grid_search(const Scenario& scenario, Decoding scheme, const GridOptions& options = {});

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences with step h in every coordinate.
std::vector<double> finite_diff_gradient(const ScalarFn& fn, std::span<const double> point,
                                         double h = 1e-6);

using Sampler = std::function<std::vector<double>(std::mt19937_64&)>;

struct ProbeResult {
  double worst_violation = 0.0;  // max of a f(x) + (1 - a) f(y) - f(a x + (1 - a) y)
  std::vector<double> x;
  std::vector<double> y;
  double alpha = 0.0;
  int samples = 0;
};

// Midpoint-style concavity test on random pairs drawn from the sampler and
// random weights in (0, 1). A positive worst violation witnesses that fn is
// not concave on the sampled domain.
ProbeResult concavity_probe(const ScalarFn& fn, const Sampler& sampler, int samples,
                            std::uint64_t seed = kDefaultSeed);

}  // namespace wpnoma::oracle
