#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "wpnoma/oracle.hpp"
#include "wpnoma/sicd.hpp"

namespace wpnoma::oracle {
namespace {

using testing::flat_scenario;
using testing::reference_scenario;

TEST(FiniteDiff, Square) {
  const auto g = finite_diff_gradient([](std::span<const double> v) { return v[0] * v[0]; },
                                      std::vector<double>{3.0}, 1e-5);
  EXPECT_NEAR(g[0], 6.0, 1e-8);
}

TEST(FiniteDiff, SeveralCoordinates) {
  const auto g = finite_diff_gradient(
      [](std::span<const double> v) { return std::sin(v[0]) * v[1]; },
      std::vector<double>{0.5, 2.0});
  EXPECT_NEAR(g[0], std::cos(0.5) * 2.0, 1e-8);
  EXPECT_NEAR(g[1], std::sin(0.5), 1e-8);
}

TEST(FiniteDiff, StationaryTauAtSingleUserOptimum) {
  const Scenario s = reference_scenario(1, 1);
  const sicd::SicdResult r = sicd::solve_sicd(s);
  const double e_per_tau = r.allocation.energy(0, 0) / r.allocation.tau[0];
  const auto g = finite_diff_gradient(
      [&](std::span<const double> v) {
        Allocation a(1, 1, v[0]);
        a.energy(0, 0) = e_per_tau * v[0];
        return sum_throughput(Decoding::sicd, s, a);
      },
      std::vector<double>{r.allocation.tau[0]});
  EXPECT_NEAR(g[0], 0.0, 1e-6);
}

TEST(Probe, LinearHasNoViolation) {
  const ScalarFn fn = [](std::span<const double> v) { return 2.0 * v[0] - v[1] + 1.0; };
  const Sampler sampler = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    return std::vector<double>{u(rng), u(rng)};
  };
  const ProbeResult r = concavity_probe(fn, sampler, 1000);
  EXPECT_LE(std::abs(r.worst_violation), 1e-12);
  EXPECT_EQ(r.samples, 1000);
}

TEST(Probe, ConvexFunctionIsCaught) {
  const ScalarFn fn = [](std::span<const double> v) { return v[0] * v[0]; };
  const Sampler sampler = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return std::vector<double>{u(rng)};
  };
  const ProbeResult r = concavity_probe(fn, sampler, 200);
  EXPECT_GT(r.worst_violation, 0.0);
  const double mixed = r.alpha * r.x[0] + (1.0 - r.alpha) * r.y[0];
  EXPECT_NEAR(r.worst_violation,
              r.alpha * fn(r.x) + (1.0 - r.alpha) * fn(r.y) - fn(std::vector<double>{mixed}), 1e-15);
}

TEST(Probe, SeedMakesItRepeatable) {
  const ScalarFn fn = [](std::span<const double> v) { return std::sin(v[0]); };
  const Sampler sampler = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    return std::vector<double>{u(rng)};
  };
  const ProbeResult a = concavity_probe(fn, sampler, 500, 99);
  const ProbeResult b = concavity_probe(fn, sampler, 500, 99);
  EXPECT_EQ(a.worst_violation, b.worst_violation);
  EXPECT_EQ(a.x, b.x);
}

TEST(Grid, SingleUserAnalyticReduction) {
  Scenario s = flat_scenario({1}, {1}, 1);
  s.noise_power = 1.0 / 50.0;
  const GridResult r = grid_search(s, Decoding::sicd, {.resolution = 400});
  EXPECT_NEAR(r.objective, 3.15, 0.01);
  EXPECT_NEAR(r.allocation.tau[0], 0.3, 0.03);
  EXPECT_TRUE(r.feasible);
}

TEST(Grid, ZeroGainsGiveZero) {
  Scenario s = flat_scenario({0, 0}, {0, 0}, 1);
  const GridResult r = grid_search(s, Decoding::sicd, {.resolution = 20});
  EXPECT_EQ(r.objective, 0.0);
}

TEST(Grid, RefusesLargeInstances) {
  EXPECT_THROW(grid_search(reference_scenario(5, 1), Decoding::sicd), OracleError);
  EXPECT_THROW(grid_search(reference_scenario(2, 3), Decoding::sicd), OracleError);
  EXPECT_THROW(grid_search(reference_scenario(2, 2), Decoding::sicd,
                           {.resolution = 100, .max_evaluations = 1000}),
               OracleError);
}

TEST(Grid, EveryPointIsCausal) {
  const Scenario s = reference_scenario(2, 2);
  const GridResult r = grid_search(s, Decoding::sicd, {.resolution = 12});
  EXPECT_TRUE(is_causal(s, r.allocation));
}

TEST(Grid, SicdBeatsLcd) {
  for (double d : {40.0, 100.0}) {
    ScenarioConfig c = ScenarioConfig::reference();
    c.set_users(2);
    c.er_ap_distance_m = d;
    const Scenario s = build_scenario(c);
    const double sic = grid_search(s, Decoding::sicd, {.resolution = 60}).objective;
    const double lcd = grid_search(s, Decoding::lcd, {.resolution = 60}).objective;
    EXPECT_GE(sic, lcd);
  }
}

TEST(Grid, SolverIsNeverBeaten) {
  for (std::size_t k : {1u, 2u}) {
    const Scenario s = reference_scenario(k, 1);
    const double solver = sicd::solve_sicd(s).sum_throughput();
    const GridResult g = grid_search(s, Decoding::sicd, {.resolution = 80});
    EXPECT_GE(solver, g.objective * (1.0 - 1e-9));
    EXPECT_NEAR(solver, g.objective, 1e-3 * solver);
  }
}

}  // namespace
}  // namespace wpnoma::oracle
