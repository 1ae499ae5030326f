#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "wpnoma/lcd.hpp"
#include "wpnoma/oracle.hpp"
#include "wpnoma/sicd.hpp"

namespace wpnoma::lcd {
namespace {

using testing::flat_scenario;
using testing::reference_scenario;

TEST(Condense, SingleEntry) {
  const SlotMatrix x_bar(1, 1, 1.0);
  const std::vector<double> tau{0.0};
  const Condensation c = condense(x_bar, tau);
  EXPECT_DOUBLE_EQ(c.y(0, 0), 0.5);
  EXPECT_NEAR(std::exp(c.log_c), 2.0, 1e-15);
}

TEST(Condense, ExponentVanishesNearZero) {
  const SlotMatrix x_bar(1, 1, 1e-12);
  const std::vector<double> tau{0.3};
  EXPECT_LT(condense(x_bar, tau).y(0, 0), 1e-11);
}

TEST(Condense, RejectsNonPositive) {
  const std::vector<double> tau{0.3};
  EXPECT_THROW(condense(SlotMatrix(1, 1, 0.0), tau), DomainError);
  EXPECT_THROW(condense(SlotMatrix(1, 1, 1.0), std::vector<double>{1.5}), DomainError);
}

TEST(Condense, TangentAtExpansionPoint) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> logx(-6.0, 6.0);
  std::uniform_real_distribution<double> u(0.0, 0.9);
  for (int n = 0; n < 200; ++n) {
    SlotMatrix x_bar(3, 2);
    for (double& v : x_bar.values()) v = std::exp(logx(rng));
    const std::vector<double> tau{u(rng), u(rng)};
    const Condensation c = condense(x_bar, tau);
    const double f = log_objective(x_bar, tau);
    EXPECT_NEAR(log_surrogate(x_bar, c, tau), f, 1e-12 * std::max(1.0, std::abs(f)));

    std::vector<double> point;
    for (double v : x_bar.values()) point.push_back(std::log(v));
    auto lift = [&](std::span<const double> v) {
      SlotMatrix m(3, 2);
      for (std::size_t k = 0; k < v.size(); ++k) m.values()[k] = std::exp(v[k]);
      return m;
    };
    const auto ge = oracle::finite_diff_gradient(
        [&](std::span<const double> v) { return log_objective(lift(v), tau); }, point, 1e-5);
    const auto ga = oracle::finite_diff_gradient(
        [&](std::span<const double> v) { return log_surrogate(lift(v), c, tau); }, point, 1e-5);
    for (std::size_t k = 0; k < ge.size(); ++k) {
      EXPECT_NEAR(ga[k], ge[k], 1e-6 * std::max(1.0, std::abs(ge[k])));
    }
  }
}

TEST(Bound, GapIsZeroAtExpansionPoint) {
  for (double x : {1e-6, 0.5, 1.0, 30.0, 1e6}) EXPECT_EQ(condensation_gap(x, x), 0.0);
}

TEST(Bound, NeverPositive) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> logx(std::log(1e-6), std::log(1e6));
  for (int n = 0; n < 10000; ++n) EXPECT_LE(condensation_gap(std::exp(logx(rng)), 1.0), 0.0);
}

TEST(Bound, FlatAtExpansionPoint) {
  for (double x_bar : {0.1, 1.0, 10.0}) {
    const auto g = oracle::finite_diff_gradient(
        [&](std::span<const double> v) { return condensation_gap(v[0], x_bar); },
        std::vector<double>{x_bar}, 1e-6 * x_bar);
    EXPECT_NEAR(g[0], 0.0, 1e-6);
  }
}

TEST(Bound, MatrixCheck) {
  const SlotMatrix x_bar(2, 2, 1.0);
  SlotMatrix x(2, 2, 3.0);
  const BoundCheck b = check_condensation_bound(x, x_bar);
  EXPECT_TRUE(b.holds);
  EXPECT_LT(b.worst, 0.0);
  EXPECT_THROW(check_condensation_bound(SlotMatrix(1, 2, 1.0), x_bar), DomainError);
}

TEST(InitialPoint, SingleUserSpendsEachSlotsHarvest) {
  const Scenario s = flat_scenario({1}, {2}, 3);
  const std::vector<double> tau{0.5, 0.5, 0.5};
  const InitialPoint p = initial_point(s, tau);
  ASSERT_FALSE(p.infeasible);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(p.allocation.energy(0, t), 1.0, 1e-15);
}

TEST(InitialPoint, SpendsEverythingByTheLastSlot) {
  const Scenario s = flat_scenario({1, 2}, {1, 3}, 4);
  const std::vector<double> tau{0.7, 0.1, 0.0, 0.4};
  const InitialPoint p = initial_point(s, tau);
  const SlotMatrix slack = energy_causality_slack(s, p.allocation);
  EXPECT_TRUE(is_causal(s, p.allocation));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(slack(i, 3), 0.0, 1e-14);
  for (double x : p.x_bar.values()) EXPECT_GE(x, kSinrFloor);
}

TEST(InitialPoint, NoHarvestWithThresholdIsInfeasible) {
  Scenario s = flat_scenario({1}, {1}, 1);
  s.threshold = {1.0};
  EXPECT_TRUE(initial_point(s, std::vector<double>{0.0}).infeasible);
}

TEST(InitialPoint, TdmaGivesEachSlotOneOwner) {
  const Scenario s = flat_scenario({1, 2}, {1, 1}, 2);
  const InitialPoint p = tdma_point(s, std::vector<double>{0.5, 0.5});
  EXPECT_EQ(p.allocation.energy(1, 1), 0.0);
  EXPECT_NEAR(p.allocation.energy(1, 0), 0.5, 1e-15);
  EXPECT_EQ(p.allocation.energy(0, 0), 0.0);
  EXPECT_NEAR(p.allocation.energy(0, 1), 1.0, 1e-15);
}

TEST(CondensedGp, SingleUserSize) {
  const Scenario s = flat_scenario({1}, {1}, 1);
  const std::vector<double> tau{0.3};
  const CondensedGp g = build_condensed_gp(s, tau, condense(SlotMatrix(1, 1, 1.0), tau));
  EXPECT_EQ(g.program.num_vars, 2);
  EXPECT_EQ(g.program.constraints.size(), 3u);
  EXPECT_NO_THROW(g.program.validate());
}

TEST(CondensedGp, ThresholdRowUsesFloorWhenUnset) {
  const Scenario s = flat_scenario({1}, {1}, 1);
  const std::vector<double> tau{0.3};
  const CondensedGp g = build_condensed_gp(s, tau, condense(SlotMatrix(1, 1, 1.0), tau));
  EXPECT_DOUBLE_EQ(g.program.constraints.back().terms.front().coefficient, kSinrFloor);
}

TEST(CondensedGp, UnreachableThresholdIsReported) {
  Scenario s = flat_scenario({1, 1}, {1, 0}, 1);
  s.threshold = {0.0, 1.0};
  const std::vector<double> tau{0.3};
  EXPECT_TRUE(build_condensed_gp(s, tau, condense(SlotMatrix(2, 1, 1.0), tau)).infeasible);
}

TEST(Solve, SingleUserMatchesSicd) {
  const Scenario s = reference_scenario(1, 1);
  const sicd::SicdResult r = sicd::solve_sicd(s);
  const LcdResult l = solve_lcd_given_tau(s, r.allocation.tau);
  ASSERT_EQ(l.report.status, SolveStatus::optimal);
  EXPECT_NEAR(l.sum_throughput(), r.sum_throughput(), 1e-6 * r.sum_throughput());
}

TEST(Solve, SinrDefinitionIsTight) {
  const Scenario s = reference_scenario(3, 2);
  const std::vector<double> tau{0.3, 0.2};
  const LcdResult l = solve_lcd_given_tau(s, tau);
  ASSERT_EQ(l.report.status, SolveStatus::optimal);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t t = 0; t < 2; ++t) {
      const double actual = sinr_lcd(s, l.allocation, i, t);
      EXPECT_NEAR(l.state.x_bar(i, t), std::max(actual, kSinrFloor), 1e-6 * std::max(actual, 1.0));
    }
  }
}

TEST(Solve, TraceNeverDecreases) {
  const Scenario s = reference_scenario(4, 3);
  const LcdResult l = solve_lcd_given_tau(s, std::vector<double>{0.3, 0.1, 0.2});
  ASSERT_GE(l.report.objective_trace.size(), 2u);
  for (std::size_t k = 1; k < l.report.objective_trace.size(); ++k) {
    EXPECT_GE(l.report.objective_trace[k], l.report.objective_trace[k - 1] - 1e-9);
  }
  EXPECT_TRUE(is_causal(s, l.allocation, 1e-9));
}

TEST(Solve, HugeThresholdIsInfeasible) {
  Scenario s = reference_scenario(1, 1);
  s.threshold = {1e3 * 1e6};
  const LcdResult l = solve_lcd_given_tau(s, std::vector<double>{0.01});
  EXPECT_EQ(l.report.status, SolveStatus::infeasible);
}

TEST(Solve, ThresholdsAreMet) {
  const Scenario s = reference_scenario(3, 2, -20.0);
  const sicd::SicdResult r = sicd::solve_sicd(s);
  const LcdResult l = solve_lcd_given_tau(s, r.allocation.tau);
  ASSERT_EQ(l.report.status, SolveStatus::optimal);
  EXPECT_LE(threshold_violation(Decoding::lcd, s, l.allocation), 1e-9);
  EXPECT_TRUE(is_causal(s, l.allocation, 1e-9));
}

TEST(Solve, EqualGainsDegenerateToTdma) {
  const Scenario s = flat_scenario({1, 1}, {1, 1}, 1, 0.01);
  const std::vector<double> tau{0.4};
  const LcdResult l = solve_lcd_given_tau(s, tau);
  oracle::GridOptions g;
  g.tau = tau;
  g.resolution = 200;
  const oracle::GridResult grid = oracle::grid_search(s, Decoding::lcd, g);
  EXPECT_GE(l.sum_throughput(), grid.objective * (1.0 - 1e-3));
  const double lo = std::min(l.allocation.energy(0, 0), l.allocation.energy(1, 0));
  const double hi = std::max(l.allocation.energy(0, 0), l.allocation.energy(1, 0));
  EXPECT_LT(lo, 1e-3 * hi);
}

}  // namespace
}  // namespace wpnoma::lcd
