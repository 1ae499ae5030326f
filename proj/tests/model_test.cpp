#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "wpnoma/model.hpp"

namespace wpnoma {
namespace {

using testing::flat_scenario;

TEST(Gains, UplinkPathLoss) {
  EXPECT_DOUBLE_EQ(uplink_gain(1.0), 1e-3);
  EXPECT_NEAR(uplink_gain(100.0), 1e-7, 1e-22);
  EXPECT_NEAR(uplink_gain(10.0), 1e-5, 1e-20);
  EXPECT_THROW(uplink_gain(0.0), DomainError);
}

TEST(Gains, FriisDownlink) {
  EXPECT_NEAR(downlink_gain(5.0, 915e6, std::pow(10.0, 0.6)), 1.084e-4, 0.002e-4);
  const double wavelength = kSpeedOfLight / 915e6;
  EXPECT_NEAR(downlink_gain(wavelength / (4.0 * std::numbers::pi), 915e6, 1.0), 1.0, 1e-12);
  EXPECT_NEAR(downlink_gain(10.0, 915e6, 1.0) / downlink_gain(5.0, 915e6, 1.0), 0.25, 1e-15);
}

TEST(Gains, HarvestRate) {
  EXPECT_NEAR(harvest_rate(0.49, 1.084e-4, 3.0), 1.594e-4, 0.001e-4);
  EXPECT_DOUBLE_EQ(harvest_rate(1.0, 1.0, 1.0), 1.0);
  EXPECT_THROW(harvest_rate(0.0, 1.0, 1.0), DomainError);
}

TEST(Sinr, LcdSymmetricPair) {
  const Scenario s = flat_scenario({1, 1}, {1, 1}, 1);
  Allocation a(2, 1, 0.0);
  a.energy(0, 0) = 1;
  a.energy(1, 0) = 1;
  EXPECT_DOUBLE_EQ(sinr_lcd(s, a, 0, 0), 0.5);
}

TEST(Sinr, LcdThreeUsers) {
  const Scenario s = flat_scenario({2, 1, 1}, {1, 1, 1}, 1);
  Allocation a(3, 1, 0.5);
  for (std::size_t i = 0; i < 3; ++i) a.energy(i, 0) = 1;
  EXPECT_NEAR(sinr_lcd(s, a, 0, 0), 0.8, 1e-15);
}

TEST(Sinr, SicdLastUserSeesNoInterference) {
  const Scenario s = flat_scenario({1, 1}, {1, 1}, 1);
  Allocation a(2, 1, 0.0);
  a.energy(0, 0) = 1;
  a.energy(1, 0) = 1;
  EXPECT_DOUBLE_EQ(sinr_sicd(s, a, 0, 0), 0.5);
  EXPECT_DOUBLE_EQ(sinr_sicd(s, a, 1, 0), 1.0);
}

TEST(Sinr, SingleUserSchemesAgree) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int n = 0; n < 100; ++n) {
    const Scenario s = flat_scenario({u(rng)}, {1}, 1, u(rng));
    Allocation a(1, 1, 0.9 * u(rng) / 5.0);
    a.energy(0, 0) = u(rng);
    EXPECT_DOUBLE_EQ(sinr_lcd(s, a, 0, 0), sinr_sicd(s, a, 0, 0));
    EXPECT_DOUBLE_EQ(sinr_lcd(s, a, 0, 0), s.uplink_gain(0, 0) * a.energy(0, 0) /
                                                (s.noise_power * (1.0 - a.tau[0])));
  }
}

TEST(Sinr, Monotonicity) {
  const Scenario s = flat_scenario({1, 2, 3}, {1, 1, 1}, 1);
  Allocation a(3, 1, 0.2);
  for (std::size_t i = 0; i < 3; ++i) a.energy(i, 0) = 1;
  Allocation more_own = a;
  more_own.energy(1, 0) = 2;
  Allocation more_other = a;
  more_other.energy(2, 0) = 2;
  Allocation earlier = a;
  earlier.energy(0, 0) = 5;
  EXPECT_GT(sinr_lcd(s, more_own, 1, 0), sinr_lcd(s, a, 1, 0));
  EXPECT_LT(sinr_lcd(s, more_other, 1, 0), sinr_lcd(s, a, 1, 0));
  EXPECT_DOUBLE_EQ(sinr_sicd(s, earlier, 1, 0), sinr_sicd(s, a, 1, 0));
}

TEST(Throughput, Values) {
  EXPECT_DOUBLE_EQ(throughput(0.5, 1.0), 0.5);
  EXPECT_EQ(throughput(1.0, 3.0), 0.0);
  EXPECT_DOUBLE_EQ(throughput(0.3, 21.6), 0.7 * std::log2(22.6));
  EXPECT_NEAR(throughput(0.3, 21.6), 3.155, 0.01);
}

TEST(Throughput, VanishesAsHarvestingTakesTheSlot) {
  const Scenario s = flat_scenario({1}, {1}, 1);
  double previous = std::numeric_limits<double>::infinity();
  for (double gap : {1e-2, 1e-4, 1e-6, 1e-8}) {
    Allocation a(1, 1, 1.0 - gap);
    a.energy(0, 0) = 1.0;
    const double r = sum_throughput(Decoding::sicd, s, a);
    EXPECT_LT(r, previous);
    previous = r;
  }
  EXPECT_LT(previous, 1e-6);
}

TEST(Telescoping, ZeroEnergy) {
  const Scenario s = flat_scenario({1, 1}, {1, 1}, 1);
  const Allocation a(2, 1, 0.3);
  EXPECT_EQ(slot_sum_throughput_sicd(s, a, 0), 0.0);
}

TEST(Telescoping, HandExample) {
  const Scenario s = flat_scenario({1, 1}, {1, 1}, 1);
  Allocation a(2, 1, 0.0);
  a.energy(0, 0) = 1;
  a.energy(1, 0) = 1;
  const double expected = std::log2(3.0);
  EXPECT_NEAR(slot_sum_throughput_sicd(s, a, 0), expected, 1e-15);
  EXPECT_NEAR(std::log2(1.5) + std::log2(2.0), expected, 1e-15);
  EXPECT_NEAR(sum_throughput(Decoding::sicd, s, a), expected, 1e-15);
}

TEST(Telescoping, SingleUser) {
  const Scenario s = flat_scenario({2}, {1}, 1);
  Allocation a(1, 1, 0.4);
  a.energy(0, 0) = 0.3;
  EXPECT_DOUBLE_EQ(slot_sum_throughput_sicd(s, a, 0), throughput(0.4, sinr_sicd(s, a, 0, 0)));
}

TEST(Telescoping, RandomAllocations) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 500; ++n) {
    const Scenario s = flat_scenario({u(rng) + 0.1, u(rng) + 0.1, u(rng) + 0.1}, {1, 1, 1}, 2,
                                     u(rng) + 0.01);
    Allocation a(3, 2);
    for (double& t : a.tau) t = 0.99 * u(rng);
    for (double& e : a.energy.values()) e = u(rng);
    const RateVector r = rates(Decoding::sicd, s, a);
    for (std::size_t t = 0; t < 2; ++t) {
      double direct = 0.0;
      for (std::size_t i = 0; i < 3; ++i) direct += r.rate(i, t);
      EXPECT_NEAR(slot_sum_throughput_sicd(s, a, t), direct, 1e-12 * direct);
    }
  }
}

TEST(Causality, ZeroSpendKeepsHarvest) {
  const Scenario s = flat_scenario({1}, {2}, 3);
  Allocation a(1, 3, 0.5);
  const SlotMatrix slack = energy_causality_slack(s, a);
  EXPECT_DOUBLE_EQ(slack(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(slack(0, 2), 3.0);
  EXPECT_TRUE(is_causal(s, a));
}

TEST(Causality, SpendAllIsTight) {
  const Scenario s = flat_scenario({1}, {2}, 1);
  Allocation a(1, 1, 0.5);
  a.energy(0, 0) = 1.0;
  EXPECT_EQ(energy_causality_slack(s, a)(0, 0), 0.0);
  EXPECT_TRUE(is_causal(s, a));
}

TEST(Causality, EveryPrefixIsChecked) {
  const Scenario s = flat_scenario({1}, {2}, 2);
  Allocation a(1, 2, 0.5);
  a.energy(0, 0) = 2.0;
  const SlotMatrix slack = energy_causality_slack(s, a);
  EXPECT_DOUBLE_EQ(slack(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(slack(0, 1), 0.0);
  EXPECT_FALSE(is_causal(s, a));
}

TEST(Causality, SlackIsAffine) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Scenario s = flat_scenario({1, 1}, {0.7, 1.3}, 3);
  for (int n = 0; n < 50; ++n) {
    Allocation a(2, 3);
    Allocation b(2, 3);
    for (std::size_t t = 0; t < 3; ++t) {
      a.tau[t] = u(rng);
      b.tau[t] = u(rng);
    }
    for (double& e : a.energy.values()) e = u(rng);
    for (double& e : b.energy.values()) e = u(rng);
    const double alpha = u(rng);
    Allocation m(2, 3);
    for (std::size_t t = 0; t < 3; ++t) m.tau[t] = alpha * a.tau[t] + (1 - alpha) * b.tau[t];
    for (std::size_t k = 0; k < 6; ++k) {
      m.energy.values()[k] = alpha * a.energy.values()[k] + (1 - alpha) * b.energy.values()[k];
    }
    const SlotMatrix sa = energy_causality_slack(s, a);
    const SlotMatrix sb = energy_causality_slack(s, b);
    const SlotMatrix sm = energy_causality_slack(s, m);
    for (std::size_t k = 0; k < 6; ++k) {
      EXPECT_NEAR(sm.values()[k], alpha * sa.values()[k] + (1 - alpha) * sb.values()[k], 1e-14);
    }
  }
}

TEST(Scenario, ValidateRejectsBadInput) {
  Scenario s = flat_scenario({1}, {1}, 1);
  EXPECT_NO_THROW(s.validate());
  s.efficiency[0] = 1.5;
  EXPECT_THROW(s.validate(), DomainError);
  s = flat_scenario({1}, {1}, 1);
  s.uplink_gain(0, 0) = -1;
  EXPECT_THROW(s.validate(), DomainError);
  s = flat_scenario({1}, {1}, 1);
  s.threshold = {};
  EXPECT_THROW(s.validate(), DomainError);
}

TEST(Geometry, OnAxisDistances) {
  Geometry g = Geometry::uniform_circle(2, 100.0, 5.0, 915e6, 1.0);
  const std::vector<double> d = g.user_ap_distances();
  EXPECT_NEAR(d[0], 95.0, 1e-12);
  EXPECT_NEAR(d[1], 105.0, 1e-12);
  g = Geometry::uniform_circle(1, 5.0, 5.0, 915e6, 1.0);
  EXPECT_THROW(g.user_ap_distances(), DomainError);
}

TEST(Energy, TransferredAndDownlink) {
  const Scenario s = flat_scenario({1, 1}, {0.5, 0.25}, 2);
  Allocation a(2, 2);
  a.tau = {0.2, 0.4};
  EXPECT_NEAR(downlink_energy(s, a), 0.6, 1e-15);
  EXPECT_NEAR(transferred_energy(s, a), 0.75 * 0.6, 1e-15);
}

TEST(Normalize, PreservesRates) {
  const Scenario s = testing::reference_scenario(3, 2);
  const NormalizedScenario n = normalize(s);
  Allocation a(3, 2);
  a.tau = {0.3, 0.6};
  for (std::size_t i = 0; i < 3; ++i) {
    a.energy(i, 0) = 0.2 * s.harvest_rate(i, 0) * a.tau[0];
    a.energy(i, 1) = 0.5 * s.harvest_rate(i, 1) * a.tau[1];
  }
  const Allocation b = n.to_normalized(a);
  EXPECT_NEAR(sum_throughput(Decoding::sicd, n.scenario, b), sum_throughput(Decoding::sicd, s, a),
              1e-12);
  const Allocation back = n.to_physical(b);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_NEAR(back.energy.values()[k], a.energy.values()[k], 1e-15 * a.energy.values()[k] + 1e-300);
  }
}

}  // namespace
}  // namespace wpnoma
