#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "wpnoma/config.hpp"
#include "wpnoma/model.hpp"

namespace wpnoma::testing {

// Static gains, unit efficiency and unit ER power, so gamma = h.
inline Scenario flat_scenario(std::vector<double> g, std::vector<double> h, std::size_t slots,
                              double noise = 1.0) {
  Scenario s;
  s.users = g.size();
  s.slots = slots;
  s.er_power = 1.0;
  s.efficiency.assign(s.users, 1.0);
  s.downlink_gain = SlotMatrix(s.users, slots);
  s.uplink_gain = SlotMatrix(s.users, slots);
  for (std::size_t i = 0; i < s.users; ++i) {
    for (std::size_t t = 0; t < slots; ++t) {
      s.downlink_gain(i, t) = h[i];
      s.uplink_gain(i, t) = g[i];
    }
  }
  s.noise_power = noise;
  s.threshold.assign(s.users, 0.0);
  s.bandwidth_hz = 1e6;
  return s;
}

inline Scenario reference_scenario(std::size_t users, std::size_t slots,
                                   std::optional<double> threshold_db = std::nullopt) {
  ScenarioConfig c = ScenarioConfig::reference();
  c.set_users(users);
  c.slots = slots;
  c.set_threshold_db(threshold_db);
  return build_scenario(c);
}

}  // namespace wpnoma::testing
