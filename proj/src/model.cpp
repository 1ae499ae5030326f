#include "wpnoma/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wpnoma {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be positive and finite");
  }
}

void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be nonnegative and finite");
  }
}

// Sum of g_j E_j over j in [first, last) excluding `skip`.
double received_power(const Scenario& s, const Allocation& a, std::size_t t, std::size_t first,
                      std::size_t last, std::size_t skip) {
  double acc = 0.0;
  for (std::size_t j = first; j < last; ++j) {
    if (j != skip) acc += s.uplink_gain(j, t) * a.energy(j, t);
  }
  return acc;
}

bool slot_has_energy(const Allocation& a, std::size_t t) {
  for (std::size_t i = 0; i < a.users(); ++i) {
    if (a.energy(i, t) > 0.0) return true;
  }
  return false;
}

double sinr_with_interference(const Scenario& s, const Allocation& a, std::size_t i,
                              std::size_t t, double interference) {
  if (i >= s.users || t >= s.slots) throw DomainError("user or slot index out of range");
  const double signal = s.uplink_gain(i, t) * a.energy(i, t);
  if (a.energy(i, t) <= 0.0) {
    if (a.tau[t] >= 1.0 && slot_has_energy(a, t)) {
      throw DegenerateSlotError("tau0 = 1 with positive uplink energy");
    }
    return 0.0;
  }
  if (a.tau[t] >= 1.0) throw DegenerateSlotError("tau0 = 1 with positive uplink energy");
  return signal / (s.noise_power * (1.0 - a.tau[t]) + interference);
}

}  // namespace

void Scenario::validate() const {
  if (users == 0 || slots == 0) throw DomainError("scenario needs at least one user and slot");
  require_positive(er_power, "ER transmit power");
  require_positive(noise_power, "noise power");
  require_positive(bandwidth_hz, "bandwidth");
  if (efficiency.size() != users || threshold.size() != users) {
    throw DomainError("per-user arrays must have one entry per user");
  }
  if (downlink_gain.users() != users || downlink_gain.slots() != slots ||
      uplink_gain.users() != users || uplink_gain.slots() != slots) {
    throw DomainError("gain matrices must be users x slots");
  }
  for (std::size_t i = 0; i < users; ++i) {
    require_positive(efficiency[i], "harvesting efficiency");
    if (efficiency[i] > 1.0) throw DomainError("harvesting efficiency must not exceed 1");
    require_nonnegative(threshold[i], "decodability threshold");
  }
  for (double v : downlink_gain.values()) require_nonnegative(v, "downlink gain");
  for (double v : uplink_gain.values()) require_nonnegative(v, "uplink gain");
}

double Scenario::harvest_rate(std::size_t i, std::size_t t) const {
  return efficiency[i] * downlink_gain(i, t) * er_power;
}

Geometry Geometry::uniform_circle(std::size_t users, double er_ap_distance,
                                  double user_er_distance, double carrier_freq_hz,
                                  double rx_gain) {
  Geometry g;
  g.er_ap_distance = er_ap_distance;
  g.user_er_distance = user_er_distance;
  g.carrier_freq_hz = carrier_freq_hz;
  g.rx_gain = rx_gain;
  g.user_angles.resize(users);
  for (std::size_t i = 0; i < users; ++i) {
    g.user_angles[i] = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(users);
  }
  return g;
}

std::vector<double> Geometry::user_ap_distances() const {
  require_positive(er_ap_distance, "ER-AP distance");
  require_positive(user_er_distance, "user-ER distance");
  std::vector<double> d;
  d.reserve(user_angles.size());
  for (double angle : user_angles) {
    const double sq = er_ap_distance * er_ap_distance + user_er_distance * user_er_distance -
                      2.0 * er_ap_distance * user_er_distance * std::cos(angle);
    const double dist = std::sqrt(std::max(sq, 0.0));
    if (!(dist > 1e-9)) throw DomainError("user coincides with the AP");
    d.push_back(dist);
  }
  return d;
}

double uplink_gain(double user_ap_distance_m) {
  require_positive(user_ap_distance_m, "user-AP distance");
  return 1e-3 / (user_ap_distance_m * user_ap_distance_m);
}

double downlink_gain(double user_er_distance_m, double carrier_freq_hz, double rx_gain) {
  require_positive(user_er_distance_m, "user-ER distance");
  require_positive(carrier_freq_hz, "carrier frequency");
  require_positive(rx_gain, "receive antenna gain");
  const double wavelength = kSpeedOfLight / carrier_freq_hz;
  const double ratio = wavelength / (4.0 * std::numbers::pi * user_er_distance_m);
  return rx_gain * ratio * ratio;
}

double harvest_rate(double efficiency, double downlink_gain, double er_power) {
  require_positive(efficiency, "harvesting efficiency");
  require_nonnegative(downlink_gain, "downlink gain");
  require_positive(er_power, "ER transmit power");
  return efficiency * downlink_gain * er_power;
}

double sinr_lcd(const Scenario& s, const Allocation& a, std::size_t i, std::size_t t) {
  return sinr_with_interference(s, a, i, t, received_power(s, a, t, 0, s.users, i));
}

double sinr_sicd(const Scenario& s, const Allocation& a, std::size_t i, std::size_t t) {
  return sinr_with_interference(s, a, i, t, received_power(s, a, t, i + 1, s.users, s.users));
}

double sinr(Decoding decoding, const Scenario& s, const Allocation& a, std::size_t i,
            std::size_t t) {
  return decoding == Decoding::lcd ? sinr_lcd(s, a, i, t) : sinr_sicd(s, a, i, t);
}

double throughput(double tau, double x) {
  if (tau >= 1.0) return 0.0;
  return (1.0 - tau) * std::log1p(x) / std::numbers::ln2;
}

double slot_sum_throughput_sicd(const Scenario& s, const Allocation& a, std::size_t t) {
  const double power = received_power(s, a, t, 0, s.users, s.users);
  if (power <= 0.0) return 0.0;
  if (a.tau[t] >= 1.0) throw DegenerateSlotError("tau0 = 1 with positive uplink energy");
  const double uplink = 1.0 - a.tau[t];
  return uplink * std::log1p(power / (s.noise_power * uplink)) / std::numbers::ln2;
}

RateVector rates(Decoding decoding, const Scenario& s, const Allocation& a) {
  RateVector r{SlotMatrix(s.users, s.slots), SlotMatrix(s.users, s.slots)};
  for (std::size_t t = 0; t < s.slots; ++t) {
    for (std::size_t i = 0; i < s.users; ++i) {
      const double x = sinr(decoding, s, a, i, t);
      r.sinr(i, t) = x;
      r.rate(i, t) = throughput(a.tau[t], x);
    }
  }
  return r;
}

double sum_throughput(Decoding decoding, const Scenario& s, const Allocation& a) {
  return rates(decoding, s, a).sum();
}

double RateVector::sum() const {
  double acc = 0.0;
  for (double v : rate.values()) acc += v;
  return acc;
}

double RateVector::user_total(std::size_t i) const {
  double acc = 0.0;
  for (std::size_t t = 0; t < rate.slots(); ++t) acc += rate(i, t);
  return acc;
}

SlotMatrix energy_causality_slack(const Scenario& s, const Allocation& a) {
  SlotMatrix slack(s.users, s.slots);
  for (std::size_t i = 0; i < s.users; ++i) {
    double harvested = 0.0;
    double spent = 0.0;
    for (std::size_t t = 0; t < s.slots; ++t) {
      harvested += s.harvest_rate(i, t) * a.tau[t];
      spent += a.energy(i, t);
      slack(i, t) = harvested - spent;
    }
  }
  return slack;
}

bool is_causal(const Scenario& s, const Allocation& a, double rel_tol) {
  for (std::size_t i = 0; i < s.users; ++i) {
    double harvested = 0.0;
    double spent = 0.0;
    for (std::size_t t = 0; t < s.slots; ++t) {
      if (a.energy(i, t) < 0.0) return false;
      harvested += s.harvest_rate(i, t) * a.tau[t];
      spent += a.energy(i, t);
      if (harvested - spent < -rel_tol * harvested) return false;
    }
  }
  return true;
}

double threshold_violation(Decoding decoding, const Scenario& s, const Allocation& a) {
  double worst = 0.0;
  for (std::size_t t = 0; t < s.slots; ++t) {
    if (a.tau[t] >= 1.0) continue;
    for (std::size_t i = 0; i < s.users; ++i) {
      if (s.threshold[i] <= 0.0) continue;
      worst = std::max(worst, s.threshold[i] - sinr(decoding, s, a, i, t));
    }
  }
  return worst;
}

double transferred_energy(const Scenario& s, const Allocation& a) {
  double acc = 0.0;
  for (std::size_t t = 0; t < s.slots; ++t) {
    for (std::size_t i = 0; i < s.users; ++i) acc += s.harvest_rate(i, t) * a.tau[t];
  }
  return acc;
}

double downlink_energy(const Scenario& s, const Allocation& a) {
  double acc = 0.0;
  for (double tau : a.tau) acc += s.er_power * tau;
  return acc;
}

NormalizedScenario normalize(const Scenario& scenario) {
  NormalizedScenario n{scenario, 1.0, scenario.noise_power};
  double largest = 0.0;
  for (std::size_t i = 0; i < scenario.users; ++i) {
    for (std::size_t t = 0; t < scenario.slots; ++t) {
      largest = std::max(largest, scenario.harvest_rate(i, t));
    }
  }
  if (largest > 0.0) n.energy_unit = largest;
  Scenario& out = n.scenario;
  for (double& h : out.downlink_gain.values()) h /= n.energy_unit;
  for (double& g : out.uplink_gain.values()) g *= n.energy_unit / scenario.noise_power;
  out.noise_power = 1.0;
  return n;
}

Allocation NormalizedScenario::to_physical(const Allocation& normalized) const {
  Allocation a = normalized;
  for (double& e : a.energy.values()) e *= energy_unit;
  return a;
}

Allocation NormalizedScenario::to_normalized(const Allocation& physical) const {
  Allocation a = physical;
  for (double& e : a.energy.values()) e /= energy_unit;
  return a;
}

}  // namespace wpnoma
