#pragma once

// Physical model of a wireless-powered uplink with non-orthogonal access:
// an energy-rich source (ER) charges K users during the first tau0 fraction
// of every slot, then all users transmit simultaneously to the access point
// (AP) for the remaining 1 - tau0. Slot duration is normalized to one, so
// energies are joules and rates are bits/slot/Hz.
//
// User indices are zero-based. Under successive interference cancellation
// user i is decoded before users i+1..K-1, which therefore interfere with it.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wpnoma {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// tau0 == 1 with positive uplink energy has no defined SINR.
class DegenerateSlotError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Dense users x slots array, row-major in the user index.
class SlotMatrix {
 public:
  SlotMatrix() = default;
  SlotMatrix(std::size_t users, std::size_t slots, double fill = 0.0)
      : users_(users), slots_(slots), data_(users * slots, fill) {}

  double& operator()(std::size_t i, std::size_t t) { return data_[i * slots_ + t]; }
  double operator()(std::size_t i, std::size_t t) const { return data_[i * slots_ + t]; }

  std::size_t users() const { return users_; }
  std::size_t slots() const { return slots_; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool operator==(const SlotMatrix&) const = default;

 private:
  std::size_t users_ = 0;
  std::size_t slots_ = 0;
  std::vector<double> data_;
};

struct Scenario {
  std::size_t users = 1;
  std::size_t slots = 1;
  double er_power = 1.0;              // P_B, watts
  std::vector<double> efficiency;     // eta_i in (0, 1]
  SlotMatrix downlink_gain;           // h_{i,t}
  SlotMatrix uplink_gain;             // g_{i,t}
  double noise_power = 1.0;           // sigma^2 at the AP, watts
  std::vector<double> threshold;      // S_i^th, linear SINR
  double bandwidth_hz = 1.0;

  // Throws DomainError when sizes disagree or a parameter is out of range.
  // Gains may be zero (a user that cannot harvest or cannot be heard).
  void validate() const;

  // gamma_{i,t}: harvested power while the ER is on.
  double harvest_rate(std::size_t i, std::size_t t) const;
};

// ER at the origin, AP on the positive x axis, users on a circle around the
// ER at equally spaced angles starting from zero.
struct Geometry {
  double er_ap_distance = 100.0;      // m
  double user_er_distance = 5.0;      // m, circle radius
  std::vector<double> user_angles;    // rad
  double carrier_freq_hz = 915e6;
  double rx_gain = 1.0;               // linear

  static Geometry uniform_circle(std::size_t users, double er_ap_distance, double user_er_distance,
                                 double carrier_freq_hz, double rx_gain);

  // Law of cosines; throws DomainError if a user sits on the AP.
  std::vector<double> user_ap_distances() const;
};

struct Allocation {
  std::vector<double> tau;   // harvesting fraction per slot
  SlotMatrix energy;         // E_{i,t}, joules

  Allocation() = default;
  Allocation(std::size_t users, std::size_t slots, double tau0 = 0.0)
      : tau(slots, tau0), energy(users, slots) {}

  std::size_t users() const { return energy.users(); }
  std::size_t slots() const { return tau.size(); }
};

struct RateVector {
  SlotMatrix sinr;
  SlotMatrix rate;  // bits/slot/Hz

  double sum() const;
  double user_total(std::size_t i) const;
};

enum class Decoding { lcd, sicd };

inline constexpr double kSpeedOfLight = 299792458.0;

// 1e-3 d^-2 path loss.
double uplink_gain(double user_ap_distance_m);

// Friis free-space gain with unit transmit antenna gain.
double downlink_gain(double user_er_distance_m, double carrier_freq_hz, double rx_gain);

double harvest_rate(double efficiency, double downlink_gain, double er_power);

double sinr_lcd(const Scenario& scenario, const Allocation& alloc, std::size_t i, std::size_t t);
double sinr_sicd(const Scenario& scenario, const Allocation& alloc, std::size_t i, std::size_t t);
double sinr(Decoding decoding, const Scenario& scenario, const Allocation& alloc, std::size_t i,
            std::size_t t);

// (1 - tau) log2(1 + x), zero at tau == 1.
double throughput(double tau, double sinr);

// Telescoped SIC sum-rate of one slot.
double slot_sum_throughput_sicd(const Scenario& scenario, const Allocation& alloc, std::size_t t);

RateVector rates(Decoding decoding, const Scenario& scenario, const Allocation& alloc);
double sum_throughput(Decoding decoding, const Scenario& scenario, const Allocation& alloc);

// slack(i,t) = cumulative harvest - cumulative spend up to slot t.
SlotMatrix energy_causality_slack(const Scenario& scenario, const Allocation& alloc);

// Feasible when every prefix slack is above -1e-12 x cumulative harvest.
bool is_causal(const Scenario& scenario, const Allocation& alloc, double rel_tol = 1e-12);

// Largest shortfall of x_{i,t} below S_i^th over slots with uplink time.
double threshold_violation(Decoding decoding, const Scenario& scenario, const Allocation& alloc);

// Energy delivered to the users, sum_{i,t} gamma_{i,t} tau_t.
double transferred_energy(const Scenario& scenario, const Allocation& alloc);

// Energy radiated by the ER, sum_t P_B tau_t.
double downlink_energy(const Scenario& scenario, const Allocation& alloc);

// Rescaled copy of a scenario with unit noise power and harvest rates of
// order one. SINRs, rates and tau are unchanged; energies divide by
// energy_unit and the multipliers of the solvers scale accordingly.
struct NormalizedScenario {
  Scenario scenario;
  double energy_unit = 1.0;
  double noise_power = 1.0;  // of the original scenario

  Allocation to_physical(const Allocation& normalized) const;
  Allocation to_normalized(const Allocation& physical) const;
};

NormalizedScenario normalize(const Scenario& scenario);

}  // namespace wpnoma
