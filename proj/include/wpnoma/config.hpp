#pragma once

// JSON scenario files. Example:
//
//   { "K": 1, "T": 1, "P_B_watts": 3, "eta": 0.49,
//     "noise_psd_dbm_hz": -155, "bandwidth_hz": 1e6,
//     "carrier_freq_hz": 915e6, "G_r_db": 6,
//     "d_ER_AP_m": 100, "d_U_ER_m": 5, "S_th_db": null }
//
// Per-user fields accept a scalar (broadcast) or an array of length K.
// "S_th_db": null means no decodability threshold (S_th = 0 linear).
// The optional "gains": {"h": ..., "g": ...} block overrides the geometric
// channel model; each entry is a scalar, a length-K array (static over
// slots) or a K x T nested array.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wpnoma/model.hpp"

namespace wpnoma {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  std::size_t users = 1;
  std::size_t slots = 1;
  double er_power_w = 3.0;
  std::vector<double> efficiency{0.49};
  double noise_psd_dbm_hz = -155.0;
  double bandwidth_hz = 1e6;
  double carrier_freq_hz = 915e6;
  double rx_gain_db = 6.0;
  double er_ap_distance_m = 100.0;
  double user_er_distance_m = 5.0;
  // nullopt entries mean "no threshold".
  std::vector<std::optional<double>> threshold_db{std::nullopt};
  std::optional<SlotMatrix> downlink_gain;
  std::optional<SlotMatrix> uplink_gain;

  // Parameter values of the reference setup (one user, one slot, 100 m).
  static ScenarioConfig reference();

  // Broadcast scalars to K entries; used after K changes in a sweep.
  void set_users(std::size_t k);
  void set_threshold_db(std::optional<double> db);
};

ScenarioConfig parse_config(const nlohmann::json& doc);
ScenarioConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioConfig& config);

double dbm_to_watts(double dbm);
double db_to_linear(double db);

// Noise power = PSD x bandwidth.
double noise_power_watts(double psd_dbm_hz, double bandwidth_hz);

Geometry make_geometry(const ScenarioConfig& config);
Scenario build_scenario(const ScenarioConfig& config);

}  // namespace wpnoma
