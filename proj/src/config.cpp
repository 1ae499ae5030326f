#include "wpnoma/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace wpnoma {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "K",           "T",          "P_B_watts", "eta",       "noise_psd_dbm_hz", "bandwidth_hz",
    "carrier_freq_hz", "G_r_db", "d_ER_AP_m", "d_U_ER_m", "S_th_db",          "gains"};

double number(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  const json& v = doc.at(key);
  if (!v.is_number()) throw ConfigError(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(std::string("field '") + key + "' must be finite");
  return d;
}

double positive(const json& doc, const char* key) {
  const double d = number(doc, key);
  if (!(d > 0.0)) throw ConfigError(std::string("field '") + key + "' must be positive");
  return d;
}

std::size_t count(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  const json& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    throw ConfigError(std::string("field '") + key + "' must be an integer >= 1");
  }
  return static_cast<std::size_t>(v.get<long long>());
}

std::vector<double> per_user(const json& v, std::size_t users, const char* key) {
  if (v.is_number()) return std::vector<double>(users, v.get<double>());
  if (v.is_array()) {
    if (v.size() != users) {
      throw ConfigError(std::string("field '") + key + "' must have K entries");
    }
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number()) throw ConfigError(std::string("field '") + key + "' must be numeric");
      out.push_back(e.get<double>());
    }
    return out;
  }
  throw ConfigError(std::string("field '") + key + "' must be a number or an array");
}

SlotMatrix gain_matrix(const json& v, std::size_t users, std::size_t slots, const char* key) {
  SlotMatrix m(users, slots);
  auto check = [key](const json& e) {
    if (!e.is_number() || !(e.get<double>() >= 0.0)) {
      throw ConfigError(std::string("gain '") + key + "' entries must be nonnegative numbers");
    }
    return e.get<double>();
  };
  if (v.is_number()) {
    const double g = check(v);
    for (double& x : m.values()) x = g;
    return m;
  }
  if (!v.is_array() || v.size() != users) {
    throw ConfigError(std::string("gain '") + key + "' must be a scalar or have K rows");
  }
  for (std::size_t i = 0; i < users; ++i) {
    const json& row = v[i];
    if (row.is_number()) {
      const double g = check(row);
      for (std::size_t t = 0; t < slots; ++t) m(i, t) = g;
    } else if (row.is_array() && row.size() == slots) {
      for (std::size_t t = 0; t < slots; ++t) m(i, t) = check(row[t]);
    } else {
      throw ConfigError(std::string("gain '") + key + "' rows must be scalars or length-T arrays");
    }
  }
  return m;
}

}  // namespace

ScenarioConfig ScenarioConfig::reference() { return ScenarioConfig{}; }

void ScenarioConfig::set_users(std::size_t k) {
  if (k == 0) throw ConfigError("K must be at least 1");
  users = k;
  efficiency.assign(k, efficiency.empty() ? 0.49 : efficiency.front());
  threshold_db.assign(k, threshold_db.empty() ? std::nullopt : threshold_db.front());
  downlink_gain.reset();
  uplink_gain.reset();
}

void ScenarioConfig::set_threshold_db(std::optional<double> db) { threshold_db.assign(users, db); }

ScenarioConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("scenario must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!kKnownKeys.contains(key)) throw ConfigError("unknown field '" + key + "'");
  }
  ScenarioConfig c;
  c.users = count(doc, "K");
  c.slots = count(doc, "T");
  c.er_power_w = positive(doc, "P_B_watts");
  if (!doc.contains("eta")) throw ConfigError("missing field 'eta'");
  c.efficiency = per_user(doc.at("eta"), c.users, "eta");
  for (double e : c.efficiency) {
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError("field 'eta' must lie in (0, 1]");
  }
  c.noise_psd_dbm_hz = number(doc, "noise_psd_dbm_hz");
  c.bandwidth_hz = positive(doc, "bandwidth_hz");
  c.carrier_freq_hz = positive(doc, "carrier_freq_hz");
  c.rx_gain_db = number(doc, "G_r_db");
  c.er_ap_distance_m = positive(doc, "d_ER_AP_m");
  c.user_er_distance_m = positive(doc, "d_U_ER_m");

  if (!doc.contains("S_th_db")) throw ConfigError("missing field 'S_th_db'");
  const json& th = doc.at("S_th_db");
  if (th.is_null()) {
    c.threshold_db.assign(c.users, std::nullopt);
  } else if (th.is_number()) {
    c.threshold_db.assign(c.users, th.get<double>());
  } else if (th.is_array() && th.size() == c.users) {
    c.threshold_db.clear();
    for (const json& e : th) {
      if (e.is_null()) {
        c.threshold_db.emplace_back(std::nullopt);
      } else if (e.is_number()) {
        c.threshold_db.emplace_back(e.get<double>());
      } else {
        throw ConfigError("field 'S_th_db' entries must be numbers or null");
      }
    }
  } else {
    throw ConfigError("field 'S_th_db' must be null, a number or an array of K entries");
  }

  if (doc.contains("gains")) {
    const json& gains = doc.at("gains");
    if (!gains.is_object()) throw ConfigError("field 'gains' must be an object");
    for (const auto& [key, _] : gains.items()) {
      if (key != "h" && key != "g") throw ConfigError("unknown gain '" + key + "'");
    }
    if (gains.contains("h")) c.downlink_gain = gain_matrix(gains.at("h"), c.users, c.slots, "h");
    if (gains.contains("g")) c.uplink_gain = gain_matrix(gains.at("g"), c.users, c.slots, "g");
  }
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path.string() + "': " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ScenarioConfig& c) {
  json doc;
  doc["K"] = c.users;
  doc["T"] = c.slots;
  doc["P_B_watts"] = c.er_power_w;
  doc["eta"] = c.efficiency;
  doc["noise_psd_dbm_hz"] = c.noise_psd_dbm_hz;
  doc["bandwidth_hz"] = c.bandwidth_hz;
  doc["carrier_freq_hz"] = c.carrier_freq_hz;
  doc["G_r_db"] = c.rx_gain_db;
  doc["d_ER_AP_m"] = c.er_ap_distance_m;
  doc["d_U_ER_m"] = c.user_er_distance_m;
  json th = json::array();
  for (const auto& v : c.threshold_db) th.push_back(v ? json(*v) : json(nullptr));
  doc["S_th_db"] = th;
  auto matrix = [](const SlotMatrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.users(); ++i) {
      json row = json::array();
      for (std::size_t t = 0; t < m.slots(); ++t) row.push_back(m(i, t));
      rows.push_back(row);
    }
    return rows;
  };
  if (c.downlink_gain || c.uplink_gain) {
    json gains = json::object();
    if (c.downlink_gain) gains["h"] = matrix(*c.downlink_gain);
    if (c.uplink_gain) gains["g"] = matrix(*c.uplink_gain);
    doc["gains"] = gains;
  }
  return doc;
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double noise_power_watts(double psd_dbm_hz, double bandwidth_hz) {
  return dbm_to_watts(psd_dbm_hz) * bandwidth_hz;
}

Geometry make_geometry(const ScenarioConfig& c) {
  return Geometry::uniform_circle(c.users, c.er_ap_distance_m, c.user_er_distance_m,
                                  c.carrier_freq_hz, db_to_linear(c.rx_gain_db));
}

namespace {

Scenario assemble(const ScenarioConfig& c) {
  if (c.efficiency.size() != c.users || c.threshold_db.size() != c.users) {
    throw ConfigError("per-user fields must have K entries");
  }
  Scenario s;
  s.users = c.users;
  s.slots = c.slots;
  s.er_power = c.er_power_w;
  s.efficiency = c.efficiency;
  s.noise_power = noise_power_watts(c.noise_psd_dbm_hz, c.bandwidth_hz);
  s.bandwidth_hz = c.bandwidth_hz;
  s.threshold.clear();
  for (const auto& db : c.threshold_db) s.threshold.push_back(db ? db_to_linear(*db) : 0.0);

  const Geometry geom = make_geometry(c);
  if (c.downlink_gain) {
    s.downlink_gain = *c.downlink_gain;
  } else {
    const double h = downlink_gain(geom.user_er_distance, geom.carrier_freq_hz, geom.rx_gain);
    s.downlink_gain = SlotMatrix(c.users, c.slots, h);
  }
  if (c.uplink_gain) {
    s.uplink_gain = *c.uplink_gain;
  } else {
    const std::vector<double> d = geom.user_ap_distances();
    s.uplink_gain = SlotMatrix(c.users, c.slots);
    for (std::size_t i = 0; i < c.users; ++i) {
      for (std::size_t t = 0; t < c.slots; ++t) s.uplink_gain(i, t) = uplink_gain(d[i]);
    }
  }
  s.validate();
  return s;
}

}  // namespace

Scenario build_scenario(const ScenarioConfig& c) {
  try {
    return assemble(c);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace wpnoma
