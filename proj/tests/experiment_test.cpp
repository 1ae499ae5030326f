#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wpnoma/experiment.hpp"
#include "wpnoma/verify.hpp"

namespace wpnoma::experiment {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("wpnoma_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

fs::path write_config(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream(path) << doc.dump(2);
  return path;
}

nlohmann::json scenario_json(int users, nlohmann::json threshold_db = nullptr) {
  nlohmann::json doc = to_json(ScenarioConfig::reference());
  doc["K"] = users;
  doc["eta"] = 0.49;
  doc["S_th_db"] = threshold_db;
  return doc;
}

std::string read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Units, Mbps) {
  EXPECT_DOUBLE_EQ(to_mbps(3.0, 1, 1e6), 3.0);
  EXPECT_DOUBLE_EQ(to_mbps(60.0, 30, 1e6), 2.0);
  EXPECT_DOUBLE_EQ(to_mbps(1.0, 1, 2e5), 0.2);
  EXPECT_THROW(to_mbps(1.0, 0, 1e6), ConfigError);
}

TEST(Names, RoundTrip) {
  for (Scheme s : {Scheme::lcd, Scheme::sicd}) EXPECT_EQ(parse_scheme(to_string(s)), s);
  for (Axis a : {Axis::s_th, Axis::d_er_ap, Axis::k}) EXPECT_EQ(parse_axis(to_string(a)), a);
  EXPECT_THROW(parse_scheme("tdma"), ConfigError);
  EXPECT_THROW(parse_axis("power"), ConfigError);
}

TEST(Axis, Values) {
  EXPECT_EQ(axis_values(Axis::s_th, -10, 10, 3), (std::vector<double>{-10, 0, 10}));
  EXPECT_EQ(axis_values(Axis::d_er_ap, 50, 50, 1), (std::vector<double>{50}));
  EXPECT_EQ(axis_values(Axis::k, 1, 3, 5), (std::vector<double>{1, 2, 3}));
  EXPECT_THROW(axis_values(Axis::k, 0, 3, 4), ConfigError);
  EXPECT_THROW(axis_values(Axis::d_er_ap, -5, 10, 3), ConfigError);
  EXPECT_THROW(axis_values(Axis::s_th, 0, 1, 0), ConfigError);
}

TEST(Axis, Apply) {
  const ScenarioConfig c = ScenarioConfig::reference();
  EXPECT_EQ(apply_axis(c, Axis::k, 4).users, 4u);
  EXPECT_EQ(apply_axis(c, Axis::k, 4).efficiency.size(), 4u);
  EXPECT_EQ(apply_axis(c, Axis::d_er_ap, 60).er_ap_distance_m, 60.0);
  EXPECT_EQ(apply_axis(c, Axis::s_th, 3).threshold_db.front(), 3.0);
}

TEST(Workers, Environment) {
  ::setenv(kWorkersEnv, "3", 1);
  EXPECT_EQ(workers_from_env(), 3u);
  ::setenv(kWorkersEnv, "zero", 1);
  EXPECT_GE(workers_from_env(), 1u);
  ::unsetenv(kWorkersEnv);
  EXPECT_GE(workers_from_env(), 1u);
}

TEST(Sweep, RowsAreOrderedAndRepeatable) {
  ScenarioConfig c = ScenarioConfig::reference();
  c.set_users(2);
  const std::vector<double> values = axis_values(Axis::d_er_ap, 40, 120, 5);
  const std::vector<SweepRow> serial = run_sweep(c, Axis::d_er_ap, values, 1);
  const std::vector<SweepRow> parallel = run_sweep(c, Axis::d_er_ap, values, 4);
  ASSERT_EQ(serial.size(), 10u);
  for (std::size_t k = 0; k < values.size(); ++k) {
    EXPECT_EQ(serial[2 * k].scheme, Scheme::sicd);
    EXPECT_EQ(serial[2 * k + 1].scheme, Scheme::lcd);
    EXPECT_EQ(serial[2 * k].value, values[k]);
  }
  std::ostringstream a;
  std::ostringstream b;
  write_sweep_csv(a, serial);
  write_sweep_csv(b, parallel);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Sweep, CsvFormat) {
  SweepRow r;
  r.scheme = Scheme::lcd;
  r.axis = Axis::s_th;
  r.value = -2.5;
  r.feasible = true;
  r.status = SolveStatus::optimal;
  r.sum_throughput_mbps = 1.0 / 3.0;
  r.iterations = 4;
  std::ostringstream out;
  write_sweep_csv(out, std::vector<SweepRow>{r});
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("# wpnoma sweep csv v1\n", 0), 0u);
  EXPECT_NE(text.find("\nscheme,axis,value,feasible,status,"), std::string::npos);
  EXPECT_NE(text.find("\nlcd,s_th,-2.5,1,optimal,0,0.333333333,0,0,0,4\n"), std::string::npos);
}

TEST(Cli, SolveSingleUser) {
  TempDir dir;
  const fs::path cfg = write_config(dir / "k1.json", scenario_json(1));
  std::ostringstream log;
  EXPECT_EQ(cmd_solve(cfg, Scheme::sicd, dir / "out.csv", log), 0) << log.str();
  const std::string text = read(dir / "out.csv");
  const auto at = text.find("sum_throughput_mbps,,,");
  ASSERT_NE(at, std::string::npos);
  const double mbps = std::stod(text.substr(at + 22));
  EXPECT_NEAR(mbps, 3.1, 0.2);
}

TEST(Cli, SolveIsByteIdentical) {
  TempDir dir;
  const fs::path cfg = write_config(dir / "k3.json", scenario_json(3));
  std::ostringstream log;
  ASSERT_EQ(cmd_solve(cfg, Scheme::lcd, dir / "a.csv", log), 0) << log.str();
  ASSERT_EQ(cmd_solve(cfg, Scheme::lcd, dir / "b.csv", log), 0) << log.str();
  EXPECT_EQ(read(dir / "a.csv"), read(dir / "b.csv"));
}

TEST(Cli, LcdHighThresholdIsInfeasible) {
  TempDir dir;
  const fs::path cfg = write_config(dir / "k5.json", scenario_json(5, 10.0));
  std::ostringstream log;
  EXPECT_EQ(cmd_solve(cfg, Scheme::lcd, dir / "out.csv", log), 2);
  EXPECT_TRUE(fs::exists(dir / "out.csv"));
}

TEST(Cli, Errors) {
  TempDir dir;
  std::ostringstream log;
  EXPECT_EQ(cmd_solve(dir / "missing.json", Scheme::sicd, dir / "out.csv", log), 1);
  EXPECT_NE(log.str().find("error"), std::string::npos);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(cmd_solve(dir / "bad.json", Scheme::sicd, dir / "out.csv", log), 1);
  EXPECT_EQ(cmd_sweep(dir / "missing.json", Axis::k, 1, 2, 2, dir / "out.csv", log), 1);
  const fs::path cfg = write_config(dir / "ok.json", scenario_json(1));
  EXPECT_EQ(cmd_sweep(cfg, Axis::d_er_ap, -1, 2, 2, dir / "out.csv", log), 1);
  EXPECT_EQ(cmd_solve(cfg, Scheme::sicd, dir / "no_such_dir" / "out.csv", log), 1);
}

TEST(Cli, SweepWritesEveryPoint) {
  TempDir dir;
  const fs::path cfg = write_config(dir / "k.json", scenario_json(1, 0.0));
  std::ostringstream log;
  ASSERT_EQ(cmd_sweep(cfg, Axis::k, 1, 3, 3, dir / "k.csv", log), 0) << log.str();
  const std::string text = read(dir / "k.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2 + 6);
}

TEST(Verify, QuickSuitePasses) {
  std::ostringstream out;
  EXPECT_EQ(verify::cmd_verify({}, out), 0) << out.str();
  EXPECT_NE(out.str().find("all checks passed"), std::string::npos);
}

TEST(Verify, FlippedHarvestingFractionIsCaught) {
  verify::VerifyOptions opt;
  opt.tamper = [](const Scenario&, const Allocation& a) {
    Allocation b = a;
    for (double& t : b.tau) t = 1.0 - t;
    return b;
  };
  std::ostringstream out;
  EXPECT_EQ(verify::cmd_verify(opt, out), 1);
  EXPECT_NE(out.str().find("FAIL"), std::string::npos);
}

TEST(Verify, OverspentEnergyIsCaught) {
  verify::VerifyOptions opt;
  opt.tamper = [](const Scenario&, const Allocation& a) {
    Allocation b = a;
    for (double& e : b.energy.values()) e *= 1.01;
    return b;
  };
  std::ostringstream out;
  EXPECT_EQ(verify::cmd_verify(opt, out), 1);
}

TEST(Verify, Levels) {
  EXPECT_EQ(verify::parse_level("quick"), verify::Level::quick);
  EXPECT_EQ(verify::parse_level("full"), verify::Level::full);
  EXPECT_THROW(verify::parse_level("slow"), std::invalid_argument);
}

}  // namespace
}  // namespace wpnoma::experiment
