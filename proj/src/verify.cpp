#include "wpnoma/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

#include "wpnoma/config.hpp"
#include "wpnoma/lcd.hpp"
#include "wpnoma/sicd.hpp"

namespace wpnoma::verify {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Scenario reference(std::size_t users, std::size_t slots) {
  ScenarioConfig c = ScenarioConfig::reference();
  c.set_users(users);
  c.slots = slots;
  return build_scenario(c);
}

Allocation random_allocation(const Scenario& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Allocation a(s.users, s.slots);
  for (double& t : a.tau) t = 0.999 * unit(rng);
  for (std::size_t i = 0; i < s.users; ++i) {
    for (std::size_t t = 0; t < s.slots; ++t) a.energy(i, t) = unit(rng) * s.harvest_rate(i, t);
  }
  return a;
}

Check telescoping(int samples, std::mt19937_64& rng) {
  Check c{"telescoped SIC sum-rate", true, "", 0.0};
  std::uniform_int_distribution<int> users(1, 6);
  std::uniform_int_distribution<int> slots(1, 4);
  double worst = 0.0;
  for (int n = 0; n < samples; ++n) {
    const Scenario s = reference(static_cast<std::size_t>(users(rng)), static_cast<std::size_t>(slots(rng)));
    const Allocation a = random_allocation(s, rng);
    const RateVector r = rates(Decoding::sicd, s, a);
    for (std::size_t t = 0; t < s.slots; ++t) {
      double direct = 0.0;
      for (std::size_t i = 0; i < s.users; ++i) direct += r.rate(i, t);
      const double tele = slot_sum_throughput_sicd(s, a, t);
      worst = std::max(worst, std::abs(tele - direct) / std::max(std::abs(direct), 1e-300));
    }
  }
  c.passed = worst <= 1e-12;
  c.detail = "worst relative difference " + sci(worst) + " over " + std::to_string(samples) + " allocations";
  return c;
}

Check condensation(int samples, std::mt19937_64& rng) {
  Check c{"condensation bound and tangency", true, "", 0.0};
  std::uniform_real_distribution<double> logx(std::log(1e-3), std::log(1e3));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_bound = -1.0;
  double worst_equal = 0.0;
  double worst_grad = 0.0;
  for (int n = 0; n < samples; ++n) {
    const std::size_t users = 2;
    const std::size_t slots = 2;
    SlotMatrix x_bar(users, slots);
    SlotMatrix x(users, slots);
    for (double& v : x_bar.values()) v = std::exp(logx(rng));
    for (double& v : x.values()) v = std::exp(logx(rng));
    const std::vector<double> tau{0.9 * unit(rng), 0.9 * unit(rng)};
    const lcd::Condensation cond = lcd::condense(x_bar, tau);
    const double gap = lcd::log_surrogate(x, cond, tau) - lcd::log_objective(x, tau);
    worst_bound = std::max(worst_bound, gap);
    const double f = lcd::log_objective(x_bar, tau);
    worst_equal = std::max(worst_equal, std::abs(lcd::log_surrogate(x_bar, cond, tau) - f) /
                                            std::max(1.0, std::abs(f)));
    if (n < samples / 10 + 1) {
      // Differentiated in log x, where one step size suits every entry.
      auto as_matrix = [&](std::span<const double> v) {
        SlotMatrix m(users, slots);
        std::transform(v.begin(), v.end(), m.values().begin(), [](double u) { return std::exp(u); });
        return m;
      };
      const oracle::ScalarFn exact = [&](std::span<const double> v) {
        return lcd::log_objective(as_matrix(v), tau);
      };
      const oracle::ScalarFn approx = [&](std::span<const double> v) {
        return lcd::log_surrogate(as_matrix(v), cond, tau);
      };
      std::vector<double> point(x_bar.values().begin(), x_bar.values().end());
      for (double& v : point) v = std::log(v);
      const auto ge = oracle::finite_diff_gradient(exact, point, 1e-5);
      const auto ga = oracle::finite_diff_gradient(approx, point, 1e-5);
      for (std::size_t k = 0; k < ge.size(); ++k) {
        worst_grad = std::max(worst_grad, std::abs(ge[k] - ga[k]) / std::max(1.0, std::abs(ge[k])));
      }
    }
  }
  c.passed = worst_bound <= 0.0 && worst_equal <= 1e-12 && worst_grad <= 1e-6;
  c.detail = "max log(f~/f) " + sci(worst_bound) + ", tangency " + sci(worst_equal) +
             ", gradient mismatch " + sci(worst_grad);
  return c;
}

Check sicd_concavity(int samples, std::uint64_t seed) {
  Check c{"SICD objective concavity probe", true, "", 0.0};
  const Scenario s = reference(2, 2);
  const oracle::ScalarFn fn = [&](std::span<const double> v) {
    Allocation a(s.users, s.slots);
    std::copy(v.begin(), v.begin() + 2, a.tau.begin());
    std::copy(v.begin() + 2, v.end(), a.energy.values().begin());
    return sum_throughput(Decoding::sicd, s, a);
  };
  const oracle::Sampler sampler = [&](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> v(6);
    v[0] = 0.999 * unit(rng);
    v[1] = 0.999 * unit(rng);
    for (std::size_t k = 2; k < 6; ++k) v[k] = 2.0 * s.harvest_rate(0, 0) * unit(rng);
    return v;
  };
  const oracle::ProbeResult r = oracle::concavity_probe(fn, sampler, samples, seed);
  c.passed = r.worst_violation <= 1e-9;
  c.detail = "worst violation " + sci(r.worst_violation) + " bits";
  return c;
}

Check lcd_witness(int samples, std::uint64_t seed) {
  Check c{"LCD objective non-concavity witness", true, "", 0.0};
  const Scenario s = reference(2, 1);
  const double cap = s.harvest_rate(0, 0);
  const oracle::ScalarFn fn = [&](std::span<const double> v) {
    Allocation a(s.users, s.slots, 0.3);
    a.energy(0, 0) = v[0];
    a.energy(1, 0) = v[1];
    return sum_throughput(Decoding::lcd, s, a);
  };
  const oracle::Sampler sampler = [&](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return std::vector<double>{cap * unit(rng), cap * unit(rng)};
  };
  const oracle::ProbeResult r = oracle::concavity_probe(fn, sampler, samples, seed);
  c.passed = r.worst_violation > 1e-9;
  c.detail = "worst violation " + sci(r.worst_violation) + " bits";
  return c;
}

sicd::SicdOptions sicd_options(const VerifyOptions& opt) {
  sicd::SicdOptions o;
  o.tamper = opt.tamper;
  return o;
}

Check grid_equivalence(std::size_t users, int resolution, const VerifyOptions& opt) {
  Check c{"SICD vs grid search, K=" + std::to_string(users) + ", " + std::to_string(resolution) +
              " points",
          true, "", 0.0};
  const Scenario s = reference(users, 1);
  const sicd::SicdResult r = sicd::solve_sicd(s, sicd_options(opt));
  oracle::GridOptions g;
  g.resolution = resolution;
  const oracle::GridResult grid = oracle::grid_search(s, Decoding::sicd, g);
  const double solver = sum_throughput(Decoding::sicd, s, r.allocation);
  const double rel = std::abs(solver - grid.objective) / std::max(grid.objective, 1e-300);
  const bool causal = is_causal(s, r.allocation, 1e-9);
  c.passed = causal && rel <= 1e-3 && solver >= grid.objective * (1.0 - 1e-9);
  c.detail = "solver " + sci(solver) + ", grid " + sci(grid.objective) + ", relative " + sci(rel) +
             (causal ? "" : ", allocation not causal");
  return c;
}

Check scheme_equality(const VerifyOptions& opt) {
  Check c{"LCD equals SICD for one user", true, "", 0.0};
  const Scenario s = reference(1, 1);
  const sicd::SicdResult r = sicd::solve_sicd(s, sicd_options(opt));
  const lcd::LcdResult l = lcd::solve_lcd_given_tau(s, r.allocation.tau);
  const double a = sum_throughput(Decoding::sicd, s, r.allocation);
  const double b = l.sum_throughput();
  const double rel = std::abs(a - b) / std::max(a, 1e-300);
  c.passed = rel <= 1e-6 && is_causal(s, r.allocation, 1e-9);
  c.detail = "relative difference " + sci(rel);
  return c;
}

Check certificate(const VerifyOptions& opt) {
  Check c{"SICD duality certificate, K=5", true, "", 0.0};
  const Scenario s = reference(5, 1);
  const sicd::SicdResult r = sicd::solve_sicd(s, sicd_options(opt));
  const double value = sum_throughput(Decoding::sicd, s, r.allocation);
  const double gap = (sicd::dual_function(s, r.dual) - value) / std::max(1.0, value);
  const sicd::KktReport k = sicd::kkt_report(s, r.allocation, r.dual);
  c.passed = std::abs(gap) <= 1e-5 && k.stationarity <= 1e-6 && k.boundary <= 1e-6 &&
             k.slackness <= 1e-5 * std::max(1.0, value) && k.primal <= 1e-9;
  c.detail = "gap " + sci(gap) + ", stationarity " + sci(k.stationarity) + ", slackness " +
             sci(k.slackness) + ", primal " + sci(k.primal);
  return c;
}

template <typename F>
void timed(std::vector<Check>& out, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  Check c = f();
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.push_back(std::move(c));
}

}  // namespace

Level parse_level(std::string_view name) {
  if (name == "quick") return Level::quick;
  if (name == "full") return Level::full;
  throw std::invalid_argument("unknown verify level '" + std::string(name) + "'");
}

std::vector<Check> run_checks(const VerifyOptions& opt) {
  const bool full = opt.level == Level::full;
  const int samples = full ? 10000 : 1000;
  const int resolution = full ? 200 : 100;
  std::mt19937_64 rng(opt.seed);
  std::vector<Check> out;
  timed(out, [&] { return telescoping(samples, rng); });
  timed(out, [&] { return condensation(samples, rng); });
  timed(out, [&] { return sicd_concavity(samples, opt.seed); });
  timed(out, [&] { return lcd_witness(samples, opt.seed); });
  timed(out, [&] { return grid_equivalence(1, resolution, opt); });
  timed(out, [&] { return grid_equivalence(2, resolution, opt); });
  timed(out, [&] { return scheme_equality(opt); });
  timed(out, [&] { return certificate(opt); });
  return out;
}

void print_table(std::ostream& out, std::span<const Check> checks) {
  std::size_t width = 5;
  for (const Check& c : checks) width = std::max(width, c.name.size());
  for (const Check& c : checks) {
    char time[32];
    std::snprintf(time, sizeof time, "%8.2fs", c.seconds);
    out << (c.passed ? "PASS  " : "FAIL  ") << c.name << std::string(width - c.name.size() + 2, ' ')
        << time << "  " << c.detail << "\n";
  }
  const auto failed = std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; });
  out << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed") << "\n";
}

int cmd_verify(const VerifyOptions& options, std::ostream& out) {
  const std::vector<Check> checks = run_checks(options);
  print_table(out, checks);
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; }) ? 0 : 1;
}

}  // namespace wpnoma::verify
