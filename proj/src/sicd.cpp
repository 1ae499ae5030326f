#include "wpnoma/sicd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "wpnoma/barrier.hpp"

namespace wpnoma::sicd {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kClampFactor = 1e3;
constexpr double kTie = 1e-12;

// Suffix sums sum_{n >= t} lambda(i, n).
SlotMatrix suffix_lambda(const Scenario& s, const DualState& d) {
  SlotMatrix out(s.users, s.slots);
  for (std::size_t i = 0; i < s.users; ++i) {
    double acc = 0.0;
    for (std::size_t t = s.slots; t-- > 0;) {
      acc += d.lambda(i, t);
      out(i, t) = acc;
    }
  }
  return out;
}

// a and b for slot t given the suffix sums.
void slot_coefficients(const Scenario& s, const DualState& d, const SlotMatrix& big_lambda,
                       std::size_t t, std::vector<double>& a, double& b) {
  a.assign(s.users, 0.0);
  double mu_s = 0.0;
  double harvest_term = 0.0;
  for (std::size_t i = 0; i < s.users; ++i) {
    const double g = s.uplink_gain(i, t);
    a[i] = kLn2 * (big_lambda(i, t) + g * mu_s - d.mu(i, t) * g);
    mu_s += d.mu(i, t) * s.threshold[i];
    harvest_term += big_lambda(i, t) * s.harvest_rate(i, t);
  }
  b = kLn2 * (s.noise_power * mu_s + harvest_term);
}

double total_harvest(const Scenario& s, std::size_t i) {
  double acc = 0.0;
  for (std::size_t t = 0; t < s.slots; ++t) acc += s.harvest_rate(i, t);
  return acc;
}

double harvest_scale(const Scenario& s) {
  double m = 0.0;
  for (std::size_t i = 0; i < s.users; ++i) m = std::max(m, total_harvest(s, i));
  return m > 0.0 ? m : 1.0;
}

// Closed-form E given a, the slot's uplink fraction and the other users' power.
EnergyUpdate energy_step(double g, double a, double uplink, double interference, double noise,
                         double clamp) {
  EnergyUpdate u;
  if (g <= 0.0) {
    if (a < 0.0) {
      u.unbounded = true;
      u.energy = clamp;
    }
    return u;
  }
  if (a <= 0.0) {
    u.unbounded = true;
    u.energy = clamp;
    return u;
  }
  u.energy = std::max(0.0, uplink * (g - noise * a) / (a * g) - interference / g);
  return u;
}

double slot_throughput(const Scenario& s, std::span<const double> tau, const SlotMatrix& energy,
                       std::size_t t) {
  double power = 0.0;
  for (std::size_t i = 0; i < s.users; ++i) power += s.uplink_gain(i, t) * energy(i, t);
  if (power <= 0.0) return 0.0;
  const double uplink = 1.0 - tau[t];
  if (uplink <= 0.0) throw DegenerateSlotError("tau0 = 1 with positive uplink energy");
  return uplink * std::log1p(power / (s.noise_power * uplink)) / kLn2;
}

double objective_bits(const Scenario& s, const Allocation& a) {
  double acc = 0.0;
  for (std::size_t t = 0; t < s.slots; ++t) acc += slot_throughput(s, a.tau, a.energy, t);
  return acc;
}

double psi_value(const Scenario& s, const Allocation& a, std::size_t i, std::size_t t) {
  double later = 0.0;
  for (std::size_t j = i + 1; j < s.users; ++j) later += s.uplink_gain(j, t) * a.energy(j, t);
  return s.uplink_gain(i, t) * a.energy(i, t) -
         s.threshold[i] * (s.noise_power * (1.0 - a.tau[t]) + later);
}

// Which (user, slot) pairs can carry energy, and which slots must stay in
// harvesting mode.
struct Structure {
  SlotMatrix max_harvest;        // cumulative harvest with tau = 1
  std::vector<char> active;      // users x slots
  std::vector<char> slot_active;
  std::vector<int> blocker;      // user with S > 0 that cannot transmit, or -1
  std::vector<double> idle_tau;  // tau of slots without active users
  bool infeasible = false;
  std::string reason;

  bool is_active(const Scenario& s, std::size_t i, std::size_t t) const {
    return active[i * s.slots + t] != 0;
  }
};

Structure analyze(const Scenario& s) {
  Structure st;
  st.max_harvest = SlotMatrix(s.users, s.slots);
  for (std::size_t i = 0; i < s.users; ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < s.slots; ++t) {
      acc += s.harvest_rate(i, t);
      st.max_harvest(i, t) = acc;
    }
  }
  auto can_send = [&](std::size_t i, std::size_t t) {
    return s.uplink_gain(i, t) > 0.0 && st.max_harvest(i, t) > 0.0;
  };
  st.active.assign(s.users * s.slots, 0);
  st.slot_active.assign(s.slots, 0);
  st.blocker.assign(s.slots, -1);
  st.idle_tau.assign(s.slots, 0.0);
  for (std::size_t t = 0; t < s.slots; ++t) {
    for (std::size_t i = 0; i < s.users && st.blocker[t] < 0; ++i) {
      if (s.threshold[i] > 0.0 && !can_send(i, t)) st.blocker[t] = static_cast<int>(i);
    }
    bool harvests = false;
    for (std::size_t i = 0; i < s.users; ++i) {
      harvests = harvests || s.harvest_rate(i, t) > 0.0;
      if (st.blocker[t] < 0 && can_send(i, t)) {
        st.active[i * s.slots + t] = 1;
        st.slot_active[t] = 1;
      }
    }
    st.idle_tau[t] = (harvests || st.blocker[t] >= 0) ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < s.users; ++i) {
    if (s.threshold[i] <= 0.0) continue;
    bool somewhere = false;
    for (std::size_t t = 0; t < s.slots; ++t) somewhere = somewhere || can_send(i, t);
    if (!somewhere) {
      st.infeasible = true;
      st.reason = "user " + std::to_string(i) +
                  " has zero achievable SINR in every slot, below its threshold";
      return st;
    }
  }
  return st;
}

// -s log2(1 + sum g E / s) over one slot.
class SlotObjective final : public opt::Function {
 public:
  SlotObjective(int s_var, std::vector<int> e_vars, std::vector<double> gains)
      : gains_(std::move(gains)) {
    vars_.push_back(s_var);
    vars_.insert(vars_.end(), e_vars.begin(), e_vars.end());
  }

  const std::vector<int>& support() const override { return vars_; }

  bool in_domain(const opt::Vector& x) const override {
    const double s = x[vars_[0]];
    return s > 0.0 && power(x) > -s;
  }

  double value(const opt::Vector& x) const override {
    const double s = x[vars_[0]];
    return -s * std::log1p(power(x) / s) / kLn2;
  }

  void model(const opt::Vector& x, opt::LocalModel& out) const override {
    const double s = x[vars_[0]];
    const double w = power(x) / s;
    const auto n = static_cast<Eigen::Index>(vars_.size());
    out.value = -s * std::log1p(w) / kLn2;
    out.gradient.resize(n);
    out.gradient[0] = -(std::log1p(w) - w / (1.0 + w)) / kLn2;
    Eigen::VectorXd u(n);
    u[0] = w;
    for (Eigen::Index k = 1; k < n; ++k) {
      const double g = gains_[static_cast<std::size_t>(k - 1)];
      out.gradient[k] = -g / ((1.0 + w) * kLn2);
      u[k] = -g;
    }
    out.hessian = (u * u.transpose()) / (kLn2 * s * (1.0 + w) * (1.0 + w));
  }

 private:
  double power(const opt::Vector& x) const {
    double p = 0.0;
    for (std::size_t k = 0; k < gains_.size(); ++k) p += gains_[k] * x[vars_[k + 1]];
    return p;
  }

  std::vector<int> vars_;
  std::vector<double> gains_;
};

struct Recovery {
  bool ok = false;
  Allocation allocation;  // physical units
  DualState dual;
  int newton_steps = 0;
  std::string message;
};

// Barrier solve of the primal in normalized units, with multipliers of the
// causality and decodability rows mapped back to physical units.
Recovery recover_primal(const Scenario& physical, const Structure& st) {
  const NormalizedScenario ns = normalize(physical);
  const Scenario& s = ns.scenario;
  Recovery rec;

  std::vector<int> s_var(s.slots, -1);
  std::vector<int> e_var(s.users * s.slots, -1);
  int next = 0;
  for (std::size_t t = 0; t < s.slots; ++t) {
    if (st.slot_active[t]) s_var[t] = next++;
    for (std::size_t i = 0; i < s.users; ++i) {
      if (st.is_active(s, i, t)) e_var[i * s.slots + t] = next++;
    }
  }
  auto eid = [&](std::size_t i, std::size_t t) { return e_var[i * s.slots + t]; };

  opt::Problem prob;
  prob.num_vars = next;
  opt::Vector x0 = opt::Vector::Zero(next);
  std::vector<int> active_slots(s.users, 0);
  for (std::size_t i = 0; i < s.users; ++i) {
    for (std::size_t t = 0; t < s.slots; ++t) active_slots[i] += eid(i, t) >= 0 ? 1 : 0;
  }

  for (std::size_t t = 0; t < s.slots; ++t) {
    if (s_var[t] < 0) continue;
    std::vector<int> vars;
    std::vector<double> gains;
    for (std::size_t i = 0; i < s.users; ++i) {
      if (eid(i, t) < 0) continue;
      vars.push_back(eid(i, t));
      gains.push_back(s.uplink_gain(i, t));
      x0[eid(i, t)] = 0.25 * st.max_harvest(i, t) / ns.energy_unit / active_slots[i];
    }
    prob.objective.push_back(std::make_unique<SlotObjective>(s_var[t], vars, gains));
    x0[s_var[t]] = 0.5;
    prob.constraints.push_back(
        std::make_unique<opt::AffineFunction>(std::vector<int>{s_var[t]}, std::vector<double>{1.0}, -1.0));
    prob.constraints.push_back(
        std::make_unique<opt::AffineFunction>(std::vector<int>{s_var[t]}, std::vector<double>{-1.0}, 0.0));
  }
  for (int v = 0; v < next; ++v) {
    bool is_s = std::find(s_var.begin(), s_var.end(), v) != s_var.end();
    if (!is_s) {
      prob.constraints.push_back(
          std::make_unique<opt::AffineFunction>(std::vector<int>{v}, std::vector<double>{-1.0}, 0.0));
    }
  }

  struct Row {
    bool causal;
    std::size_t i, t;
    std::size_t index;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < s.users; ++i) {
    for (std::size_t t = 0; t < s.slots; ++t) {
      if (eid(i, t) < 0) continue;
      std::vector<int> vars;
      std::vector<double> coeffs;
      double constant = 0.0;
      for (std::size_t n = 0; n <= t; ++n) {
        const double gamma = s.harvest_rate(i, n);
        if (eid(i, n) >= 0) {
          vars.push_back(eid(i, n));
          coeffs.push_back(1.0);
        }
        if (s_var[n] >= 0) {
          if (gamma > 0.0) {
            vars.push_back(s_var[n]);
            coeffs.push_back(gamma);
          }
          constant -= gamma;
        } else {
          constant -= gamma * st.idle_tau[n];
        }
      }
      rows.push_back({true, i, t, prob.constraints.size()});
      prob.constraints.push_back(
          std::make_unique<opt::AffineFunction>(std::move(vars), std::move(coeffs), constant));
    }
  }
  for (std::size_t t = 0; t < s.slots; ++t) {
    if (s_var[t] < 0) continue;
    for (std::size_t i = 0; i < s.users; ++i) {
      const double th = s.threshold[i];
      if (th <= 0.0 || eid(i, t) < 0) continue;
      std::vector<int> vars{s_var[t], eid(i, t)};
      std::vector<double> coeffs{th, -s.uplink_gain(i, t)};
      for (std::size_t j = i + 1; j < s.users; ++j) {
        if (eid(j, t) < 0) continue;
        vars.push_back(eid(j, t));
        coeffs.push_back(th * s.uplink_gain(j, t));
      }
      rows.push_back({false, i, t, prob.constraints.size()});
      prob.constraints.push_back(
          std::make_unique<opt::AffineFunction>(std::move(vars), std::move(coeffs), 0.0));
    }
  }

  opt::BarrierOptions bo;
  bo.gap_tolerance = 1e-9;
  bo.slackness_tolerance = 1e-10;
  bo.max_newton_steps = 3000;
  const opt::BarrierResult r = opt::solve(prob, x0, bo);
  rec.newton_steps = r.newton_steps;
  if (r.status != opt::BarrierStatus::optimal) {
    rec.message = r.status == opt::BarrierStatus::infeasible
                      ? "no strictly feasible allocation found"
                      : "barrier stage did not converge";
    return rec;
  }

  Allocation a(s.users, s.slots);
  for (std::size_t t = 0; t < s.slots; ++t) {
    a.tau[t] = s_var[t] >= 0 ? 1.0 - r.x[s_var[t]] : st.idle_tau[t];
    for (std::size_t i = 0; i < s.users; ++i) {
      a.energy(i, t) = eid(i, t) >= 0 ? r.x[eid(i, t)] : 0.0;
    }
  }
  rec.allocation = ns.to_physical(a);
  rec.dual = DualState(s.users, s.slots);
  for (const Row& row : rows) {
    const double m = r.multipliers[static_cast<Eigen::Index>(row.index)];
    if (row.causal) {
      rec.dual.lambda(row.i, row.t) = m / ns.energy_unit;
    } else {
      rec.dual.mu(row.i, row.t) = m / physical.noise_power;
    }
  }
  rec.ok = true;
  return rec;
}

// Raises multipliers of rows that were eliminated from the barrier problem
// until the dual function is finite and attained at the primal point.
void complete_dual(const Scenario& s, const Structure& st, const Allocation& alloc,
                   DualState& dual) {
  std::vector<double> z(s.slots, 0.0);
  for (std::size_t t = 0; t < s.slots; ++t) {
    double p = 0.0;
    for (std::size_t i = 0; i < s.users; ++i) p += s.uplink_gain(i, t) * alloc.energy(i, t);
    const double uplink = 1.0 - alloc.tau[t];
    if (p > 0.0 && uplink > 0.0) z[t] = p / (s.noise_power * uplink);
  }
  for (std::size_t i = 0; i < s.users; ++i) {
    for (std::size_t t = s.slots; t-- > 0;) {
      const double g = s.uplink_gain(i, t);
      if (g <= 0.0 || st.max_harvest(i, t) > 0.0) continue;
      const double target = g / (kLn2 * s.noise_power * (1.0 + z[t]));
      const double have = a_coeff(s, dual, i, t) / kLn2;
      if (have < target) dual.lambda(i, t) += target - have;
    }
  }
  for (std::size_t t = 0; t < s.slots; ++t) {
    if (st.blocker[t] < 0) continue;
    const SlotMatrix big = suffix_lambda(s, dual);
    std::vector<double> a;
    double b = 0.0;
    slot_coefficients(s, dual, big, t, a, b);
    double best = 0.0;
    bool bounded = true;
    for (std::size_t i = 0; i < s.users; ++i) {
      const double g = s.uplink_gain(i, t);
      if (g <= 0.0) continue;
      if (a[i] <= 0.0) {
        bounded = false;
        break;
      }
      const double zi = std::max(0.0, g / (s.noise_power * a[i]) - 1.0);
      const double e = zi * s.noise_power / g;
      best = std::max(best, std::log1p(zi) / kLn2 - a[i] / kLn2 * e);
    }
    if (!bounded) continue;
    const double deficit = best - b / kLn2;
    if (deficit > 0.0) {
      const auto k = static_cast<std::size_t>(st.blocker[t]);
      dual.mu(k, t) += deficit / (s.noise_power * s.threshold[k]);
    }
  }
}

// Minimum-norm correction of the multipliers of binding rows so that the
// stationarity equations of interior coordinates hold in relative form.
DualState polish_dual(const Scenario& s, const Structure& st, const Allocation& alloc,
                      const DualState& dual) {
  const Subgradients sg = subgradients(s, alloc);
  std::vector<std::pair<bool, std::size_t>> unknowns;  // (is_mu, i * slots + t)
  std::vector<int> column(2 * s.users * s.slots, -1);
  double lambda_top = 0.0;
  double mu_top = 0.0;
  for (double v : dual.lambda.values()) lambda_top = std::max(lambda_top, v);
  for (double v : dual.mu.values()) mu_top = std::max(mu_top, v);
  for (std::size_t i = 0; i < s.users; ++i) {
    for (std::size_t t = 0; t < s.slots; ++t) {
      const std::size_t q = i * s.slots + t;
      if (sg.nu(i, t) <= 1e-6 * st.max_harvest(i, t) && lambda_top > 0.0) {
        column[q] = static_cast<int>(unknowns.size());
        unknowns.emplace_back(false, q);
      }
      const double scale = s.uplink_gain(i, t) * alloc.energy(i, t) + s.threshold[i] * s.noise_power;
      if (s.threshold[i] > 0.0 && alloc.tau[t] < 1.0 && sg.psi(i, t) <= 1e-6 * scale && mu_top > 0.0) {
        column[s.users * s.slots + q] = static_cast<int>(unknowns.size());
        unknowns.emplace_back(true, q);
      }
    }
  }
  if (unknowns.empty()) return dual;

  struct Equation {
    std::vector<std::pair<int, double>> terms;
    double residual;
  };
  std::vector<Equation> equations;
  const SlotMatrix big = suffix_lambda(s, dual);
  std::vector<double> a;
  for (std::size_t t = 0; t < s.slots; ++t) {
    const double uplink = 1.0 - alloc.tau[t];
    if (!st.slot_active[t] || uplink <= 1e-7) continue;
    double b = 0.0;
    slot_coefficients(s, dual, big, t, a, b);
    double power = 0.0;
    for (std::size_t i = 0; i < s.users; ++i) power += s.uplink_gain(i, t) * alloc.energy(i, t);
    const double z = power / (s.noise_power * uplink);
    auto lambda_col = [&](std::size_t i, std::size_t n) { return column[i * s.slots + n]; };
    auto mu_col = [&](std::size_t j) { return column[s.users * s.slots + j * s.slots + t]; };

    const double fz = f_z(z);
    // Boundary coordinates join only when their sign condition fails.
    if (fz > 0.0 && (alloc.tau[t] > 1e-7 || b / fz < 1.0)) {
      Equation eq{{}, b / fz - 1.0};
      for (std::size_t i = 0; i < s.users; ++i) {
        for (std::size_t n = t; n < s.slots; ++n) {
          if (lambda_col(i, n) >= 0) eq.terms.emplace_back(lambda_col(i, n), kLn2 * s.harvest_rate(i, t) / fz);
        }
        if (mu_col(i) >= 0) eq.terms.emplace_back(mu_col(i), kLn2 * s.noise_power * s.threshold[i] / fz);
      }
      equations.push_back(std::move(eq));
    }
    for (std::size_t i = 0; i < s.users; ++i) {
      const double g = s.uplink_gain(i, t);
      if (!st.is_active(s, i, t)) continue;
      const double k = s.noise_power * (1.0 + z) / g;
      if (alloc.energy(i, t) <= 1e-7 * st.max_harvest(i, t) && a[i] * k >= 1.0) continue;
      Equation eq{{}, a[i] * k - 1.0};
      for (std::size_t n = t; n < s.slots; ++n) {
        if (lambda_col(i, n) >= 0) eq.terms.emplace_back(lambda_col(i, n), kLn2 * k);
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (mu_col(j) >= 0) eq.terms.emplace_back(mu_col(j), kLn2 * g * s.threshold[j] * k);
      }
      if (mu_col(i) >= 0) eq.terms.emplace_back(mu_col(i), -kLn2 * g * k);
      equations.push_back(std::move(eq));
    }
  }
  if (equations.empty()) return dual;

  const auto rows = static_cast<Eigen::Index>(equations.size());
  const auto cols = static_cast<Eigen::Index>(unknowns.size());
  Eigen::VectorXd colscale(cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const auto [is_mu, q] = unknowns[static_cast<std::size_t>(c)];
    const double v = is_mu ? dual.mu.values()[q] : dual.lambda.values()[q];
    colscale[c] = std::max(v, 1e-6 * (is_mu ? mu_top : lambda_top));
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd rhs(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Equation& eq = equations[static_cast<std::size_t>(r)];
    for (const auto& [c, v] : eq.terms) m(r, c) += v * colscale[c];
    rhs[r] = -eq.residual;
  }
  const Eigen::VectorXd y = m.completeOrthogonalDecomposition().solve(rhs);
  DualState out = dual;
  if (!y.allFinite()) return out;
  for (Eigen::Index c = 0; c < cols; ++c) {
    const auto [is_mu, q] = unknowns[static_cast<std::size_t>(c)];
    double& v = is_mu ? out.mu.values()[q] : out.lambda.values()[q];
    v = std::max(0.0, v + colscale[c] * y[c]);
  }
  return out;
}

Allocation repair(const Scenario& s, Allocation a) {
  for (std::size_t t = 0; t < s.slots; ++t) {
    a.tau[t] = std::clamp(a.tau[t], 0.0, 1.0);
  }
  for (std::size_t i = 0; i < s.users; ++i) {
    double bank = 0.0;
    for (std::size_t t = 0; t < s.slots; ++t) {
      bank += s.harvest_rate(i, t) * a.tau[t];
      double e = a.tau[t] >= 1.0 ? 0.0 : std::clamp(a.energy(i, t), 0.0, bank);
      a.energy(i, t) = e;
      bank -= e;
    }
  }
  return a;
}

double threshold_shortfall(const Scenario& s, const Allocation& a) {
  double worst = 0.0;
  for (std::size_t t = 0; t < s.slots; ++t) {
    if (a.tau[t] >= 1.0) continue;
    for (std::size_t i = 0; i < s.users; ++i) {
      if (s.threshold[i] > 0.0) worst = std::max(worst, -psi_value(s, a, i, t) / s.noise_power);
    }
  }
  return worst;
}

}  // namespace

Allocation InnerState::allocation() const {
  Allocation a;
  a.tau = tau;
  a.energy = energy;
  return a;
}

double a_coeff(const Scenario& s, const DualState& d, std::size_t i, std::size_t t) {
  double big = 0.0;
  for (std::size_t n = t; n < s.slots; ++n) big += d.lambda(i, n);
  double mu_s = 0.0;
  for (std::size_t j = 0; j < i; ++j) mu_s += d.mu(j, t) * s.threshold[j];
  const double g = s.uplink_gain(i, t);
  return kLn2 * (big + g * mu_s - d.mu(i, t) * g);
}

double b_coeff(const Scenario& s, const DualState& d, std::size_t t) {
  double mu_s = 0.0;
  double harvest_term = 0.0;
  for (std::size_t i = 0; i < s.users; ++i) {
    mu_s += d.mu(i, t) * s.threshold[i];
    double big = 0.0;
    for (std::size_t n = t; n < s.slots; ++n) big += d.lambda(i, n);
    harvest_term += big * s.harvest_rate(i, t);
  }
  return kLn2 * (s.noise_power * mu_s + harvest_term);
}

double f_z(double z) {
  if (z < 1e-3) {
    // Alternating series sum_{k >= 2} (-1)^k (k - 1) / k z^k.
    double acc = 0.0;
    double p = z * z;
    for (int k = 2; k < 10; ++k, p *= z) acc += ((k % 2 == 0) ? 1.0 : -1.0) * (k - 1) * p / k;
    return acc;
  }
  return std::log1p(z) - z / (1.0 + z);
}

double solve_z(double b, double tol) {
  if (!(b >= 0.0) || !std::isfinite(b)) throw DomainError("b must be finite and nonnegative");
  if (b == 0.0) return 0.0;
  double hi = 1.0;
  while (f_z(hi) < b) hi *= 2.0;
  double lo = 0.0;
  for (int k = 0; k < 2000 && hi - lo > tol * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (f_z(mid) < b) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double tau_update(const Scenario& s, std::span<const double> energy_slot, double z_star,
                  std::size_t t) {
  if (energy_slot.size() != s.users) throw DomainError("one energy per user expected");
  double power = 0.0;
  for (std::size_t i = 0; i < s.users; ++i) power += s.uplink_gain(i, t) * energy_slot[i];
  if (z_star <= 0.0) return power > 0.0 ? 0.0 : 1.0;
  return std::min(std::max(1.0 - power / (z_star * s.noise_power), 0.0), 1.0);
}

EnergyUpdate energy_update(const Scenario& s, const DualState& d, const Allocation& alloc,
                           std::size_t i, std::size_t t) {
  double interference = 0.0;
  for (std::size_t j = 0; j < s.users; ++j) {
    if (j != i) interference += s.uplink_gain(j, t) * alloc.energy(j, t);
  }
  return energy_step(s.uplink_gain(i, t), a_coeff(s, d, i, t), 1.0 - alloc.tau[t], interference,
                     s.noise_power, kClampFactor * total_harvest(s, i));
}

InnerState inner_maximize(const Scenario& s, const DualState& d, const InnerOptions& opt) {
  InnerState st;
  st.tau.assign(s.slots, 0.0);
  st.energy = SlotMatrix(s.users, s.slots);
  st.a = SlotMatrix(s.users, s.slots);
  st.b.assign(s.slots, 0.0);
  st.z_star.assign(s.slots, 0.0);

  std::vector<std::size_t> order = opt.slot_order;
  if (order.empty()) {
    order.resize(s.slots);
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  const SlotMatrix big = suffix_lambda(s, d);
  std::vector<double> clamp(s.users);
  for (std::size_t i = 0; i < s.users; ++i) clamp[i] = kClampFactor * total_harvest(s, i);
  const double escale = harvest_scale(s);
  const double noise = s.noise_power;

  std::vector<double> a;
  std::vector<double> e(s.users);
  for (std::size_t t : order) {
    double b = 0.0;
    slot_coefficients(s, d, big, t, a, b);
    const double z = solve_z(b);
    st.b[t] = b;
    st.z_star[t] = z;
    for (std::size_t i = 0; i < s.users; ++i) st.a(i, t) = a[i];

    bool unbounded = false;
    double uplink = 0.5;
    double power = 0.0;
    std::fill(e.begin(), e.end(), 0.0);
    auto energy_pass = [&] {
      for (std::size_t i = 0; i < s.users; ++i) {
        const double g = s.uplink_gain(i, t);
        const double others = power - g * e[i];
        const EnergyUpdate u = energy_step(g, a[i], uplink, others, noise, clamp[i]);
        unbounded = unbounded || u.unbounded;
        e[i] = u.energy;
        power = others + g * e[i];
      }
    };
    energy_pass();
    double ratio = -1.0;
    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
      ++st.sweeps;
      const double old_uplink = uplink;
      const std::vector<double> old_e = e;
      double p = 0.0;
      for (std::size_t i = 0; i < s.users; ++i) p += s.uplink_gain(i, t) * e[i];
      if (z <= 0.0) {
        uplink = p > 0.0 ? 1.0 : 0.0;
      } else {
        uplink = std::min(p / (z * noise), 1.0);
      }
      energy_pass();
      double change = std::abs(uplink - old_uplink);
      for (std::size_t i = 0; i < s.users; ++i) {
        change = std::max(change, std::abs(e[i] - old_e[i]) / escale);
      }
      if (change <= opt.tolerance) break;
      const double r = uplink > 0.0 ? power / (noise * uplink) : 0.0;
      if (uplink > 0.0 && std::abs(r - ratio) <= kTie * r) break;
      ratio = r;
    }

    if (unbounded) {
      st.unbounded = true;
    } else {
      // Place the end point of the homogeneous ray.
      double zhat = 0.0;
      for (std::size_t i = 0; i < s.users; ++i) {
        const double g = s.uplink_gain(i, t);
        if (g > 0.0) zhat = std::max(zhat, g / (noise * a[i]) - 1.0);
      }
      if (zhat > 0.0 && (z <= 0.0 || zhat > z * (1.0 + kTie))) {
        uplink = 1.0;
      } else if (zhat <= 0.0 || zhat < z * (1.0 - kTie)) {
        uplink = 0.0;
      }
      const double target = uplink * noise * zhat;
      double lead = 0.0;
      std::size_t first = s.users;
      for (std::size_t i = 0; i < s.users; ++i) {
        const double g = s.uplink_gain(i, t);
        const bool top = g > 0.0 && g / (noise * a[i]) - 1.0 >= zhat * (1.0 - kTie);
        if (!top) {
          e[i] = 0.0;
          continue;
        }
        if (first == s.users) first = i;
        lead += g * e[i];
      }
      for (std::size_t i = 0; i < s.users; ++i) {
        const double g = s.uplink_gain(i, t);
        if (target <= 0.0 || g <= 0.0) {
          e[i] = 0.0;
        } else if (lead > 0.0) {
          e[i] *= target / lead;
        } else {
          e[i] = i == first ? target / g : 0.0;
        }
      }
    }
    st.tau[t] = 1.0 - uplink;
    for (std::size_t i = 0; i < s.users; ++i) st.energy(i, t) = e[i];
  }
  return st;
}

Subgradients subgradients(const Scenario& s, const Allocation& alloc) {
  Subgradients g{energy_causality_slack(s, alloc), SlotMatrix(s.users, s.slots)};
  for (std::size_t t = 0; t < s.slots; ++t) {
    for (std::size_t i = 0; i < s.users; ++i) g.psi(i, t) = psi_value(s, alloc, i, t);
  }
  return g;
}

double lagrangian(const Scenario& s, const Allocation& alloc, const DualState& d) {
  double value = objective_bits(s, alloc);
  const Subgradients g = subgradients(s, alloc);
  for (std::size_t i = 0; i < s.users; ++i) {
    for (std::size_t t = 0; t < s.slots; ++t) {
      value += d.lambda(i, t) * g.nu(i, t) + d.mu(i, t) * g.psi(i, t);
    }
  }
  return value;
}

double dual_function(const Scenario& s, const DualState& d) {
  const InnerState inner = inner_maximize(s, d);
  if (inner.unbounded) return kInf;
  return lagrangian(s, inner.allocation(), d);
}

double duality_gap(const Scenario& s, const Allocation& alloc, const DualState& d) {
  return dual_function(s, d) - objective_bits(s, alloc);
}

KktReport kkt_report(const Scenario& s, const Allocation& alloc, const DualState& d) {
  KktReport rep;
  const double edge = 1e-7;
  const SlotMatrix big = suffix_lambda(s, d);
  SlotMatrix max_harvest(s.users, s.slots);
  for (std::size_t i = 0; i < s.users; ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < s.slots; ++t) {
      acc += s.harvest_rate(i, t);
      max_harvest(i, t) = acc;
    }
  }
  std::vector<double> a;
  for (std::size_t t = 0; t < s.slots; ++t) {
    double b = 0.0;
    slot_coefficients(s, d, big, t, a, b);
    double power = 0.0;
    for (std::size_t i = 0; i < s.users; ++i) power += s.uplink_gain(i, t) * alloc.energy(i, t);
    const double uplink = 1.0 - alloc.tau[t];
    const double z = uplink > 0.0 ? power / (s.noise_power * uplink) : 0.0;

    if (uplink > 0.0) {
      const double r = f_z(z) - b;
      if (alloc.tau[t] > edge && alloc.tau[t] < 1.0 - edge) {
        rep.stationarity = std::max(rep.stationarity, std::abs(r));
        ++rep.interior_coordinates;
      } else if (alloc.tau[t] <= edge) {
        rep.boundary = std::max(rep.boundary, -r);
      }
    }
    for (std::size_t i = 0; i < s.users; ++i) {
      const double g = s.uplink_gain(i, t);
      if (g <= 0.0) continue;
      const double r = 1.0 / (1.0 + z) - a[i] * s.noise_power / g;
      if (uplink > 0.0 && alloc.energy(i, t) > edge * max_harvest(i, t)) {
        rep.stationarity = std::max(rep.stationarity, std::abs(r));
        ++rep.interior_coordinates;
      } else {
        rep.boundary = std::max(rep.boundary, r);
      }
    }
  }
  const Subgradients g = subgradients(s, alloc);
  for (std::size_t i = 0; i < s.users; ++i) {
    for (std::size_t t = 0; t < s.slots; ++t) {
      rep.slackness = std::max({rep.slackness, std::abs(d.lambda(i, t) * g.nu(i, t)),
                                std::abs(d.mu(i, t) * g.psi(i, t))});
    }
  }
  rep.primal = std::max(causality_violation(s, alloc), threshold_shortfall(s, alloc));
  return rep;
}

SicdResult solve_sicd(const Scenario& s, const SicdOptions& opt) {
  s.validate();
  SicdResult res;
  SolverReport& rep = res.report;
  const Structure st = analyze(s);

  auto finish = [&](const Allocation& alloc) {
    res.allocation = opt.tamper ? opt.tamper(s, alloc) : alloc;
    res.rates = rates(Decoding::sicd, s, res.allocation);
    rep.causality_violation = causality_violation(s, res.allocation);
    rep.threshold_violation = threshold_violation(Decoding::sicd, s, res.allocation);
  };

  if (st.infeasible) {
    rep.status = SolveStatus::infeasible;
    rep.message = st.reason;
    res.dual = DualState(s.users, s.slots);
    finish(Allocation(s.users, s.slots));
    return res;
  }

  const double escale = harvest_scale(s);
  const bool any_active = std::any_of(st.slot_active.begin(), st.slot_active.end(),
                                      [](char c) { return c != 0; });

  // Subgradient ascent on the dual.
  DualState dual(s.users, s.slots);
  double lambda_scale = 0.0;
  for (std::size_t i = 0; i < s.users; ++i) {
    double peak = 0.0;
    for (std::size_t t = 0; t < s.slots; ++t) peak = std::max(peak, s.harvest_rate(i, t));
    if (peak > 0.0) {
      dual.lambda(i, s.slots - 1) = kLn2 / peak;
      lambda_scale = std::max(lambda_scale, kLn2 / peak);
    }
  }
  double max_threshold = 0.0;
  for (double th : s.threshold) max_threshold = std::max(max_threshold, th);
  const double mu_scale = lambda_scale * escale / (s.noise_power * std::max(1.0, max_threshold));

  DualState best_dual = dual;
  double best_g = kInf;
  Allocation average(s.users, s.slots);
  double weight = 0.0;
  bool done = false;
  Allocation candidate;
  for (int k = 1; any_active && k <= opt.max_subgradient_iterations; ++k) {
    const InnerState inner = inner_maximize(s, dual, opt.inner);
    const Allocation point = inner.allocation();
    const double g_val = inner.unbounded ? kInf : lagrangian(s, point, dual);
    if (g_val < best_g) {
      best_g = g_val;
      best_dual = dual;
    }
    res.dual_trace.push_back(best_g);
    rep.iterations = k;

    const Subgradients sg = subgradients(s, point);
    double nu_max = 0.0;
    double psi_max = 0.0;
    for (double v : sg.nu.values()) nu_max = std::max(nu_max, std::abs(v));
    for (std::size_t i = 0; i < s.users; ++i) {
      if (s.threshold[i] <= 0.0) continue;
      for (std::size_t t = 0; t < s.slots; ++t) psi_max = std::max(psi_max, std::abs(sg.psi(i, t)));
    }
    if (k == 1) {
      dual.step_lambda = nu_max > 0.0 ? opt.first_step_fraction * lambda_scale / nu_max : 0.0;
      dual.step_mu = psi_max > 0.0 ? opt.first_step_fraction * mu_scale / psi_max : 0.0;
    }
    const double root = std::sqrt(static_cast<double>(k));
    const double alpha = dual.step_lambda / root;
    const double beta = dual.step_mu / root;

    // Running primal average weighted by the step sizes.
    weight += alpha;
    const double w = alpha / weight;
    for (std::size_t t = 0; t < s.slots; ++t) average.tau[t] += w * (point.tau[t] - average.tau[t]);
    for (std::size_t q = 0; q < average.energy.values().size(); ++q) {
      average.energy.values()[q] += w * (point.energy.values()[q] - average.energy.values()[q]);
    }
    if (std::isfinite(best_g)) {
      const Allocation fixed = repair(s, average);
      const double value = objective_bits(s, fixed);
      const bool feasible =
          threshold_shortfall(s, fixed) <= opt.violation_tolerance * std::max(1.0, max_threshold);
      if (feasible && best_g - value <= opt.gap_tolerance * std::max(1.0, value)) {
        candidate = fixed;
        done = true;
        break;
      }
    }

    for (std::size_t i = 0; i < s.users; ++i) {
      for (std::size_t t = 0; t < s.slots; ++t) {
        dual.lambda(i, t) = std::max(0.0, dual.lambda(i, t) - alpha * sg.nu(i, t));
        if (s.threshold[i] > 0.0) dual.mu(i, t) = std::max(0.0, dual.mu(i, t) - beta * sg.psi(i, t));
      }
    }
    dual.iteration = k;
  }

  Allocation primal;
  if (done) {
    primal = candidate;
    res.dual = best_dual;
  } else if (!any_active) {
    primal = Allocation(s.users, s.slots);
    primal.tau = st.idle_tau;
    res.dual = DualState(s.users, s.slots);
    complete_dual(s, st, primal, res.dual);
  } else {
    const Recovery rec = recover_primal(s, st);
    rep.newton_steps = rec.newton_steps;
    if (!rec.ok) {
      rep.status = SolveStatus::max_iterations;
      rep.message = rec.message;
      res.dual = best_dual;
      finish(repair(s, average));
      return res;
    }
    primal = rec.allocation;
    res.dual = rec.dual;
    complete_dual(s, st, primal, res.dual);
    double best = dual_function(s, res.dual);
    DualState polished = res.dual;
    for (int round = 0; round < 3; ++round) {
      polished = polish_dual(s, st, primal, polished);
      complete_dual(s, st, primal, polished);
      const double g = dual_function(s, polished);
      if (g < best) {
        best = g;
        res.dual = polished;
      }
    }
    res.recovered = true;
  }
  res.dual.step_lambda = dual.step_lambda;
  res.dual.step_mu = dual.step_mu;
  res.dual.iteration = dual.iteration;

  finish(primal);
  const double value = objective_bits(s, res.allocation);
  rep.objective_trace = {value};
  rep.duality_gap = dual_function(s, res.dual) - value;
  rep.relative_gap = rep.duality_gap / std::max(1.0, value);
  res.kkt = kkt_report(s, res.allocation, res.dual);
  rep.kkt_residual = res.kkt.stationarity;

  const bool gap_ok = std::abs(rep.relative_gap) <= opt.gap_tolerance;
  const bool primal_ok = rep.causality_violation <= opt.violation_tolerance * escale &&
                         threshold_shortfall(s, res.allocation) <=
                             opt.violation_tolerance * std::max(1.0, max_threshold);
  rep.status = gap_ok && primal_ok ? SolveStatus::optimal : SolveStatus::max_iterations;
  if (!gap_ok) rep.message = "duality gap above tolerance";
  if (!primal_ok) rep.message = "primal constraints violated";
  return res;
}

}  // namespace wpnoma::sicd
