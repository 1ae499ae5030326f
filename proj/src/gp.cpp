#include "wpnoma/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wpnoma::gp {

namespace {

// log sum_k exp(b_k + a_k . u) over a shared support.
class LogSumExp final : public opt::Function {
 public:
  LogSumExp(std::vector<int> vars, Eigen::MatrixXd exps, Eigen::VectorXd logc)
      : vars_(std::move(vars)), a_(std::move(exps)), b_(std::move(logc)) {}

  const std::vector<int>& support() const override { return vars_; }

  double value(const opt::Vector& u) const override {
    const Eigen::VectorXd z = exponents(u);
    const double top = z.maxCoeff();
    return top + std::log((z.array() - top).exp().sum());
  }

  void model(const opt::Vector& u, opt::LocalModel& out) const override {
    const Eigen::VectorXd z = exponents(u);
    const double top = z.maxCoeff();
    Eigen::VectorXd w = (z.array() - top).exp();
    const double total = w.sum();
    w /= total;
    out.value = top + std::log(total);
    out.gradient = a_.transpose() * w;
    if (a_.rows() == 1) {
      out.hessian.resize(0, 0);
      return;
    }
    out.hessian = a_.transpose() * w.asDiagonal() * a_ - out.gradient * out.gradient.transpose();
  }

 private:
  Eigen::VectorXd exponents(const opt::Vector& u) const {
    Eigen::VectorXd local(static_cast<Eigen::Index>(vars_.size()));
    for (std::size_t k = 0; k < vars_.size(); ++k) local[static_cast<Eigen::Index>(k)] = u[vars_[k]];
    return b_ + a_ * local;
  }

  std::vector<int> vars_;
  Eigen::MatrixXd a_;  // terms x support
  Eigen::VectorXd b_;
};

// scale[v] multiplies variable v before taking logs; empty means 1.
std::unique_ptr<opt::Function> transform(const Posynomial& p, std::span<const double> scale) {
  std::map<int, int> slot;
  for (const Monomial& m : p.terms) {
    for (const auto& [v, _] : m.exponents) slot.emplace(v, 0);
  }
  std::vector<int> vars;
  for (auto& [v, k] : slot) {
    k = static_cast<int>(vars.size());
    vars.push_back(v);
  }
  const auto rows = static_cast<Eigen::Index>(p.terms.size());
  const auto cols = static_cast<Eigen::Index>(vars.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd b(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Monomial& m = p.terms[static_cast<std::size_t>(r)];
    double logc = std::log(m.coefficient);
    for (const auto& [v, e] : m.exponents) {
      a(r, slot.at(v)) = e;
      if (!scale.empty()) logc += e * std::log(scale[static_cast<std::size_t>(v)]);
    }
    b[r] = logc;
  }
  if (rows == 1) {
    std::vector<double> coeffs(a.data(), a.data() + cols);
    return std::make_unique<opt::AffineFunction>(std::move(vars), std::move(coeffs), b[0]);
  }
  return std::make_unique<LogSumExp>(std::move(vars), std::move(a), std::move(b));
}

opt::Problem transform(const GpProgram& gp, std::span<const double> scale) {
  opt::Problem p;
  p.num_vars = gp.num_vars;
  p.objective.push_back(transform(gp.objective, scale));
  for (const Posynomial& c : gp.constraints) p.constraints.push_back(transform(c, scale));
  return p;
}

GpStatus map_status(opt::BarrierStatus s) {
  switch (s) {
    case opt::BarrierStatus::optimal: return GpStatus::optimal;
    case opt::BarrierStatus::infeasible: return GpStatus::infeasible;
    case opt::BarrierStatus::unbounded: return GpStatus::dual_infeasible;
    case opt::BarrierStatus::max_iterations: break;
  }
  return GpStatus::max_iterations;
}

// log p and its gradient with respect to log x.
double log_posy(const Posynomial& p, std::span<const double> x, std::vector<double>& grad) {
  std::vector<double> logs;
  logs.reserve(p.terms.size());
  for (const Monomial& m : p.terms) {
    double l = std::log(m.coefficient);
    for (const auto& [v, e] : m.exponents) l += e * std::log(x[static_cast<std::size_t>(v)]);
    logs.push_back(l);
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  for (double& l : logs) {
    l = std::exp(l - top);
    total += l;
  }
  for (std::size_t k = 0; k < p.terms.size(); ++k) {
    for (const auto& [v, e] : p.terms[k].exponents) {
      grad[static_cast<std::size_t>(v)] += e * logs[k] / total;
    }
  }
  return top + std::log(total);
}

}  // namespace

Monomial::Monomial(double c, std::map<int, double> e) : coefficient(c), exponents(std::move(e)) {}

Monomial operator*(const Monomial& a, const Monomial& b) {
  Monomial m(a.coefficient * b.coefficient, a.exponents);
  for (const auto& [v, e] : b.exponents) m.exponents[v] += e;
  return m;
}

Posynomial::Posynomial(Monomial m) { terms.push_back(std::move(m)); }

Posynomial::Posynomial(std::vector<Monomial> t) : terms(std::move(t)) {}

Posynomial& Posynomial::operator+=(const Monomial& m) {
  terms.push_back(m);
  return *this;
}

void GpProgram::validate() const {
  if (num_vars < 0) throw GpError("negative variable count");
  auto check = [this](const Posynomial& p) {
    if (p.terms.empty()) throw GpError("posynomial without terms");
    for (const Monomial& m : p.terms) {
      if (!(m.coefficient > 0.0) || !std::isfinite(m.coefficient)) {
        throw GpError("monomial coefficients must be positive and finite");
      }
      for (const auto& [v, e] : m.exponents) {
        if (v < 0 || v >= num_vars) throw GpError("variable id out of range");
        if (!std::isfinite(e)) throw GpError("exponents must be finite");
      }
    }
  };
  check(objective);
  for (const Posynomial& c : constraints) check(c);
}

const char* to_string(GpStatus s) {
  switch (s) {
    case GpStatus::optimal: return "optimal";
    case GpStatus::infeasible: return "infeasible";
    case GpStatus::max_iterations: return "max_iter";
    case GpStatus::dual_infeasible: return "dual_infeasible";
  }
  return "unknown";
}

double eval(const Monomial& m, std::span<const double> x) {
  double v = m.coefficient;
  for (const auto& [id, e] : m.exponents) {
    const auto k = static_cast<std::size_t>(id);
    if (k >= x.size()) throw GpError("variable id out of range");
    if (!(x[k] > 0.0)) throw GpError("GP variables must be positive");
    v *= std::pow(x[k], e);
  }
  return v;
}

double eval(const Posynomial& p, std::span<const double> x) {
  double acc = 0.0;
  for (const Monomial& m : p.terms) acc += eval(m, x);
  return acc;
}

std::unique_ptr<opt::Function> log_transform(const Posynomial& p) {
  if (p.terms.empty()) throw GpError("posynomial without terms");
  return transform(p, {});
}

opt::Problem log_transform(const GpProgram& gp) {
  gp.validate();
  return transform(gp, {});
}

GpSolution solve_gp(const GpProgram& gp, std::span<const double> init, const GpOptions& options) {
  gp.validate();
  if (init.size() != static_cast<std::size_t>(gp.num_vars)) {
    throw GpError("initial point has the wrong dimension");
  }
  for (double v : init) {
    if (!(v > 0.0) || !std::isfinite(v)) throw GpError("initial point must be positive");
  }

  const opt::Problem problem = transform(gp, init);
  opt::BarrierOptions bo;
  const double m = static_cast<double>(gp.constraints.size());
  bo.slackness_tolerance = 0.1 * options.tolerance;
  bo.gap_tolerance = std::max(1.0, m) * 0.1 * options.tolerance;
  bo.max_newton_steps = options.max_newton_steps;
  bo.unbounded_limit = 600.0;

  GpSolution sol;
  opt::BarrierResult r = opt::solve(problem, opt::Vector::Zero(gp.num_vars), bo);
  sol.newton_steps = r.newton_steps;
  sol.status = map_status(r.status);

  auto finish = [&](const opt::BarrierResult& res) {
    sol.values.resize(init.size());
    for (std::size_t v = 0; v < init.size(); ++v) {
      sol.values[v] = init[v] * std::exp(res.x[static_cast<Eigen::Index>(v)]);
    }
    sol.multipliers.assign(res.multipliers.data(), res.multipliers.data() + res.multipliers.size());
    sol.multipliers.resize(gp.constraints.size(), 0.0);
    const bool positive = std::all_of(sol.values.begin(), sol.values.end(), [](double v) { return v > 0.0; });
    sol.objective_value = positive ? eval(gp.objective, sol.values) : 0.0;
    sol.kkt_residual = positive ? kkt_residual(gp, sol.values, sol.multipliers)
                                : std::numeric_limits<double>::infinity();
  };
  finish(r);

  // Tighten the barrier while the residual is above tolerance.
  for (int round = 0; sol.status == GpStatus::optimal && sol.kkt_residual > options.tolerance;
       ++round) {
    if (round == 4 || sol.newton_steps >= options.max_newton_steps) {
      sol.status = GpStatus::max_iterations;
      break;
    }
    bo.initial_t = r.t * bo.t_growth;
    bo.slackness_tolerance *= 0.1;
    bo.gap_tolerance *= 0.1;
    bo.max_newton_steps = options.max_newton_steps - sol.newton_steps;
    r = opt::minimize(problem, r.x, bo);
    sol.newton_steps += r.newton_steps;
    sol.status = map_status(r.status);
    finish(r);
  }
  return sol;
}

double kkt_residual(const GpProgram& gp, std::span<const double> x,
                    std::span<const double> multipliers) {
  if (multipliers.size() != gp.constraints.size()) {
    throw GpError("one multiplier per constraint expected");
  }
  for (double v : x) {
    if (!(v > 0.0)) throw GpError("GP variables must be positive");
  }
  std::vector<double> stationarity(static_cast<std::size_t>(gp.num_vars), 0.0);
  log_posy(gp.objective, x, stationarity);
  double worst = 0.0;
  for (std::size_t k = 0; k < gp.constraints.size(); ++k) {
    std::vector<double> g(stationarity.size(), 0.0);
    const double f = log_posy(gp.constraints[k], x, g);
    const double lam = multipliers[k];
    for (std::size_t v = 0; v < g.size(); ++v) stationarity[v] += lam * g[v];
    worst = std::max({worst, std::abs(lam * f), std::max(f, 0.0), std::max(-lam, 0.0)});
  }
  for (double s : stationarity) worst = std::max(worst, std::abs(s));
  return worst;
}

}  // namespace wpnoma::gp
