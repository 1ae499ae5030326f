#include "wpnoma/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace wpnoma::opt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// f(x) - x[slack], used by phase I.
class ShiftedFunction final : public Function {
 public:
  ShiftedFunction(const Function& base, int slack) : base_(base), slack_(slack) {
    vars_ = base.support();
    vars_.push_back(slack);
  }

  const std::vector<int>& support() const override { return vars_; }
  double value(const Vector& x) const override { return base_.value(x) - x[slack_]; }
  bool in_domain(const Vector& x) const override { return base_.in_domain(x); }

  void model(const Vector& x, LocalModel& out) const override {
    LocalModel inner;
    base_.model(x, inner);
    const auto n = static_cast<Eigen::Index>(vars_.size());
    out.value = inner.value - x[slack_];
    out.gradient.resize(n);
    out.gradient.head(n - 1) = inner.gradient;
    out.gradient[n - 1] = -1.0;
    if (inner.hessian.size() == 0) {
      out.hessian.resize(0, 0);
    } else {
      out.hessian = Eigen::MatrixXd::Zero(n, n);
      out.hessian.topLeftCorner(n - 1, n - 1) = inner.hessian;
    }
  }

 private:
  const Function& base_;
  int slack_;
  std::vector<int> vars_;
};

// Views the objective and constraints of a problem without owning them.
struct ProblemView {
  int num_vars;
  std::vector<const Function*> objective;
  std::vector<const Function*> constraints;

  double objective_value(const Vector& x) const {
    double acc = 0.0;
    for (const Function* f : objective) acc += f->value(x);
    return acc;
  }
};

ProblemView view_of(const Problem& p) {
  ProblemView v{p.num_vars, {}, {}};
  for (const auto& f : p.objective) v.objective.push_back(f.get());
  v.constraints.reserve(p.constraints.size());
  for (const auto& c : p.constraints) v.constraints.push_back(c.get());
  return v;
}

bool admissible(const ProblemView& p, const Vector& x) {
  if (!x.allFinite()) return false;
  for (const Function* f : p.objective) {
    if (!f->in_domain(x)) return false;
  }
  for (const Function* c : p.constraints) {
    if (!c->in_domain(x)) return false;
    const double v = c->value(x);
    if (!(v < 0.0)) return false;
  }
  return true;
}

double barrier_value(const ProblemView& p, const Vector& x, double t) {
  double acc = t * p.objective_value(x);
  for (const Function* c : p.constraints) acc -= std::log(-c->value(x));
  return acc;
}

void scatter(const Function& f, const LocalModel& m, double wg, double wh, double wo, Vector& grad,
             std::vector<Eigen::Triplet<double>>& triplets) {
  const auto& vars = f.support();
  const auto n = static_cast<Eigen::Index>(vars.size());
  for (Eigen::Index a = 0; a < n; ++a) grad[vars[a]] += wg * m.gradient[a];
  const bool curved = m.hessian.size() != 0;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      double h = wo * m.gradient[a] * m.gradient[b];
      if (curved) h += wh * m.hessian(a, b);
      if (h != 0.0) triplets.emplace_back(vars[a], vars[b], h);
    }
  }
}

struct CenteringOutcome {
  bool converged = false;
  bool unbounded = false;
  int steps = 0;
};

// Damped Newton on t f0(x) - sum log(-f_i(x)). `stop` may end the loop early.
template <typename StopFn>
CenteringOutcome center(const ProblemView& p, Vector& x, double t, const BarrierOptions& opt,
                        int step_budget, StopFn&& stop) {
  CenteringOutcome out;
  const int n = p.num_vars;
  LocalModel m;
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::SparseMatrix<double> hess(n, n);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  double previous = std::numeric_limits<double>::infinity();

  while (out.steps < step_budget) {
    Vector grad = Vector::Zero(n);
    triplets.clear();
    for (const Function* f : p.objective) {
      f->model(x, m);
      scatter(*f, m, t, t, 0.0, grad, triplets);
    }
    for (const Function* c : p.constraints) {
      c->model(x, m);
      const double w = 1.0 / (-m.value);
      scatter(*c, m, w, w, w * w, grad, triplets);
    }
    hess.setFromTriplets(triplets.begin(), triplets.end());
    double diag = 0.0;
    for (int k = 0; k < n; ++k) diag = std::max(diag, std::abs(hess.coeff(k, k)));
    double ridge = 1e-14 * (1.0 + diag);

    Vector step;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::SparseMatrix<double> reg = hess;
      for (int k = 0; k < n; ++k) reg.coeffRef(k, k) += ridge;
      ldlt.compute(reg);
      if (ldlt.info() == Eigen::Success) {
        step = ldlt.solve(-grad);
        if (ldlt.info() == Eigen::Success && step.allFinite()) break;
      }
      step.resize(0);
      ridge *= 100.0;
    }
    ++out.steps;
    if (step.size() == 0) return out;

    const double decrement = -grad.dot(step);
    const double phi = barrier_value(p, x, t);
    if (decrement / 2.0 <= opt.centering_tolerance) {
      out.converged = true;
      return out;
    }

    // Close to the center full steps are safe and phi differences are
    // rounding noise, so progress is judged by the decrement alone.
    double s = 1.0;
    Vector trial;
    bool accepted = false;
    if (decrement < 0.1) {
      if (decrement >= 0.5 * previous) {
        out.converged = true;
        return out;
      }
      trial = x + step;
      accepted = admissible(p, trial);
    }
    previous = decrement < 0.1 ? decrement : std::numeric_limits<double>::infinity();
    for (int k = 0; !accepted && k < 80; ++k, s *= 0.5) {
      trial = x + s * step;
      if (!admissible(p, trial)) continue;
      accepted = barrier_value(p, trial, t) <= phi - 0.01 * s * decrement;
    }
    if (!accepted) {
      // No representable decrease left: treat as centered.
      out.converged = true;
      return out;
    }
    x = trial;
    if (stop(x)) {
      out.converged = true;
      return out;
    }
    if (x.lpNorm<Eigen::Infinity>() > opt.unbounded_limit) {
      out.unbounded = true;
      return out;
    }
  }
  return out;
}

}  // namespace

AffineFunction::AffineFunction(std::vector<int> vars, std::vector<double> coeffs, double constant)
    : vars_(std::move(vars)), coeffs_(std::move(coeffs)), constant_(constant) {}

double AffineFunction::value(const Vector& x) const {
  double acc = constant_;
  for (std::size_t k = 0; k < vars_.size(); ++k) acc += coeffs_[k] * x[vars_[k]];
  return acc;
}

void AffineFunction::model(const Vector& x, LocalModel& out) const {
  out.value = value(x);
  out.gradient = Eigen::Map<const Eigen::VectorXd>(coeffs_.data(),
                                                   static_cast<Eigen::Index>(coeffs_.size()));
  out.hessian.resize(0, 0);
}

double Problem::objective_value(const Vector& x) const { return view_of(*this).objective_value(x); }

double Problem::max_constraint(const Vector& x) const {
  double worst = -kInf;
  for (const auto& c : constraints) worst = std::max(worst, c->value(x));
  return worst;
}

bool Problem::strictly_feasible(const Vector& x) const { return admissible(view_of(*this), x); }

double kkt_residual(const Problem& problem, const Vector& x, const Vector& multipliers) {
  const Eigen::Index n = problem.num_vars;
  Vector stationarity = Vector::Zero(n);
  LocalModel m;
  auto add = [&](const Function& f, double w) {
    f.model(x, m);
    const auto& vars = f.support();
    for (std::size_t k = 0; k < vars.size(); ++k) {
      stationarity[vars[k]] += w * m.gradient[static_cast<Eigen::Index>(k)];
    }
    return m.value;
  };
  for (const auto& f : problem.objective) add(*f, 1.0);
  double worst = 0.0;
  for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
    const double lam = multipliers[static_cast<Eigen::Index>(k)];
    const double v = add(*problem.constraints[k], lam);
    worst = std::max({worst, std::abs(lam * v), std::max(v, 0.0), std::max(-lam, 0.0)});
  }
  return n > 0 ? std::max(worst, stationarity.lpNorm<Eigen::Infinity>()) : worst;
}

Vector least_squares_multipliers(const Problem& problem, const Vector& x) {
  const Eigen::Index n = problem.num_vars;
  const auto rows = static_cast<Eigen::Index>(problem.constraints.size());
  Vector rhs = Vector::Zero(n + rows);
  LocalModel m;
  for (const auto& f : problem.objective) {
    f->model(x, m);
    const auto& vars = f->support();
    for (std::size_t k = 0; k < vars.size(); ++k) rhs[vars[k]] -= m.gradient[static_cast<Eigen::Index>(k)];
  }
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index k = 0; k < rows; ++k) {
    const Function& c = *problem.constraints[static_cast<std::size_t>(k)];
    c.model(x, m);
    const auto& vars = c.support();
    for (std::size_t q = 0; q < vars.size(); ++q) {
      const double g = m.gradient[static_cast<Eigen::Index>(q)];
      if (g != 0.0) triplets.emplace_back(vars[q], k, g);
    }
    triplets.emplace_back(n + k, k, m.value);
  }
  Eigen::SparseMatrix<double> a(n + rows, rows);
  a.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SparseMatrix<double> normal = a.transpose() * a;
  double diag = 0.0;
  for (Eigen::Index k = 0; k < rows; ++k) diag = std::max(diag, normal.coeff(k, k));
  for (Eigen::Index k = 0; k < rows; ++k) normal.coeffRef(k, k) += 1e-14 * (1.0 + diag);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(normal);
  Vector lam = Vector::Zero(rows);
  if (ldlt.info() != Eigen::Success) return lam;
  const Vector sol = ldlt.solve(a.transpose() * rhs);
  if (ldlt.info() != Eigen::Success || !sol.allFinite()) return lam;
  return sol.cwiseMax(0.0);
}

BarrierResult minimize(const Problem& problem, const Vector& x0, const BarrierOptions& opt) {
  const ProblemView p = view_of(problem);
  BarrierResult r;
  r.x = x0;
  const double m = static_cast<double>(p.constraints.size());
  double t = opt.initial_t;
  while (true) {
    const auto outcome = center(p, r.x, t, opt, opt.max_newton_steps - r.newton_steps,
                                [](const Vector&) { return false; });
    r.newton_steps += outcome.steps;
    if (outcome.unbounded) {
      r.status = BarrierStatus::unbounded;
      break;
    }
    if (!outcome.converged) {
      r.status = BarrierStatus::max_iterations;
      break;
    }
    if (m == 0.0 || (m / t <= opt.gap_tolerance && 1.0 / t <= opt.slackness_tolerance)) {
      r.status = BarrierStatus::optimal;
      break;
    }
    t *= opt.t_growth;
  }
  r.t = t;
  r.objective = p.objective_value(r.x);
  r.multipliers.resize(static_cast<Eigen::Index>(p.constraints.size()));
  for (std::size_t k = 0; k < p.constraints.size(); ++k) {
    r.multipliers[static_cast<Eigen::Index>(k)] = 1.0 / (t * -p.constraints[k]->value(r.x));
  }
  if (r.status == BarrierStatus::optimal && !problem.constraints.empty()) {
    Vector refined = least_squares_multipliers(problem, r.x);
    if (kkt_residual(problem, r.x, refined) < kkt_residual(problem, r.x, r.multipliers)) {
      r.multipliers = std::move(refined);
    }
  }
  return r;
}

FeasibilityResult find_strictly_feasible(const Problem& problem, const Vector& x0,
                                         const BarrierOptions& opt, double margin) {
  FeasibilityResult r;
  r.x = x0;
  r.max_constraint = problem.max_constraint(x0);
  if (r.max_constraint < -margin) {
    r.feasible = true;
    return r;
  }

  const int n = problem.num_vars;
  const int slack = n;
  std::vector<std::unique_ptr<ShiftedFunction>> shifted;
  ProblemView p{n + 1, {}, {}};
  AffineFunction objective({slack}, {1.0}, 0.0);
  p.objective.push_back(&objective);
  for (const auto& c : problem.constraints) {
    shifted.push_back(std::make_unique<ShiftedFunction>(*c, slack));
    p.constraints.push_back(shifted.back().get());
  }
  // Keeps phase I bounded when the constraints can all be driven to -inf.
  AffineFunction floor({slack}, {-1.0}, -std::max(1.0, 10.0 * margin));
  p.constraints.push_back(&floor);

  Vector z(n + 1);
  z.head(n) = x0;
  z[slack] = std::max(r.max_constraint, 0.0) + 1.0;

  auto done = [&](const Vector& v) { return problem.max_constraint(v.head(n)) < -margin; };
  const double m = static_cast<double>(p.constraints.size());
  double t = opt.initial_t;
  while (true) {
    const auto outcome = center(p, z, t, opt, opt.max_newton_steps - r.newton_steps, done);
    r.newton_steps += outcome.steps;
    const Vector x = z.head(n);
    r.max_constraint = problem.max_constraint(x);
    if (r.max_constraint < -margin || outcome.unbounded) break;
    if (!outcome.converged) break;
    // Lower bound on the optimal slack from the duality gap of phase I.
    if (z[slack] - m / t > 0.0) break;
    if (m / t <= opt.gap_tolerance) break;
    t *= opt.t_growth;
  }
  r.x = z.head(n);
  r.max_constraint = problem.max_constraint(r.x);
  r.feasible = r.max_constraint < 0.0 && problem.strictly_feasible(r.x);
  return r;
}

BarrierResult solve(const Problem& problem, const Vector& x0, const BarrierOptions& opt) {
  Vector start = x0;
  int steps = 0;
  if (!problem.strictly_feasible(x0)) {
    const FeasibilityResult phase1 = find_strictly_feasible(problem, x0, opt);
    steps = phase1.newton_steps;
    if (!phase1.feasible) {
      BarrierResult r;
      r.status = BarrierStatus::infeasible;
      r.x = phase1.x;
      r.newton_steps = steps;
      r.objective = problem.objective_value(phase1.x);
      return r;
    }
    start = phase1.x;
  }
  BarrierOptions rest = opt;
  rest.max_newton_steps = std::max(1, opt.max_newton_steps - steps);
  BarrierResult r = minimize(problem, start, rest);
  r.newton_steps += steps;
  return r;
}

}  // namespace wpnoma::opt
