#pragma once

// Log-barrier interior-point method for smooth convex programs
//
//   minimize f0(x)  subject to  f_i(x) <= 0,
//
// with damped Newton centering and a geometric barrier schedule. Each
// function reports derivatives on the (usually small) set of variables it
// touches; the Newton system is assembled sparse.

#include <memory>
#include <vector>

#include <Eigen/Core>

namespace wpnoma::opt {

using Vector = Eigen::VectorXd;

struct LocalModel {
  double value = 0.0;
  Eigen::VectorXd gradient;  // indexed like support()
  Eigen::MatrixXd hessian;   // empty for affine functions
};

class Function {
 public:
  virtual ~Function() = default;
  virtual const std::vector<int>& support() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual void model(const Vector& x, LocalModel& out) const = 0;
  virtual bool in_domain(const Vector&) const { return true; }
};

class AffineFunction final : public Function {
 public:
  AffineFunction(std::vector<int> vars, std::vector<double> coeffs, double constant);

  const std::vector<int>& support() const override { return vars_; }
  double value(const Vector& x) const override;
  void model(const Vector& x, LocalModel& out) const override;

 private:
  std::vector<int> vars_;
  std::vector<double> coeffs_;
  double constant_;
};

struct Problem {
  int num_vars = 0;
  std::vector<std::unique_ptr<Function>> objective;    // summed
  std::vector<std::unique_ptr<Function>> constraints;  // each f_i(x) <= 0

  double objective_value(const Vector& x) const;
  double max_constraint(const Vector& x) const;
  bool strictly_feasible(const Vector& x) const;
};

enum class BarrierStatus { optimal, infeasible, max_iterations, unbounded };

struct BarrierOptions {
  double gap_tolerance = 1e-9;    // stop when m / t is below this
  double slackness_tolerance = 1e-9;  // and 1 / t is below this
  double initial_t = 1.0;
  double t_growth = 10.0;
  double centering_tolerance = 1e-12;  // half squared Newton decrement
  int max_newton_steps = 500;
  // Iterates leaving this box are reported as unbounded.
  double unbounded_limit = 1e12;
};

struct BarrierResult {
  BarrierStatus status = BarrierStatus::max_iterations;
  Vector x;
  Vector multipliers;  // one per constraint; see refine_multipliers
  double objective = 0.0;
  double t = 0.0;
  int newton_steps = 0;
};

// max of |grad f0 + sum m_i grad f_i|, |m_i f_i|, f_i^+ and (-m_i)^+.
double kkt_residual(const Problem& problem, const Vector& x, const Vector& multipliers);

// Nonnegative multipliers for a fixed x that jointly minimize the
// stationarity and complementarity residuals in the least-squares sense.
Vector least_squares_multipliers(const Problem& problem, const Vector& x);

// x0 must be strictly feasible. The reported multipliers are the barrier
// estimates 1 / (t * -f_i(x)) or their least-squares refinement, whichever
// has the smaller KKT residual.
BarrierResult minimize(const Problem& problem, const Vector& x0, const BarrierOptions& options);

struct FeasibilityResult {
  bool feasible = false;
  Vector x;
  double max_constraint = 0.0;  // at x; negative when feasible
  int newton_steps = 0;
};

// Phase I: minimize s subject to f_i(x) <= s, stopping as soon as the
// largest constraint value drops below -margin.
FeasibilityResult find_strictly_feasible(const Problem& problem, const Vector& x0,
                                         const BarrierOptions& options, double margin = 1e-3);

// Phase I when x0 is not strictly feasible, then minimize.
BarrierResult solve(const Problem& problem, const Vector& x0, const BarrierOptions& options);

}  // namespace wpnoma::opt
