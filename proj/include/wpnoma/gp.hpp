#pragma once

// Geometric programs in standard form
//
//   minimize p0(x)  subject to  p_k(x) <= 1,  x > 0,
//
// with posynomials p_k. Solved in log space (x = x0 * exp(u)) with the
// barrier method from barrier.hpp.

#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "wpnoma/barrier.hpp"

namespace wpnoma::gp {

class GpError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Monomial {
  double coefficient = 1.0;
  std::map<int, double> exponents;  // variable id -> power

  Monomial() = default;
  Monomial(double c, std::map<int, double> e = {});
};

Monomial operator*(const Monomial& a, const Monomial& b);

struct Posynomial {
  std::vector<Monomial> terms;

  Posynomial() = default;
  Posynomial(Monomial m);  // NOLINT: a monomial is a one-term posynomial
  Posynomial(std::vector<Monomial> t);

  Posynomial& operator+=(const Monomial& m);
  bool is_monomial() const { return terms.size() == 1; }
};

struct GpProgram {
  int num_vars = 0;
  Posynomial objective;
  std::vector<Posynomial> constraints;  // each <= 1

  // Throws GpError on empty posynomials, nonpositive coefficients or
  // variable ids outside [0, num_vars).
  void validate() const;
};

enum class GpStatus { optimal, infeasible, max_iterations, dual_infeasible };

const char* to_string(GpStatus s);

struct GpSolution {
  GpStatus status = GpStatus::max_iterations;
  std::vector<double> values;
  double objective_value = 0.0;
  std::vector<double> multipliers;  // log-space, one per constraint
  double kkt_residual = 0.0;
  int newton_steps = 0;
};

struct GpOptions {
  double tolerance = 1e-8;
  int max_newton_steps = 500;
};

double eval(const Monomial& m, std::span<const double> x);
double eval(const Posynomial& p, std::span<const double> x);

// log p(exp(u)); a log-sum-exp of affine forms, or affine for a monomial.
std::unique_ptr<opt::Function> log_transform(const Posynomial& p);

// Convex program in u = log x: minimize log p0 subject to log p_k <= 0.
opt::Problem log_transform(const GpProgram& gp);

GpSolution solve_gp(const GpProgram& gp, std::span<const double> init,
                    const GpOptions& options = {});

// Max of stationarity, |lambda_k log p_k|, (log p_k)^+ and (-lambda_k)^+
// for the log-space program.
double kkt_residual(const GpProgram& gp, std::span<const double> x,
                    std::span<const double> multipliers);

}  // namespace wpnoma::gp
