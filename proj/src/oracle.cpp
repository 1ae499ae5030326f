#include "wpnoma/oracle.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace wpnoma::oracle {

GridResult grid_search(const Scenario& s, Decoding scheme, const GridOptions& opt) {
  s.validate();
  if (opt.resolution < 2) throw OracleError("grid resolution must be at least 2");
  const std::size_t energy_dims = s.users * s.slots;
  if (energy_dims > 4) {
    throw OracleError("grid search refuses K*T = " + std::to_string(energy_dims) + " > 4");
  }
  const bool fixed_tau = !opt.tau.empty();
  if (fixed_tau && opt.tau.size() != s.slots) throw OracleError("tau must have one entry per slot");
  const std::size_t dims = energy_dims + (fixed_tau ? 0 : s.slots);

  const auto res = static_cast<std::size_t>(opt.resolution);
  double total = 1.0;
  for (std::size_t d = 0; d < dims; ++d) total *= static_cast<double>(res);
  if (total > static_cast<double>(opt.max_evaluations)) {
    throw OracleError("grid of " + std::to_string(total) + " points exceeds the evaluation budget");
  }

  std::vector<double> level(res);
  for (std::size_t k = 0; k < res; ++k) level[k] = static_cast<double>(k) / static_cast<double>(res - 1);

  GridResult best;
  best.objective = -std::numeric_limits<double>::infinity();
  best.allocation = Allocation(s.users, s.slots);
  std::vector<std::size_t> index(dims, 0);
  Allocation a(s.users, s.slots);
  for (;;) {
    std::size_t d = 0;
    for (std::size_t t = 0; t < s.slots; ++t) a.tau[t] = fixed_tau ? opt.tau[t] : level[index[d++]];
    for (std::size_t i = 0; i < s.users; ++i) {
      double bank = 0.0;
      for (std::size_t t = 0; t < s.slots; ++t) {
        bank += s.harvest_rate(i, t) * a.tau[t];
        const double e = a.tau[t] < 1.0 ? level[index[d]] * bank : 0.0;
        ++d;
        a.energy(i, t) = e;
        bank -= e;
      }
    }
    ++best.evaluations;
    if (threshold_violation(scheme, s, a) <= 1e-12) {
      const double value = sum_throughput(scheme, s, a);
      if (value > best.objective) {
        best.objective = value;
        best.allocation = a;
        best.feasible = true;
      }
    }

    std::size_t k = 0;
    while (k < dims && ++index[k] == res) index[k++] = 0;
    if (k == dims) break;
  }
  if (!best.feasible) best.objective = 0.0;
  return best;
}

std::vector<double> finite_diff_gradient(const ScalarFn& fn, std::span<const double> point, double h) {
  if (!(h > 0.0)) throw OracleError("finite-difference step must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const double up = fn(x);
    x[k] = x0 - h;
    const double down = fn(x);
    x[k] = x0;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

ProbeResult concavity_probe(const ScalarFn& fn, const Sampler& sampler, int samples,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> weight(0.0, 1.0);
  ProbeResult out;
  out.worst_violation = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < samples; ++n) {
    const std::vector<double> x = sampler(rng);
    const std::vector<double> y = sampler(rng);
    if (x.size() != y.size()) throw OracleError("sampler returned points of different size");
    double alpha = weight(rng);
    if (alpha <= 0.0) alpha = 0.5;
    std::vector<double> mid(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) mid[k] = alpha * x[k] + (1.0 - alpha) * y[k];
    const double v = alpha * fn(x) + (1.0 - alpha) * fn(y) - fn(mid);
    ++out.samples;
    if (v > out.worst_violation) {
      out.worst_violation = v;
      out.x = x;
      out.y = y;
      out.alpha = alpha;
    }
  }
  if (out.samples == 0) out.worst_violation = 0.0;
  return out;
}

}  // namespace wpnoma::oracle
