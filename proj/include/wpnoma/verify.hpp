#pragma once

// Oracle suite behind `wpnoma verify`.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wpnoma/model.hpp"
#include "wpnoma/oracle.hpp"

namespace wpnoma::verify {

enum class Level { quick, full };

// Throws std::invalid_argument on unknown names.
Level parse_level(std::string_view name);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  Level level = Level::quick;
  std::uint64_t seed = oracle::kDefaultSeed;
  // Applied to every SICD allocation the suite checks; test-only fault hook.
  std::function<Allocation(const Scenario&, const Allocation&)> tamper;
};

// Quick runs 10^3 random samples and 100-point grids; full runs 10^4
// samples and 200-point grids.
std::vector<Check> run_checks(const VerifyOptions& options);

void print_table(std::ostream& out, std::span<const Check> checks);

// Prints the table; 0 when every check passed, 1 otherwise.
int cmd_verify(const VerifyOptions& options, std::ostream& out);

}  // namespace wpnoma::verify
