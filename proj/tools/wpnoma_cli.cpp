// wpnoma solve | sweep | verify

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wpnoma/experiment.hpp"
#include "wpnoma/verify.hpp"

int main(int argc, char** argv) {
  namespace ex = wpnoma::experiment;
  CLI::App app{"Sum-throughput optimization for wireless-powered NOMA"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string scheme = "sicd";
  auto* solve = app.add_subcommand("solve", "Solve one scenario and write a CSV report");
  solve->add_option("--config", config, "Scenario JSON file")->required();
  solve->add_option("--scheme", scheme, "lcd or sicd")->check(CLI::IsMember({"lcd", "sicd"}));
  solve->add_option("--out", out, "Output CSV")->required();

  std::string axis;
  double from = 0.0;
  double to = 0.0;
  int steps = 0;
  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter and write a CSV table");
  sweep->add_option("--config", config, "Scenario JSON file")->required();
  sweep->add_option("--axis", axis, "s_th (dB), d_er_ap (m) or k")
      ->required()
      ->check(CLI::IsMember({"s_th", "d_er_ap", "k"}));
  sweep->add_option("--from", from, "First axis value")->required();
  sweep->add_option("--to", to, "Last axis value")->required();
  sweep->add_option("--steps", steps, "Number of points")->required()->check(CLI::PositiveNumber);
  sweep->add_option("--out", out, "Output CSV")->required();
  sweep->footer(std::string("Worker threads: ") + ex::kWorkersEnv + " (default: hardware threads)");

  std::string level = "quick";
  auto* verify = app.add_subcommand("verify", "Run the oracle suite");
  verify->add_option("--level", level, "quick or full")->check(CLI::IsMember({"quick", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*solve) return ex::cmd_solve(config, ex::parse_scheme(scheme), out, std::cerr);
  if (*sweep) return ex::cmd_sweep(config, ex::parse_axis(axis), from, to, steps, out, std::cerr);
  wpnoma::verify::VerifyOptions options;
  options.level = wpnoma::verify::parse_level(level);
  return wpnoma::verify::cmd_verify(options, std::cout);
}
