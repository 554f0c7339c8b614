#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "crn/errors.hpp"

namespace {

using namespace crn::cli;

void add_common(CLI::App* app, CommonArgs& common) {
  app->add_option("--config", common.config_path, "JSON config file")->required();
  app->add_option("--out", common.out, "output file, - for stdout");
  app->add_option("--mode", common.mode, "override eq_mode")
      ->check(CLI::IsMember({"paper", "physical"}));
  app->add_option("--threads", common.threads, "worker threads, 0 for all cores");
}

void add_sim(CLI::App* app, SimArgs& sim) {
  app->add_option("--slots", sim.slots, "slots per run");
  app->add_option("--seed", sim.seed, "base seed");
  app->add_option("--dominant", sim.dominant, "SU sends dummy packets when empty");
}

int run(int argc, char** argv) {
  CLI::App app{"Stable throughput region of a cognitive relay network"};
  app.require_subcommand(1);

  CommonArgs common;
  RegionArgs region;
  SimArgs sim;
  SweepArgs sweep;
  int k_max = 200;
  std::vector<std::string> sweep_values;

  auto* rates = app.add_subcommand("rates", "solve the relay loading fixed point");
  add_common(rates, common);

  auto* region_cmd = app.add_subcommand("region", "trace lambda_s_max over lambda_p");
  add_common(region_cmd, common);
  region_cmd->add_option("--m", region.m_list, "relay capacities")->delimiter(',');
  region_cmd->add_option("--points", region.points, "grid points per block");
  region_cmd->add_option("--method", region.method, "fixed or closed");

  auto* simulate = app.add_subcommand("simulate", "slotted Monte Carlo simulation");
  add_common(simulate, common);
  add_sim(simulate, sim);
  simulate->add_option("--trials", sim.trials, "independent runs, seeds seed..seed+trials-1");

  auto* oracle = app.add_subcommand("oracle", "exact dominant-system Markov chain");
  add_common(oracle, common);
  oracle->add_option("--kmax", k_max, "initial primary queue truncation");

  auto* compare = app.add_subcommand("compare", "analytic, oracle and simulated rates");
  add_common(compare, common);
  add_sim(compare, sim);
  compare->add_option("--kmax", k_max, "initial primary queue truncation");

  auto* sweep_cmd = app.add_subcommand("sweep", "lambda_p_max against a sensing parameter");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--param", sweep.param, "p_f or p_d")->required();
  sweep_cmd->add_option("--values", sweep_values, "parameter values")
      ->delimiter(',')
      ->required();
  sweep_cmd->add_option("--method", sweep.method, "fixed or closed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  std::string text;
  if (rates->parsed()) {
    text = cmd_rates(common);
  } else if (region_cmd->parsed()) {
    text = cmd_region(common, region);
  } else if (simulate->parsed()) {
    text = cmd_simulate(common, sim);
  } else if (oracle->parsed()) {
    text = cmd_oracle(common, k_max);
  } else if (compare->parsed()) {
    text = cmd_compare(common, sim, k_max);
  } else {
    for (const auto& v : sweep_values) {
      if (v.empty()) continue;
      try {
        std::size_t used = 0;
        sweep.values.push_back(std::stod(v, &used));
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        throw CliError(kUsage, "--values entries must be numbers, got \"" + v + "\"");
      }
    }
    text = cmd_sweep(common, sweep);
  }
  write_output(common.out, text);
  return kOk;
}

int exit_code(const std::exception& e) {
  if (const auto* cli = dynamic_cast<const CliError*>(&e)) return cli->code();
  if (dynamic_cast<const crn::InvalidConfigError*>(&e) ||
      dynamic_cast<const crn::DegenerateError*>(&e)) {
    return kInvalidConfig;
  }
  if (dynamic_cast<const crn::NoSolutionError*>(&e) ||
      dynamic_cast<const crn::InstabilityError*>(&e) ||
      dynamic_cast<const crn::ConvergenceError*>(&e)) {
    return kNoSolution;
  }
  if (dynamic_cast<const crn::TruncationError*>(&e)) return kTruncation;
  if (dynamic_cast<const crn::DomainError*>(&e)) return kUsage;
  return kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  }
}
