#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "crn/analytic.hpp"
#include "crn/config_io.hpp"
#include "crn/errors.hpp"
#include "crn/oracle.hpp"
#include "crn/parallel.hpp"
#include "crn/sim.hpp"

#ifndef CRN_VERSION
#define CRN_VERSION "0.0.0"
#endif

namespace crn::cli {

namespace {

SystemConfig resolve_config(const CommonArgs& common) {
  auto config = load_config(common.config_path);
  if (!common.mode.empty()) config.eq_mode = eq_mode_from_string(common.mode);
  require_valid(config);
  return config;
}

RunManifest make_manifest(const char* subcommand, const CommonArgs& common,
                          const SystemConfig& config) {
  RunManifest m;
  m.subcommand = subcommand;
  m.config_path = common.config_path;
  m.config = config;
  m.output_path = common.out.empty() ? "-" : common.out;
  m.version = CRN_VERSION;
  m.timestamp = current_timestamp();
  return m;
}

std::string dump(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

analytic::BoundaryMethod parse_method(const std::string& name) {
  if (name == "fixed") return analytic::BoundaryMethod::FixedPoint;
  if (name == "closed") return analytic::BoundaryMethod::PaperClosedForm;
  throw CliError(kUsage, fmt::format("--method must be fixed or closed, got \"{}\"", name));
}

nlohmann::json rate_solution_json(const analytic::RateSolution& r) {
  return {{"rho_ps", json_num(r.rho_ps)},
          {"mu_p", json_num(r.mu_p)},
          {"lambda_ps", json_num(r.lambda_ps)},
          {"mu_ps", json_num(r.mu_ps)},
          {"mu_s", json_num(r.mu_s)},
          {"p_block", json_num(r.p_block)},
          {"p_empty", json_num(r.p_empty)},
          {"primary_stable", r.primary_stable},
          {"secondary_stable", r.secondary_stable},
          {"residual", json_num(r.residual)},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"relay_saturated", r.relay_saturated}};
}

nlohmann::json estimate_json(const sim::RateEstimate& e) {
  return {{"value", json_num(e.value)},
          {"half_width", json_num(e.half_width)},
          {"iid_half_width", json_num(e.iid_half_width)},
          {"trials", e.trials},
          {"successes", e.successes}};
}

nlohmann::json num_array(const std::vector<double>& values) {
  auto out = nlohmann::json::array();
  for (double v : values) out.push_back(json_num(v));
  return out;
}

nlohmann::json counters_json(const sim::Counters& k) {
  return {{"pu_arrivals", k.pu_arrivals},
          {"pu_attempts", k.pu_attempts},
          {"pu_direct_successes", k.pu_direct_successes},
          {"relay_admissions", k.relay_admissions},
          {"relay_opportunities", k.relay_opportunities},
          {"relay_busy_slots", k.relay_busy_slots},
          {"relay_successes", k.relay_successes},
          {"su_opportunities", k.su_opportunities},
          {"su_service_successes", k.su_service_successes},
          {"su_arrivals", k.su_arrivals},
          {"su_departures", k.su_departures},
          {"collisions", k.collisions},
          {"final_qp", k.final_qp},
          {"final_qps", k.final_qps},
          {"final_qs", k.final_qs}};
}

nlohmann::json simulation_json(const sim::SimulationResult& r) {
  return {{"seed", r.seed},
          {"slots", r.slots},
          {"dominant", r.dominant},
          {"emp_mu_p", estimate_json(r.emp_mu_p)},
          {"emp_lambda_ps", estimate_json(r.emp_lambda_ps)},
          {"emp_mu_ps", estimate_json(r.emp_mu_ps)},
          {"emp_mu_s", estimate_json(r.emp_mu_s)},
          {"emp_mu_ps_queue", estimate_json(r.emp_mu_ps_queue)},
          {"emp_mu_s_queue", estimate_json(r.emp_mu_s_queue)},
          {"mean_qp", json_num(r.mean_qp)},
          {"mean_qps", json_num(r.mean_qps)},
          {"mean_qs", json_num(r.mean_qs)},
          {"relay_occupancy_histogram", num_array(r.relay_occupancy_histogram)},
          {"collisions", r.collisions},
          {"stability",
           {{"primary", sim::to_string(r.stability.primary)},
            {"relay", sim::to_string(r.stability.relay)},
            {"secondary", sim::to_string(r.stability.secondary)}}},
          {"counters", counters_json(r.counters)},
          {"window_mean_qp", num_array(r.window_mean_qp)},
          {"window_mean_qs", num_array(r.window_mean_qs)}};
}

using EstimateField = sim::RateEstimate sim::SimulationResult::*;

// Slot-weighted mean of the per-trial values; trials without a defined
// value are left out. The half-width combines independent trials.
nlohmann::json pooled_estimate(const std::vector<sim::SimulationResult>& runs,
                               EstimateField field) {
  double weight = 0.0;
  double sum = 0.0;
  double var = 0.0;
  for (const auto& r : runs) {
    const auto& e = r.*field;
    if (!std::isfinite(e.value)) continue;
    const auto w = static_cast<double>(r.slots);
    weight += w;
    sum += w * e.value;
    var += w * w * e.half_width * e.half_width;
  }
  const double nan = std::nan("");
  return {{"value", json_num(weight > 0 ? sum / weight : nan)},
          {"half_width", json_num(weight > 0 ? std::sqrt(var) / weight : nan)}};
}

sim::SimulationResult run_simulation(const SystemConfig& config, const SimArgs& args,
                                     std::uint64_t seed) {
  sim::SimOptions options;
  options.n_slots = args.slots;
  options.seed = seed;
  options.dominant = args.dominant;
  return sim::simulate(config, options);
}

oracle::JointStationary run_oracle(const SystemConfig& config, int k_max) {
  try {
    return oracle::solve(config, k_max);
  } catch (const ConvergenceError& e) {
    throw CliError(kTruncation, e.what());
  }
}

}  // namespace

std::string cmd_rates(const CommonArgs& common) {
  const auto config = resolve_config(common);
  const auto manifest = make_manifest("rates", common, config);
  const auto solution = analytic::solve_fixed_point(config);
  nlohmann::json doc;
  doc["manifest"] = manifest_json(manifest);
  doc["rates"] = rate_solution_json(solution);
  return dump(doc);
}

std::string cmd_region(const CommonArgs& common, const RegionArgs& args) {
  const auto config = resolve_config(common);
  const auto method = parse_method(args.method);
  if (args.points < 1) throw CliError(kUsage, "--points must be at least 1");
  auto m_list = args.m_list;
  if (m_list.empty()) m_list.push_back(config.m);
  for (int m : m_list) {
    if (m < 1) throw CliError(kUsage, fmt::format("--m values must be >= 1, got {}", m));
  }

  // All blocks share one lambda_p grid reaching the largest primary rate;
  // points beyond a block's own limit come out with converged = 0.
  double upper = 0.0;
  for (int m : m_list) {
    auto c = config;
    c.m = m;
    upper = std::max(upper, analytic::max_primary_rate(c) * analytic::kBoundaryEdgeFactor);
  }
  const auto grid = analytic::uniform_grid(upper, upper > 0.0 ? args.points : 1);

  auto manifest = make_manifest("region", common, config);
  manifest.options = {{"m", m_list}, {"points", args.points}, {"method", args.method}};
  std::string out = manifest_comment(manifest);
  out += "m,lambda_p,lambda_s_max,rho_ps,mu_p,converged\n";
  for (int m : m_list) {
    auto c = config;
    c.m = m;
    const auto boundary = analytic::trace_region_on(c, grid, method, common.threads);
    for (const auto& p : boundary.points) {
      out += fmt::format("{},{},{},{},{},{}\n", m, fmt_num(p.lambda_p), fmt_num(p.lambda_s_max),
                         fmt_num(p.rho_ps), fmt_num(p.mu_p), p.converged ? 1 : 0);
    }
  }
  return out;
}

std::string cmd_simulate(const CommonArgs& common, const SimArgs& args) {
  const auto config = resolve_config(common);
  if (args.slots < 1) throw CliError(kUsage, "--slots must be at least 1");
  if (args.trials < 1) throw CliError(kUsage, "--trials must be at least 1");

  std::vector<sim::SimulationResult> runs(args.trials);
  parallel_for(runs.size(), common.threads, [&](std::size_t i) {
    runs[i] = run_simulation(config, args, args.seed + i);
  });

  auto manifest = make_manifest("simulate", common, config);
  manifest.seed = args.seed;
  manifest.options = {{"slots", args.slots}, {"trials", args.trials}, {"dominant", args.dominant}};

  auto results = nlohmann::json::array();
  for (const auto& r : runs) results.push_back(simulation_json(r));

  std::uint64_t slots = 0;
  std::uint64_t collisions = 0;
  double mean_qp = 0.0;
  double mean_qps = 0.0;
  double mean_qs = 0.0;
  std::vector<double> histogram(static_cast<std::size_t>(config.m) + 1, 0.0);
  for (const auto& r : runs) {
    const auto w = static_cast<double>(r.slots);
    slots += r.slots;
    collisions += r.collisions;
    mean_qp += w * r.mean_qp;
    mean_qps += w * r.mean_qps;
    mean_qs += w * r.mean_qs;
    for (std::size_t k = 0; k < histogram.size(); ++k) {
      histogram[k] += w * r.relay_occupancy_histogram[k];
    }
  }
  const auto total = static_cast<double>(slots);
  for (double& h : histogram) h /= total;

  nlohmann::json summary = {
      {"trials", runs.size()},
      {"slots", slots},
      {"emp_mu_p", pooled_estimate(runs, &sim::SimulationResult::emp_mu_p)},
      {"emp_lambda_ps", pooled_estimate(runs, &sim::SimulationResult::emp_lambda_ps)},
      {"emp_mu_ps", pooled_estimate(runs, &sim::SimulationResult::emp_mu_ps)},
      {"emp_mu_s", pooled_estimate(runs, &sim::SimulationResult::emp_mu_s)},
      {"emp_mu_ps_queue", pooled_estimate(runs, &sim::SimulationResult::emp_mu_ps_queue)},
      {"emp_mu_s_queue", pooled_estimate(runs, &sim::SimulationResult::emp_mu_s_queue)},
      {"mean_qp", json_num(mean_qp / total)},
      {"mean_qps", json_num(mean_qps / total)},
      {"mean_qs", json_num(mean_qs / total)},
      {"relay_occupancy_histogram", num_array(histogram)},
      {"collisions", collisions}};

  nlohmann::json doc;
  doc["manifest"] = manifest_json(manifest);
  doc["results"] = results;
  doc["summary"] = summary;
  return dump(doc);
}

std::string cmd_oracle(const CommonArgs& common, int k_max) {
  const auto config = resolve_config(common);
  if (k_max < 2) throw CliError(kUsage, "--kmax must be at least 2");
  const auto js = run_oracle(config, k_max);
  auto manifest = make_manifest("oracle", common, config);
  manifest.options = {{"kmax", k_max}};

  nlohmann::json doc;
  doc["manifest"] = manifest_json(manifest);
  doc["oracle"] = {{"k_max", js.k_max},
                   {"m", js.m},
                   {"truncation_mass", json_num(js.truncation_mass)},
                   {"residual", json_num(js.residual)},
                   {"mu_p", json_num(js.mu_p)},
                   {"lambda_ps", json_num(js.lambda_ps)},
                   {"mu_ps", json_num(js.mu_ps)},
                   {"mu_s", json_num(js.mu_s)},
                   {"mu_ps_queue", json_num(js.mu_ps_queue)},
                   {"mu_s_queue", json_num(js.mu_s_queue)},
                   {"relay_throughput", json_num(js.relay_throughput)},
                   {"primary_busy", json_num(js.primary_busy)},
                   {"relay_marginal", num_array(js.relay_marginal)},
                   {"primary_marginal", num_array(js.primary_marginal)}};
  return dump(doc);
}

std::string cmd_compare(const CommonArgs& common, const SimArgs& args, int k_max) {
  const auto config = resolve_config(common);
  if (args.slots < 1) throw CliError(kUsage, "--slots must be at least 1");
  if (k_max < 2) throw CliError(kUsage, "--kmax must be at least 2");

  struct Column {
    double mu_p, lambda_ps, mu_ps, mu_s;
  };
  const double nan = std::nan("");
  auto analytic_column = [&](EqMode mode) {
    auto c = config;
    c.eq_mode = mode;
    try {
      const auto r = analytic::solve_fixed_point(c);
      return Column{r.mu_p, r.lambda_ps, r.mu_ps, r.mu_s};
    } catch (const NoSolutionError&) {
      return Column{nan, nan, nan, nan};
    }
  };
  const auto paper = analytic_column(EqMode::PaperVerbatim);
  const auto physical = analytic_column(EqMode::Physical);
  const auto js = run_oracle(config, k_max);
  const auto r = run_simulation(config, args, args.seed);

  auto manifest = make_manifest("compare", common, config);
  manifest.seed = args.seed;
  manifest.options = {{"slots", args.slots}, {"dominant", args.dominant}, {"kmax", k_max}};

  std::string out = manifest_comment(manifest);
  out += "quantity,analytic_paper,analytic_physical,oracle,simulated,sim_ci_halfwidth\n";
  auto row = [&](const char* name, double a, double b, double o, const sim::RateEstimate& e) {
    out += fmt::format("{},{},{},{},{},{}\n", name, fmt_num(a), fmt_num(b), fmt_num(o),
                       fmt_num(e.value), fmt_num(e.half_width));
  };
  row("mu_p", paper.mu_p, physical.mu_p, js.mu_p, r.emp_mu_p);
  row("lambda_ps", paper.lambda_ps, physical.lambda_ps, js.lambda_ps, r.emp_lambda_ps);
  row("mu_ps", paper.mu_ps, physical.mu_ps, js.mu_ps_queue, r.emp_mu_ps_queue);
  row("mu_s", paper.mu_s, physical.mu_s, js.mu_s_queue, r.emp_mu_s_queue);
  return out;
}

std::string cmd_sweep(const CommonArgs& common, const SweepArgs& args) {
  const auto config = resolve_config(common);
  const auto method = parse_method(args.method);
  if (args.param != "p_f" && args.param != "p_d") {
    throw CliError(kUsage, fmt::format("--param must be p_f or p_d, got \"{}\"", args.param));
  }
  if (args.values.empty()) throw CliError(kUsage, "--values must list at least one value");

  std::vector<SystemConfig> configs;
  for (double v : args.values) {
    auto c = config;
    (args.param == "p_f" ? c.sensing.p_f : c.sensing.p_d) = v;
    require_valid(c);
    configs.push_back(c);
  }

  struct Row {
    double lambda_p_max = 0.0;
    double lambda_s_at_zero = 0.0;
  };
  std::vector<Row> rows(configs.size());
  parallel_for(configs.size(), common.threads, [&](std::size_t i) {
    rows[i].lambda_p_max = analytic::max_primary_rate(configs[i]);
    const double origin[] = {0.0};
    const auto b = analytic::trace_region_on(configs[i], origin, method, 1);
    rows[i].lambda_s_at_zero = b.points.front().converged ? b.points.front().lambda_s_max
                                                          : std::nan("");
  });

  auto manifest = make_manifest("sweep", common, config);
  manifest.options = {{"param", args.param}, {"values", args.values}, {"method", args.method}};
  std::string out = manifest_comment(manifest);
  out += "param_value,lambda_p_max,lambda_s_at_zero\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += fmt::format("{},{},{}\n", fmt_num(args.values[i]), fmt_num(rows[i].lambda_p_max),
                       fmt_num(rows[i].lambda_s_at_zero));
  }
  return out;
}

}  // namespace crn::cli
