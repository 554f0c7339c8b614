#include "crn/model.hpp"

#include <fmt/format.h>

#include "crn/errors.hpp"

namespace crn {

std::string to_string(EqMode mode) {
  return mode == EqMode::PaperVerbatim ? "paper" : "physical";
}

EqMode eq_mode_from_string(const std::string& name) {
  if (name == "paper") return EqMode::PaperVerbatim;
  if (name == "physical") return EqMode::Physical;
  throw InvalidConfigError(
      fmt::format("eq_mode must be \"paper\" or \"physical\", got \"{}\"", name));
}

namespace {

void check_probability(ValidationReport& report, const char* field,
                       double value) {
  // Written so that NaN fails too.
  if (!(value >= 0.0 && value <= 1.0)) {
    report.push_back({field, fmt::format("{} = {} is outside [0, 1]", field, value)});
  }
}

}  // namespace

ValidationReport validate(const SystemConfig& config) {
  ValidationReport report;
  check_probability(report, "p_pp", config.outages.p_pp);
  check_probability(report, "p_ps", config.outages.p_ps);
  check_probability(report, "p_sp", config.outages.p_sp);
  check_probability(report, "p_ss", config.outages.p_ss);
  check_probability(report, "p_d", config.sensing.p_d);
  check_probability(report, "p_f", config.sensing.p_f);
  check_probability(report, "lambda_p", config.lambda_p);
  check_probability(report, "lambda_s", config.lambda_s);
  if (config.m < 1) {
    report.push_back({"m", fmt::format("m = {} must be at least 1", config.m)});
  }
  if (config.outages.p_pp * config.outages.p_ps >= 1.0) {
    report.push_back(
        {"phi", "phi undefined (division by zero): 1 - p_pp * p_ps = 0"});
  }
  return report;
}

std::string describe(const ValidationReport& report) {
  std::string out;
  for (const auto& v : report) {
    if (!out.empty()) out += "; ";
    out += v.message;
  }
  return out;
}

void require_valid(const SystemConfig& config) {
  auto report = validate(config);
  if (!report.empty()) {
    throw InvalidConfigError("invalid config: " + describe(report));
  }
}

AuxiliaryParams auxiliary(const SystemConfig& config) {
  const auto& o = config.outages;
  const double denom = 1.0 - o.p_pp * o.p_ps;
  if (denom <= 0.0) {
    throw DegenerateError("phi undefined (division by zero): 1 - p_pp * p_ps = 0");
  }
  AuxiliaryParams aux;
  aux.psi = (1.0 - config.sensing.p_f) * (1.0 - o.p_sp);
  aux.eta = 1.0 - o.p_pp * o.p_sp;
  aux.phi = (1.0 - o.p_ps) * o.p_pp / denom;
  return aux;
}

}  // namespace crn
