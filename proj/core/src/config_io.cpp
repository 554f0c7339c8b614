#include "crn/config_io.hpp"

#include <array>
#include <fstream>
#include <string_view>

#include <fmt/format.h>

#include "crn/errors.hpp"

namespace crn {

namespace {

constexpr std::array<std::string_view, 9> kRequiredKeys = {
    "p_pp", "p_ps", "p_sp", "p_ss", "p_d", "p_f", "m", "lambda_p", "lambda_s"};

double number_at(const nlohmann::json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number()) {
    throw InvalidConfigError(fmt::format("config key \"{}\" must be a number", key));
  }
  return v.get<double>();
}

}  // namespace

SystemConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    throw InvalidConfigError("config must be a JSON object");
  }
  for (auto key : kRequiredKeys) {
    if (!doc.contains(std::string(key))) {
      throw InvalidConfigError(fmt::format("config is missing key \"{}\"", key));
    }
  }
  for (const auto& [key, _] : doc.items()) {
    bool known = key == "eq_mode";
    for (auto k : kRequiredKeys) known = known || key == k;
    if (!known) {
      throw InvalidConfigError(fmt::format("unknown config key \"{}\"", key));
    }
  }

  SystemConfig config;
  config.outages.p_pp = number_at(doc, "p_pp");
  config.outages.p_ps = number_at(doc, "p_ps");
  config.outages.p_sp = number_at(doc, "p_sp");
  config.outages.p_ss = number_at(doc, "p_ss");
  config.sensing.p_d = number_at(doc, "p_d");
  config.sensing.p_f = number_at(doc, "p_f");
  config.lambda_p = number_at(doc, "lambda_p");
  config.lambda_s = number_at(doc, "lambda_s");

  const auto& m = doc.at("m");
  if (!m.is_number_integer()) {
    throw InvalidConfigError("config key \"m\" must be an integer");
  }
  config.m = m.get<int>();

  if (doc.contains("eq_mode")) {
    const auto& mode = doc.at("eq_mode");
    if (!mode.is_string()) {
      throw InvalidConfigError("config key \"eq_mode\" must be a string");
    }
    config.eq_mode = eq_mode_from_string(mode.get<std::string>());
  }
  return config;
}

SystemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidConfigError(fmt::format("cannot open config file {}", path.string()));
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfigError(fmt::format("malformed JSON in {}: {}", path.string(), e.what()));
  }
  return config_from_json(doc);
}

nlohmann::json config_to_json(const SystemConfig& config) {
  return {
      {"p_pp", config.outages.p_pp},
      {"p_ps", config.outages.p_ps},
      {"p_sp", config.outages.p_sp},
      {"p_ss", config.outages.p_ss},
      {"p_d", config.sensing.p_d},
      {"p_f", config.sensing.p_f},
      {"m", config.m},
      {"lambda_p", config.lambda_p},
      {"lambda_s", config.lambda_s},
      {"eq_mode", to_string(config.eq_mode)},
  };
}

}  // namespace crn
