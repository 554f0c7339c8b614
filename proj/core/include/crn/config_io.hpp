#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "crn/model.hpp"

namespace crn {

/// Parses the flat config object. Keys are exactly
/// p_pp, p_ps, p_sp, p_ss, p_d, p_f, m, lambda_p, lambda_s and the optional
/// eq_mode ("paper" | "physical", default "paper"). Missing, unknown or
/// mistyped keys raise InvalidConfigError. Range checks are left to validate().
SystemConfig config_from_json(const nlohmann::json& doc);

SystemConfig load_config(const std::filesystem::path& path);

nlohmann::json config_to_json(const SystemConfig& config);

}  // namespace crn
