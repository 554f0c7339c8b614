#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "crn/model.hpp"

namespace crn::cli {

struct RunManifest {
  std::string subcommand;
  std::string config_path;
  SystemConfig config;
  std::string output_path;  // "-" for stdout
  std::optional<std::uint64_t> seed;
  nlohmann::json options = nlohmann::json::object();
  std::string version;
  std::string timestamp;
};

/// UTC ISO-8601 now, or SOURCE_DATE_EPOCH when set.
std::string current_timestamp();

/// 9 significant digits; "nan" / "inf" / "-inf" for non-finite values.
std::string fmt_num(double value);

/// Rounded to 9 significant digits, null when non-finite.
nlohmann::json json_num(double value);

nlohmann::json manifest_json(const RunManifest& manifest);

/// "# key: value" lines, one per manifest field.
std::string manifest_comment(const RunManifest& manifest);

/// Writes to `path`, or stdout for "-" or empty.
void write_output(const std::string& path, const std::string& text);

}  // namespace crn::cli
