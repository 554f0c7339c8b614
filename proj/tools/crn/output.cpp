#include "output.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "crn/config_io.hpp"

namespace crn::cli {

std::string current_timestamp() {
  std::time_t t = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch != nullptr && *epoch) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

std::string fmt_num(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return fmt::format("{:.9g}", value);
}

nlohmann::json json_num(double value) {
  if (!std::isfinite(value)) return nullptr;
  return std::strtod(fmt::format("{:.9g}", value).c_str(), nullptr);
}

nlohmann::json manifest_json(const RunManifest& m) {
  nlohmann::json j;
  j["subcommand"] = m.subcommand;
  j["config_path"] = m.config_path;
  j["config"] = config_to_json(m.config);
  j["output"] = m.output_path;
  j["seed"] = m.seed ? nlohmann::json(*m.seed) : nlohmann::json(nullptr);
  j["options"] = m.options;
  j["version"] = m.version;
  j["timestamp"] = m.timestamp;
  return j;
}

std::string manifest_comment(const RunManifest& m) {
  const auto j = manifest_json(m);
  std::string out;
  for (const char* key :
       {"subcommand", "config_path", "config", "output", "seed", "options", "version",
        "timestamp"}) {
    const auto& v = j.at(key);
    out += fmt::format("# {}: {}\n", key, v.is_string() ? v.get<std::string>() : v.dump());
  }
  return out;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error(fmt::format("cannot open {} for writing", path));
  file << text;
  if (!file) throw std::runtime_error(fmt::format("failed writing {}", path));
}

}  // namespace crn::cli
