#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "output.hpp"

namespace crn::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kNoSolution = 2,
  kInvalidConfig = 3,
  kUsage = 4,
  kTruncation = 5,
};

/// Error carrying the process exit code.
class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] int code() const { return code_; }

 private:
  int code_;
};

struct CommonArgs {
  std::string config_path;
  std::string out = "-";
  std::string mode;  // empty keeps the config's eq_mode
  unsigned threads = 0;
};

struct RegionArgs {
  std::vector<int> m_list;
  std::size_t points = 201;
  std::string method = "fixed";
};

struct SimArgs {
  std::uint64_t slots = 1'000'000;
  std::uint64_t seed = 42;
  std::uint64_t trials = 1;
  bool dominant = true;
};

struct SweepArgs {
  std::string param;
  std::vector<double> values;
  std::string method = "fixed";
};

// Each returns the artifact text; errors surface as exceptions.
std::string cmd_rates(const CommonArgs& common);
std::string cmd_region(const CommonArgs& common, const RegionArgs& args);
std::string cmd_simulate(const CommonArgs& common, const SimArgs& args);
std::string cmd_oracle(const CommonArgs& common, int k_max);
std::string cmd_compare(const CommonArgs& common, const SimArgs& args, int k_max);
std::string cmd_sweep(const CommonArgs& common, const SweepArgs& args);

}  // namespace crn::cli
