#pragma once

#include <string>
#include <vector>

namespace crn {

/// Outage probabilities of the four physical links.
struct LinkOutages {
  double p_pp = 0.0;  // S_p -> D_p
  double p_ps = 0.0;  // S_p -> S_s
  double p_sp = 0.0;  // S_s -> D_p
  double p_ss = 0.0;  // S_s -> D_s
};

/// Spectrum-sensing quality of the secondary user.
struct SensingProfile {
  double p_d = 1.0;  // detection
  double p_f = 0.0;  // false alarm
};

/// How the relay and secondary service rates treat the detection factor.
///
/// `PaperVerbatim` multiplies both by P_d as the closed forms are printed.
/// `Physical` drops it, since the SU only transmits in slots where the PU is
/// idle and no detection event takes place. The two coincide at P_d = 1.
enum class EqMode { PaperVerbatim, Physical };

std::string to_string(EqMode mode);
EqMode eq_mode_from_string(const std::string& name);

struct SystemConfig {
  LinkOutages outages;
  SensingProfile sensing;
  int m = 1;  // relay buffer capacity in packets
  double lambda_p = 0.0;
  double lambda_s = 0.0;
  EqMode eq_mode = EqMode::PaperVerbatim;

  /// Factor applied to the relay/secondary service rates for the current mode.
  [[nodiscard]] double idle_slot_sensing_factor() const {
    return eq_mode == EqMode::PaperVerbatim ? sensing.p_d : 1.0;
  }
};

struct Violation {
  std::string field;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

/// Checks every parameter bound. An empty report means the config is usable.
ValidationReport validate(const SystemConfig& config);

std::string describe(const ValidationReport& report);

/// Throws InvalidConfigError carrying the report if validation fails.
void require_valid(const SystemConfig& config);

struct AuxiliaryParams {
  double psi = 0.0;  // (1 - p_f)(1 - p_sp)
  double eta = 0.0;  // 1 - p_pp p_sp; exposed, not consumed anywhere
  double phi = 0.0;  // (1 - p_ps) p_pp / (1 - p_pp p_ps)
};

AuxiliaryParams auxiliary(const SystemConfig& config);

}  // namespace crn
