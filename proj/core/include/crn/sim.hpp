#pragma once

#include <cstdint>
#include <vector>

#include "crn/model.hpp"

namespace crn::sim {

/// Empirical frequency successes / trials with a 95% confidence half-width.
///
/// `half_width` comes from batch means (ratio estimator over kBatches
/// contiguous batches, Student-t quantile), which accounts for the strong
/// slot-to-slot correlation of queue-driven events. `iid_half_width` is the
/// plain binomial 1.96 * sqrt(p (1 - p) / n) and is only valid for
/// independent trials. `value` and both widths are NaN when `trials` is 0.
struct RateEstimate {
  double value = 0.0;
  double half_width = 0.0;
  double iid_half_width = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;

  /// Binomial interval only (half_width = iid_half_width).
  static RateEstimate from_counts(std::uint64_t successes, std::uint64_t trials);

  /// Batch-means interval from per-batch counts; falls back to the binomial
  /// width when fewer than two batches carry trials.
  static RateEstimate from_batches(const std::vector<std::uint64_t>& successes,
                                   const std::vector<std::uint64_t>& trials);
};

inline constexpr int kBatches = 32;

enum class Verdict { Stable, Unstable, Inconclusive };

const char* to_string(Verdict verdict);

struct StabilityVerdicts {
  Verdict primary = Verdict::Inconclusive;
  Verdict relay = Verdict::Stable;
  Verdict secondary = Verdict::Inconclusive;
};

/// Raw event counts of one run; the conservation identities are stated on
/// these.
struct Counters {
  std::uint64_t pu_arrivals = 0;
  std::uint64_t pu_attempts = 0;
  std::uint64_t pu_direct_successes = 0;
  std::uint64_t relay_admissions = 0;
  std::uint64_t relay_opportunities = 0;   // Q_p = 0 and Q_ps > 0
  std::uint64_t relay_busy_slots = 0;      // Q_ps > 0 at the start of the slot
  std::uint64_t relay_successes = 0;
  std::uint64_t su_opportunities = 0;      // Q_p = 0 and Q_ps = 0
  std::uint64_t su_service_successes = 0;  // includes dummy packets
  std::uint64_t su_arrivals = 0;
  std::uint64_t su_departures = 0;
  std::uint64_t collisions = 0;
  std::uint64_t final_qp = 0;
  std::uint64_t final_qps = 0;
  std::uint64_t final_qs = 0;
};

struct SimulationResult {
  std::uint64_t slots = 0;
  std::uint64_t seed = 0;
  bool dominant = true;

  // Conditional frequencies:
  //   emp_mu_p      PU departures per PU transmission slot
  //   emp_lambda_ps relay admissions per slot
  //   emp_mu_ps     relay successes per (Q_p = 0, Q_ps > 0) slot
  //   emp_mu_s      SU own-data service successes per (Q_p = 0, Q_ps = 0) slot
  RateEstimate emp_mu_p;
  RateEstimate emp_lambda_ps;
  RateEstimate emp_mu_ps;
  RateEstimate emp_mu_s;

  // Service rates as seen by each queue, the sense of the closed-form rates:
  //   relay successes per slot with Q_ps > 0, SU service successes per slot.
  RateEstimate emp_mu_ps_queue;
  RateEstimate emp_mu_s_queue;

  double mean_qp = 0.0;
  double mean_qps = 0.0;
  double mean_qs = 0.0;
  std::vector<double> relay_occupancy_histogram;  // end-of-slot Q_ps, length m+1
  std::uint64_t collisions = 0;
  StabilityVerdicts stability;
  Counters counters;

  // Mean end-of-slot queue lengths per window, used for the stability verdict.
  std::vector<double> window_mean_qp;
  std::vector<double> window_mean_qs;
};

struct SimOptions {
  std::uint64_t n_slots = 1'000'000;
  std::uint64_t seed = 42;
  bool dominant = true;
  int window_count = 16;
};

/// Slotted simulation of the cognitive-relay protocol. Deterministic in
/// (config, options): every random draw is keyed by (seed, slot, draw index).
SimulationResult simulate(const SystemConfig& config, const SimOptions& options);

/// Verdict from per-window mean queue lengths: Stable if the regression slope
/// is below kStableSlope packets/slot and the last window stays within 10x
/// the median window, Unstable above 10 * kStableSlope, otherwise Inconclusive.
inline constexpr double kStableSlope = 1e-6;
Verdict classify_windows(const std::vector<double>& window_means,
                         std::uint64_t window_length);

/// Runs the simulator and reports per-queue verdicts. The relay queue is
/// bounded by m and always reported Stable.
StabilityVerdicts stability_probe(const SystemConfig& config, std::uint64_t n_slots,
                                  std::uint64_t seed, int window_count,
                                  bool dominant = true);

/// Uniform [0, 1) variate for draw `draw` of slot `slot` under `seed`.
double uniform_draw(std::uint64_t seed, std::uint64_t slot, unsigned draw);

}  // namespace crn::sim
