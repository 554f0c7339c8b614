#include "crn/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "crn/errors.hpp"

namespace crn::sim {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Fixed draw slots per time slot. Every slot consumes all of them whatever
// branch is taken, so two runs with the same seed see the same channel.
enum Draw : unsigned {
  kArrivalPrimary = 0,
  kArrivalSecondary,
  kDetect,
  kDirectLink,
  kRelayDecode,
  kFalseAlarm,
  kSecondaryLink,
  kDrawsPerSlot = 8,
};

class SlotStream {
 public:
  SlotStream(std::uint64_t seed, std::uint64_t slot)
      : base_(splitmix_finalize(seed + kGolden) + slot * kDrawsPerSlot * kGolden) {}

  [[nodiscard]] bool bernoulli(Draw draw, double p) const { return uniform(draw) < p; }

  [[nodiscard]] double uniform(unsigned draw) const {
    const std::uint64_t bits = splitmix_finalize(base_ + (draw + 1) * kGolden);
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t base_;
};

// Two-sided 95% Student-t quantile.
double student_t_975(std::size_t dof) {
  static constexpr double kTable[] = {
      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
      2.040};
  if (dof == 0) return std::numeric_limits<double>::infinity();
  if (dof <= std::size(kTable)) return kTable[dof - 1];
  return 1.96;
}

double median(std::vector<double> values) {
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

RateEstimate RateEstimate::from_counts(std::uint64_t successes, std::uint64_t trials) {
  RateEstimate r;
  r.successes = successes;
  r.trials = trials;
  if (trials == 0) {
    r.value = std::numeric_limits<double>::quiet_NaN();
    r.half_width = r.value;
    r.iid_half_width = r.value;
    return r;
  }
  const double n = static_cast<double>(trials);
  r.value = static_cast<double>(successes) / n;
  r.iid_half_width = 1.96 * std::sqrt(r.value * (1.0 - r.value) / n);
  r.half_width = r.iid_half_width;
  return r;
}

RateEstimate RateEstimate::from_batches(const std::vector<std::uint64_t>& successes,
                                        const std::vector<std::uint64_t>& trials) {
  std::uint64_t total_s = 0;
  std::uint64_t total_t = 0;
  std::size_t used = 0;
  for (std::size_t b = 0; b < trials.size(); ++b) {
    total_s += successes[b];
    total_t += trials[b];
    if (trials[b] > 0) ++used;
  }
  RateEstimate r = from_counts(total_s, total_t);
  if (total_t == 0 || trials.size() < 2 || used < 2) return r;

  // Ratio estimator: residuals z_b = S_b - R T_b, Var(R) ~ s_z^2 / (B Tbar^2).
  const auto batches = static_cast<double>(trials.size());
  double sum_sq = 0.0;
  for (std::size_t b = 0; b < trials.size(); ++b) {
    const double z = static_cast<double>(successes[b]) - r.value * static_cast<double>(trials[b]);
    sum_sq += z * z;
  }
  const double mean_trials = static_cast<double>(total_t) / batches;
  const double variance = sum_sq / (batches - 1.0) / (batches * mean_trials * mean_trials);
  r.half_width = student_t_975(trials.size() - 1) * std::sqrt(variance);
  return r;
}

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Stable:
      return "stable";
    case Verdict::Unstable:
      return "unstable";
    case Verdict::Inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

double uniform_draw(std::uint64_t seed, std::uint64_t slot, unsigned draw) {
  return SlotStream(seed, slot).uniform(draw);
}

SimulationResult simulate(const SystemConfig& config, const SimOptions& options) {
  require_valid(config);
  if (options.n_slots < 1) {
    throw DomainError("simulation needs at least one slot");
  }
  const auto& o = config.outages;
  const auto& sensing = config.sensing;
  const auto m = static_cast<std::uint64_t>(config.m);
  const bool dominant = options.dominant;

  std::uint64_t qp = 0;
  std::uint64_t qps = 0;
  std::uint64_t qs = 0;
  Counters c;
  std::vector<std::uint64_t> relay_hist(m + 1, 0);
  long double sum_qp = 0;
  long double sum_qps = 0;
  long double sum_qs = 0;

  const std::uint64_t windows =
      options.window_count > 0
          ? std::min<std::uint64_t>(static_cast<std::uint64_t>(options.window_count),
                                    options.n_slots)
          : 0;
  const std::uint64_t window_length = windows > 0 ? options.n_slots / windows : 0;
  std::vector<long double> window_qp(windows, 0);
  std::vector<long double> window_qs(windows, 0);

  const std::uint64_t batches =
      std::min<std::uint64_t>(static_cast<std::uint64_t>(kBatches), options.n_slots);
  const std::uint64_t batch_length = options.n_slots / batches;
  std::vector<Counters> batch(batches);

  for (std::uint64_t slot = 0; slot < options.n_slots; ++slot) {
    const SlotStream rng(options.seed, slot);
    Counters& bc = batch[std::min(slot / batch_length, batches - 1)];

    if (rng.bernoulli(kArrivalPrimary, config.lambda_p)) {
      ++qp;
      ++bc.pu_arrivals;
    }
    if (rng.bernoulli(kArrivalSecondary, config.lambda_s)) {
      ++qs;
      ++bc.su_arrivals;
    }
    if (qps > 0) ++bc.relay_busy_slots;

    if (qp > 0) {
      ++bc.pu_attempts;
      const bool detected = rng.bernoulli(kDetect, sensing.p_d);
      const bool su_has_data = dominant || qps > 0 || qs > 0;
      if (!detected && su_has_data) {
        // Missed detection: the SU transmits too and both packets are lost.
        ++bc.collisions;
      } else if (rng.bernoulli(kDirectLink, 1.0 - o.p_pp)) {
        --qp;
        ++bc.pu_direct_successes;
      } else if (rng.bernoulli(kRelayDecode, 1.0 - o.p_ps) && qps < m) {
        // The SU decoded the packet and acknowledges it on behalf of D_p.
        --qp;
        ++qps;
        ++bc.relay_admissions;
      }
    } else if (!rng.bernoulli(kFalseAlarm, sensing.p_f)) {
      if (qps > 0) {
        ++bc.relay_opportunities;
        if (rng.bernoulli(kSecondaryLink, 1.0 - o.p_sp)) {
          --qps;
          ++bc.relay_successes;
        }
      } else {
        ++bc.su_opportunities;
        // With an empty Q_s the dominant SU sends a dummy packet; the original
        // SU stays silent but the slot still counts as a service opportunity.
        if (rng.bernoulli(kSecondaryLink, 1.0 - o.p_ss)) {
          ++bc.su_service_successes;
          if (qs > 0) {
            --qs;
            ++bc.su_departures;
          }
        }
      }
    } else if (qps > 0) {
      ++bc.relay_opportunities;
    } else {
      ++bc.su_opportunities;
    }

    if (qps > m) {
      throw std::logic_error(fmt::format("relay queue exceeded capacity at slot {}", slot));
    }
    ++relay_hist[qps];
    sum_qp += static_cast<long double>(qp);
    sum_qps += static_cast<long double>(qps);
    sum_qs += static_cast<long double>(qs);
    if (windows > 0) {
      const auto w = std::min(slot / window_length, windows - 1);
      window_qp[w] += static_cast<long double>(qp);
      window_qs[w] += static_cast<long double>(qs);
    }
  }

  std::vector<std::uint64_t> slots_per_batch(batches, batch_length);
  slots_per_batch.back() = options.n_slots - batch_length * (batches - 1);
  for (const auto& b : batch) {
    c.pu_arrivals += b.pu_arrivals;
    c.pu_attempts += b.pu_attempts;
    c.pu_direct_successes += b.pu_direct_successes;
    c.relay_admissions += b.relay_admissions;
    c.relay_opportunities += b.relay_opportunities;
    c.relay_busy_slots += b.relay_busy_slots;
    c.relay_successes += b.relay_successes;
    c.su_opportunities += b.su_opportunities;
    c.su_service_successes += b.su_service_successes;
    c.su_arrivals += b.su_arrivals;
    c.su_departures += b.su_departures;
    c.collisions += b.collisions;
  }
  auto column = [&](auto member) {
    std::vector<std::uint64_t> v;
    v.reserve(batch.size());
    for (const auto& b : batch) v.push_back(b.*member);
    return v;
  };
  auto estimate = [&](std::uint64_t Counters::*num, std::uint64_t Counters::*den) {
    return RateEstimate::from_batches(column(num), column(den));
  };
  auto per_slot = [&](std::uint64_t Counters::*num) {
    return RateEstimate::from_batches(column(num), slots_per_batch);
  };

  c.final_qp = qp;
  c.final_qps = qps;
  c.final_qs = qs;

  SimulationResult r;
  r.slots = options.n_slots;
  r.seed = options.seed;
  r.dominant = dominant;
  r.counters = c;
  r.collisions = c.collisions;
  {
    auto departures = column(&Counters::pu_direct_successes);
    const auto admitted = column(&Counters::relay_admissions);
    for (std::size_t b = 0; b < departures.size(); ++b) departures[b] += admitted[b];
    r.emp_mu_p = RateEstimate::from_batches(departures, column(&Counters::pu_attempts));
  }
  r.emp_lambda_ps = per_slot(&Counters::relay_admissions);
  r.emp_mu_ps = estimate(&Counters::relay_successes, &Counters::relay_opportunities);
  r.emp_mu_s = estimate(&Counters::su_service_successes, &Counters::su_opportunities);
  r.emp_mu_ps_queue = estimate(&Counters::relay_successes, &Counters::relay_busy_slots);
  r.emp_mu_s_queue = per_slot(&Counters::su_service_successes);

  const auto n = static_cast<long double>(options.n_slots);
  r.mean_qp = static_cast<double>(sum_qp / n);
  r.mean_qps = static_cast<double>(sum_qps / n);
  r.mean_qs = static_cast<double>(sum_qs / n);
  r.relay_occupancy_histogram.resize(m + 1);
  for (std::size_t k = 0; k <= m; ++k) {
    r.relay_occupancy_histogram[k] =
        static_cast<double>(relay_hist[k]) / static_cast<double>(options.n_slots);
  }

  if (windows > 0) {
    r.window_mean_qp.resize(windows);
    r.window_mean_qs.resize(windows);
    for (std::uint64_t w = 0; w < windows; ++w) {
      const std::uint64_t len =
          w + 1 < windows ? window_length : options.n_slots - window_length * (windows - 1);
      r.window_mean_qp[w] = static_cast<double>(window_qp[w] / static_cast<long double>(len));
      r.window_mean_qs[w] = static_cast<double>(window_qs[w] / static_cast<long double>(len));
    }
    r.stability.primary = classify_windows(r.window_mean_qp, window_length);
    r.stability.secondary = classify_windows(r.window_mean_qs, window_length);
  }
  r.stability.relay = Verdict::Stable;
  return r;
}

Verdict classify_windows(const std::vector<double>& window_means,
                         std::uint64_t window_length) {
  const std::size_t n = window_means.size();
  if (n < 4 || window_length == 0) return Verdict::Inconclusive;

  // Least-squares slope against window index, rescaled to packets per slot.
  const double x_mean = 0.5 * static_cast<double>(n - 1);
  double y_mean = 0.0;
  for (double y : window_means) y_mean += y;
  y_mean /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - x_mean;
    sxy += dx * (window_means[i] - y_mean);
    sxx += dx * dx;
  }
  const double slope = sxy / sxx / static_cast<double>(window_length);

  const double med = median(window_means);
  // An all-but-idle queue has median 0; one packet is then the bound.
  const double bound = med > 0.0 ? 10.0 * med : 1.0;
  const bool bounded = window_means.back() <= bound;

  if (slope < kStableSlope && bounded) return Verdict::Stable;
  if (slope > 10.0 * kStableSlope) return Verdict::Unstable;
  return Verdict::Inconclusive;
}

StabilityVerdicts stability_probe(const SystemConfig& config, std::uint64_t n_slots,
                                  std::uint64_t seed, int window_count, bool dominant) {
  if (window_count < 4) {
    throw DomainError(fmt::format("stability probe needs >= 4 windows, got {}", window_count));
  }
  SimOptions options;
  options.n_slots = n_slots;
  options.seed = seed;
  options.dominant = dominant;
  options.window_count = window_count;
  return simulate(config, options).stability;
}

}  // namespace crn::sim
