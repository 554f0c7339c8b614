#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "crn/model.hpp"

namespace crn::oracle {

/// Sparse row-stochastic transition matrix in compressed-row form.
struct Chain {
  std::size_t n_states = 0;
  std::vector<std::size_t> row_start;  // size n_states + 1
  std::vector<std::size_t> column;
  std::vector<double> probability;

  /// Builds from dense rows; handy for small hand-made chains.
  static Chain from_dense(const std::vector<std::vector<double>>& rows);

  /// Largest |1 - sum of row| over all rows.
  [[nodiscard]] double max_row_defect() const;
};

/// The dominant-system chain over end-of-slot states (q_p, q_ps), with q_p
/// capped at k_max by rejecting arrivals there. State index is
/// q_p * (m + 1) + q_ps.
struct DominantChain {
  SystemConfig config;
  int k_max = 0;
  int m = 0;
  Chain chain;

  [[nodiscard]] std::size_t index(int q_p, int q_ps) const {
    return static_cast<std::size_t>(q_p) * static_cast<std::size_t>(m + 1) +
           static_cast<std::size_t>(q_ps);
  }
};

inline constexpr int kDefaultKMax = 200;
inline constexpr double kMaxTruncationMass = 1e-8;
inline constexpr std::size_t kMaxStates = 1'000'000;

DominantChain build_chain(const SystemConfig& config, int k_max = kDefaultKMax);

struct StationaryOptions {
  double residual_tolerance = 1e-10;
  double step_tolerance = 1e-12;
  std::uint64_t max_power_iterations = 1'000'000;
};

struct StationaryVector {
  std::vector<double> pi;
  double residual = 0.0;  // max |pi P - pi|
  std::uint64_t power_iterations = 0;
  bool direct_solve = false;
};

/// Stationary distribution of a chain with a single recurrent class. A
/// sparse LU solve supplies the start vector, power iteration refines it; if
/// the factorization fails, plain power iteration from the uniform vector is
/// used. Throws ConvergenceError if the residual misses tolerance.
StationaryVector stationary(const Chain& chain, const StationaryOptions& options = {});

struct JointStationary {
  int k_max = 0;
  int m = 0;
  std::vector<double> pi;  // row-major, (k_max + 1) x (m + 1)
  std::vector<double> primary_marginal;
  std::vector<double> relay_marginal;
  double truncation_mass = 0.0;
  double residual = 0.0;

  // Conditional rates, same definitions as the simulator's emp_* fields.
  double mu_p = 0.0;
  double lambda_ps = 0.0;
  double mu_ps = 0.0;
  double mu_s = 0.0;
  // Service rates seen by the relay queue (per slot with Q_ps > 0) and the
  // SU queue (per slot), comparable to the closed-form rates.
  double mu_ps_queue = 0.0;
  double mu_s_queue = 0.0;
  double relay_throughput = 0.0;
  double primary_busy = 0.0;  // probability the PU transmits in a slot

  [[nodiscard]] double at(int q_p, int q_ps) const {
    return pi[static_cast<std::size_t>(q_p) * static_cast<std::size_t>(m + 1) +
              static_cast<std::size_t>(q_ps)];
  }
};

/// Solves the chain and derives the rates. Throws TruncationError when the
/// mass at q_p = k_max exceeds kMaxTruncationMass.
JointStationary stationary(const DominantChain& chain, const StationaryOptions& options = {});

/// Builds and solves with k_max doubled from `k_max` until the truncation
/// mass is acceptable or the state count would exceed kMaxStates.
JointStationary solve(const SystemConfig& config, int k_max = kDefaultKMax,
                      const StationaryOptions& options = {});

}  // namespace crn::oracle
