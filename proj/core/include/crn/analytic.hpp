#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crn/model.hpp"

namespace crn::analytic {

// Finite-buffer (M/M/1/m) occupancy of the relay queue.
//
// pi_k = (1 - rho) rho^k / (1 - rho^{m+1}), k = 0..m, with the uniform
// 1/(m+1) limit used when |rho - 1| < kUnitLoadGuard.

inline constexpr double kUnitLoadGuard = 1e-9;

std::vector<double> occupancy(double rho, int m);
double blocking_probability(double rho, int m);
double empty_probability(double rho, int m);

// Coupled service/arrival rates. Functions taking mu_p throw
// InstabilityError when lambda_p >= mu_p.

double primary_service_rate(const SystemConfig& config, double rho_ps);
double relay_arrival_rate(const SystemConfig& config, double mu_p, double rho_ps);
double relay_service_rate(const SystemConfig& config, double mu_p);
double secondary_service_rate(const SystemConfig& config, double rho_ps, double mu_p);

struct RateSolution {
  double rho_ps = 0.0;
  double mu_p = 0.0;
  double lambda_ps = 0.0;
  double mu_ps = 0.0;
  double mu_s = 0.0;
  double p_block = 0.0;
  double p_empty = 1.0;
  bool primary_stable = false;
  bool secondary_stable = false;
  double residual = 0.0;  // |rho - g(rho)|
  int iterations = 0;
  bool converged = false;
  /// The relay queue is never served (psi = 0) but keeps receiving packets,
  /// so it saturates: rho_ps is +inf and the buffer is always full.
  bool relay_saturated = false;
};

struct SolverOptions {
  double interval_tolerance = 1e-12;
  int max_iterations = 200;
  double residual_tolerance = 1e-10;
  int scan_points = 2048;
};

/// g(rho) = lambda_ps(rho) / mu_ps(rho), the right-hand side of the relay
/// loading fixed-point equation. Requires lambda_p < mu_p(rho).
double loading_map(const SystemConfig& config, double rho_ps);

/// Assembles every rate at a given relay loading.
RateSolution evaluate_at(const SystemConfig& config, double rho_ps);

/// Finds the smallest rho* = g(rho*) with a stable primary queue by
/// bracketed bisection. Throws NoSolutionError when lambda_p >= mu_p for every
/// feasible rho, ConvergenceError if the residual misses tolerance.
RateSolution solve_fixed_point(const SystemConfig& config,
                               const SolverOptions& options = {});

/// Supremum of lambda_p for which solve_fixed_point succeeds (lambda_p in
/// the config is ignored).
double max_primary_rate(const SystemConfig& config, double tolerance = 1e-8);

enum class BoundaryMethod { FixedPoint, PaperClosedForm };

struct BoundaryPoint {
  double lambda_p = 0.0;
  double lambda_s_max = 0.0;
  double rho_ps = 0.0;
  double mu_p = 0.0;
  bool converged = false;
};

struct RegionBoundary {
  std::vector<BoundaryPoint> points;
  int m = 1;
  BoundaryMethod method = BoundaryMethod::FixedPoint;
};

inline constexpr std::size_t kDefaultBoundaryPoints = 201;
inline constexpr double kBoundaryEdgeFactor = 1.0 - 1e-6;

/// Uniform grid of n points on [0, upper].
std::vector<double> uniform_grid(double upper, std::size_t n);

/// Traces lambda_s_max along the given strictly increasing lambda_p grid.
/// Points where the solver fails are kept with converged = false and
/// lambda_s_max = 0. `threads` = 0 picks the hardware concurrency.
RegionBoundary trace_region_on(const SystemConfig& config,
                               std::span<const double> lambda_p_grid,
                               BoundaryMethod method, unsigned threads = 0);

/// Traces the boundary on n_points uniform points over
/// [0, max_primary_rate * (1 - 1e-6)].
RegionBoundary trace_region(const SystemConfig& config,
                            std::size_t n_points = kDefaultBoundaryPoints,
                            BoundaryMethod method = BoundaryMethod::FixedPoint,
                            unsigned threads = 0);

}  // namespace crn::analytic
