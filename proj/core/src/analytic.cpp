#include "crn/analytic.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "crn/errors.hpp"
#include "crn/parallel.hpp"

namespace crn::analytic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_occupancy_args(double rho, int m) {
  if (!(rho >= 0.0)) {
    throw DomainError(fmt::format("loading factor must be >= 0, got {}", rho));
  }
  if (m < 1) {
    throw DomainError(fmt::format("buffer capacity must be >= 1, got {}", m));
  }
}

void require_primary_stable(const SystemConfig& config, double mu_p) {
  if (!(config.lambda_p < mu_p)) {
    throw InstabilityError(fmt::format(
        "primary queue unstable: lambda_p = {} >= mu_p = {}", config.lambda_p, mu_p));
  }
}

// Terms of the primary service rate mu_p = direct + relayable * (1 - P_block).
struct PrimaryTerms {
  double direct;
  double relayable;
};

PrimaryTerms primary_terms(const SystemConfig& config) {
  const auto& o = config.outages;
  const double p_d = config.sensing.p_d;
  return {p_d * (1.0 - o.p_pp), p_d * o.p_pp * (1.0 - o.p_ps)};
}

// Relay service per idle-PU slot: psi, times P_d in PaperVerbatim mode.
double relay_service_scale(const SystemConfig& config) {
  return (1.0 - config.outages.p_sp) * (1.0 - config.sensing.p_f) *
         config.idle_slot_sensing_factor();
}

}  // namespace

std::vector<double> occupancy(double rho, int m) {
  check_occupancy_args(rho, m);
  const auto n = static_cast<std::size_t>(m) + 1;
  std::vector<double> pi(n);
  if (std::abs(rho - 1.0) < kUnitLoadGuard) {
    std::fill(pi.begin(), pi.end(), 1.0 / static_cast<double>(n));
    return pi;
  }
  // Geometric weights scaled so the largest is 1; stays finite for any rho,
  // including +inf (all mass at k = m).
  if (rho < 1.0) {
    double w = 1.0;
    for (std::size_t k = 0; k < n; ++k, w *= rho) pi[k] = w;
  } else {
    const double inv = 1.0 / rho;
    double w = 1.0;
    for (std::size_t k = n; k-- > 0; w *= inv) pi[k] = w;
  }
  double total = 0.0;
  for (double w : pi) total += w;
  for (double& p : pi) p /= total;
  return pi;
}

double blocking_probability(double rho, int m) { return occupancy(rho, m).back(); }

double empty_probability(double rho, int m) { return occupancy(rho, m).front(); }

double primary_service_rate(const SystemConfig& config, double rho_ps) {
  const auto [direct, relayable] = primary_terms(config);
  return direct + relayable * (1.0 - blocking_probability(rho_ps, config.m));
}

double relay_arrival_rate(const SystemConfig& config, double mu_p, double rho_ps) {
  require_primary_stable(config, mu_p);
  const auto& o = config.outages;
  return (1.0 - blocking_probability(rho_ps, config.m)) * (config.lambda_p / mu_p) *
         config.sensing.p_d * (1.0 - o.p_ps) * o.p_pp;
}

double relay_service_rate(const SystemConfig& config, double mu_p) {
  require_primary_stable(config, mu_p);
  return (1.0 - config.lambda_p / mu_p) * relay_service_scale(config);
}

double secondary_service_rate(const SystemConfig& config, double rho_ps, double mu_p) {
  require_primary_stable(config, mu_p);
  return empty_probability(rho_ps, config.m) * (1.0 - config.lambda_p / mu_p) *
         config.idle_slot_sensing_factor() * (1.0 - config.outages.p_ss) *
         (1.0 - config.sensing.p_f);
}

double loading_map(const SystemConfig& config, double rho_ps) {
  const double mu_p = primary_service_rate(config, rho_ps);
  return relay_arrival_rate(config, mu_p, rho_ps) / relay_service_rate(config, mu_p);
}

RateSolution evaluate_at(const SystemConfig& config, double rho_ps) {
  RateSolution s;
  s.rho_ps = rho_ps;
  const auto pi = occupancy(rho_ps, config.m);
  s.p_block = pi.back();
  s.p_empty = pi.front();
  s.mu_p = primary_service_rate(config, rho_ps);
  s.primary_stable = config.lambda_p < s.mu_p;
  if (!s.primary_stable) return s;
  s.lambda_ps = relay_arrival_rate(config, s.mu_p, rho_ps);
  s.mu_ps = relay_service_rate(config, s.mu_p);
  s.mu_s = secondary_service_rate(config, rho_ps, s.mu_p);
  s.secondary_stable = config.lambda_s < s.mu_s;
  return s;
}

RateSolution solve_fixed_point(const SystemConfig& config, const SolverOptions& options) {
  require_valid(config);
  const auto [direct, relayable] = primary_terms(config);
  const double lambda_p = config.lambda_p;
  if (!(lambda_p < direct + relayable)) {
    throw NoSolutionError(fmt::format(
        "no stable operating point: lambda_p = {} >= max mu_p = {}", lambda_p,
        direct + relayable));
  }

  // Fixed point of g is a root of
  //   H(rho) = rho * (mu_p - lambda_p) * scale - lambda_p * relayable * (1 - P_block),
  // which has the sign of rho - g(rho) wherever mu_p(rho) > lambda_p.
  const double scale = relay_service_scale(config);
  const double inflow = lambda_p * relayable;

  auto finish = [&](double rho, int iterations) {
    RateSolution s = evaluate_at(config, rho);
    s.iterations = iterations;
    if (std::isinf(rho)) {
      s.residual = 0.0;
    } else if (s.mu_ps > 0.0) {
      s.residual = std::abs(rho - s.lambda_ps / s.mu_ps);
    } else {
      // g(0) = 0 when nothing is relayed, whatever the service rate.
      s.residual = rho == 0.0 && s.lambda_ps == 0.0 ? 0.0 : kInf;
    }
    s.converged = s.primary_stable && s.residual <= options.residual_tolerance;
    return s;
  };

  if (inflow == 0.0) return finish(0.0, 0);

  if (scale == 0.0) {
    // Relay never served: it fills up and blocks forever.
    if (!(lambda_p < direct)) {
      throw NoSolutionError(fmt::format(
          "no stable operating point: relay queue saturates and lambda_p = {} >= {}",
          lambda_p, direct));
    }
    RateSolution s = finish(kInf, 0);
    s.relay_saturated = true;
    return s;
  }

  auto H = [&](double rho) {
    const double mu_p = primary_service_rate(config, rho);
    const double admit = 1.0 - blocking_probability(rho, config.m);
    return rho * (mu_p - lambda_p) * scale - inflow * admit;
  };

  // Upper end of the search range: either the first rho where H > 0 (mu_p
  // stays above lambda_p for all rho) or the point where mu_p hits lambda_p.
  double upper = 1.0;
  bool bounded = false;
  if (lambda_p <= direct) {
    while (!(H(upper) > 0.0)) {
      upper *= 2.0;
      if (upper > 1e300) {
        throw ConvergenceError("failed to bracket the relay loading fixed point");
      }
    }
  } else {
    bounded = true;
    while (primary_service_rate(config, upper) > lambda_p) upper *= 2.0;
    double lo = 0.0;
    double hi = upper;
    for (int i = 0; i < 400 && hi - lo > 0.0; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (primary_service_rate(config, mid) > lambda_p ? lo : hi) = mid;
    }
    upper = lo;  // last rho with mu_p > lambda_p
  }

  // Scan uniformly in t = rho / (1 + rho) for the first sign change, which
  // yields the smallest fixed point.
  const double t_upper = upper / (1.0 + upper);
  const int n = options.scan_points;
  auto rho_at = [&](int i) {
    if (i == n) return upper;
    const double t = t_upper * static_cast<double>(i) / static_cast<double>(n);
    return t / (1.0 - t);
  };
  double lo = 0.0;
  double hi = -1.0;
  double best_value = -kInf;
  int best_index = 0;
  for (int i = 1; i <= n; ++i) {
    const double rho = rho_at(i);
    const double value = H(rho);
    if (value >= 0.0) {
      lo = rho_at(i - 1);
      hi = rho;
      break;
    }
    if (value > best_value) {
      best_value = value;
      best_index = i;
    }
  }

  if (hi < 0.0 && bounded) {
    // A root pair may sit between two grid points; golden-section search for
    // the maximum of H around the best sample.
    double a = rho_at(std::max(best_index - 1, 0));
    double b = rho_at(std::min(best_index + 1, n));
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double hc = H(c);
    double hd = H(d);
    for (int i = 0; i < 200 && b - a > 1e-15 * (1.0 + b); ++i) {
      if (hc >= 0.0 || hd >= 0.0) break;
      if (hc > hd) {
        b = d;
        d = c;
        hd = hc;
        c = b - inv_phi * (b - a);
        hc = H(c);
      } else {
        a = c;
        c = d;
        hc = hd;
        d = a + inv_phi * (b - a);
        hd = H(d);
      }
    }
    if (hc >= 0.0 || hd >= 0.0) {
      lo = rho_at(std::max(best_index - 1, 0));
      hi = hc >= 0.0 ? c : d;
    }
  }

  if (hi < 0.0) {
    throw NoSolutionError(fmt::format(
        "no stable operating point: relay loading equation has no root with "
        "lambda_p = {} < mu_p",
        lambda_p));
  }

  int iterations = 0;
  while (hi - lo > options.interval_tolerance) {
    if (iterations == options.max_iterations) {
      throw ConvergenceError(fmt::format(
          "fixed-point bisection did not reach width {} within {} iterations",
          options.interval_tolerance, options.max_iterations));
    }
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    ++iterations;
    (H(mid) >= 0.0 ? hi : lo) = mid;
  }

  RateSolution at_lo = finish(lo, iterations);
  RateSolution at_hi = finish(hi, iterations);
  if (!at_lo.primary_stable) return at_hi;
  if (!at_hi.primary_stable) return at_lo;
  return at_lo.residual <= at_hi.residual ? at_lo : at_hi;
}

double max_primary_rate(const SystemConfig& config, double tolerance) {
  require_valid(config);
  const auto [direct, relayable] = primary_terms(config);
  auto feasible = [&](double lambda_p) {
    SystemConfig probe = config;
    probe.lambda_p = lambda_p;
    try {
      const auto s = solve_fixed_point(probe);
      return s.converged && s.primary_stable;
    } catch (const NoSolutionError&) {
      return false;
    } catch (const ConvergenceError&) {
      return false;
    }
  };
  double lo = direct;
  double hi = direct + relayable;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

std::vector<double> uniform_grid(double upper, std::size_t n) {
  std::vector<double> grid(n);
  if (n == 1) {
    grid[0] = 0.0;
    return grid;
  }
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = upper * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return grid;
}

namespace {

BoundaryPoint fixed_point_boundary(const SystemConfig& config, double lambda_p) {
  SystemConfig probe = config;
  probe.lambda_p = lambda_p;
  BoundaryPoint point{lambda_p, 0.0, kNaN, kNaN, false};
  try {
    const auto s = solve_fixed_point(probe);
    point.rho_ps = s.rho_ps;
    point.mu_p = s.mu_p;
    point.converged = s.converged;
    if (s.converged) point.lambda_s_max = s.mu_s;
  } catch (const NoSolutionError&) {
  } catch (const ConvergenceError&) {
  }
  return point;
}

// Closed-form boundary: relay loading approximated by
// x = phi * lambda_p / (psi * (1 - lambda_p / mu_p)) with the blocking-free
// mu_p = P_d (1 - p_pp p_ps), and lambda_s < P_empty(x) (1 - lambda_p/mu_p)
// (1 - p_f)(1 - p_ss).
BoundaryPoint closed_form_boundary(const SystemConfig& config, double lambda_p) {
  const auto aux = auxiliary(config);
  const auto [direct, relayable] = primary_terms(config);
  const double mu_p = direct + relayable;
  BoundaryPoint point{lambda_p, 0.0, kNaN, mu_p, false};
  if (!(lambda_p < mu_p)) return point;
  const double idle = 1.0 - lambda_p / mu_p;
  const double numerator = aux.phi * lambda_p;
  const double x = numerator == 0.0 ? 0.0 : numerator / (aux.psi * idle);
  point.rho_ps = x;
  point.lambda_s_max = empty_probability(x, config.m) * idle *
                       (1.0 - config.sensing.p_f) * (1.0 - config.outages.p_ss);
  point.converged = true;
  return point;
}

}  // namespace

RegionBoundary trace_region_on(const SystemConfig& config,
                               std::span<const double> lambda_p_grid,
                               BoundaryMethod method, unsigned threads) {
  require_valid(config);
  for (std::size_t i = 1; i < lambda_p_grid.size(); ++i) {
    if (!(lambda_p_grid[i] > lambda_p_grid[i - 1])) {
      throw DomainError("lambda_p grid must be strictly increasing");
    }
  }
  RegionBoundary boundary;
  boundary.m = config.m;
  boundary.method = method;
  boundary.points.resize(lambda_p_grid.size());
  parallel_for(lambda_p_grid.size(), threads, [&](std::size_t i) {
    boundary.points[i] = method == BoundaryMethod::FixedPoint
                             ? fixed_point_boundary(config, lambda_p_grid[i])
                             : closed_form_boundary(config, lambda_p_grid[i]);
  });
  return boundary;
}

RegionBoundary trace_region(const SystemConfig& config, std::size_t n_points,
                            BoundaryMethod method, unsigned threads) {
  const double upper = max_primary_rate(config) * kBoundaryEdgeFactor;
  // A zero-width region degenerates to its origin.
  const auto grid = uniform_grid(upper, upper > 0.0 ? n_points : 1);
  return trace_region_on(config, grid, method, threads);
}

}  // namespace crn::analytic
