#include "crn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "crn/errors.hpp"

namespace crn::oracle {

Chain Chain::from_dense(const std::vector<std::vector<double>>& rows) {
  Chain c;
  c.n_states = rows.size();
  c.row_start.push_back(0);
  for (const auto& row : rows) {
    if (row.size() != rows.size()) {
      throw DomainError("transition matrix must be square");
    }
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] != 0.0) {
        c.column.push_back(j);
        c.probability.push_back(row[j]);
      }
    }
    c.row_start.push_back(c.column.size());
  }
  return c;
}

double Chain::max_row_defect() const {
  double worst = 0.0;
  for (std::size_t r = 0; r < n_states; ++r) {
    double sum = 0.0;
    for (auto k = row_start[r]; k < row_start[r + 1]; ++k) sum += probability[k];
    worst = std::max(worst, std::abs(1.0 - sum));
  }
  return worst;
}

namespace {

struct Successor {
  int q_p;
  int q_ps;
  double probability;
};

// One slot of the dominant system from end-of-slot state (q_p, q_ps).
// Mirrors sim::simulate with dominant = true.
template <typename Emit>
void for_each_successor(const SystemConfig& config, int k_max, int q_p, int q_ps,
                        Emit&& emit) {
  const auto& o = config.outages;
  const double p_d = config.sensing.p_d;
  const double p_f = config.sensing.p_f;
  const int m = config.m;
  const double arrival = q_p < k_max ? config.lambda_p : 0.0;

  for (int a = 0; a <= 1; ++a) {
    const double pa = a == 1 ? arrival : 1.0 - arrival;
    if (pa == 0.0) continue;
    const int qp = q_p + a;
    if (qp > 0) {
      emit(qp - 1, q_ps, pa * p_d * (1.0 - o.p_pp));
      const double relayed = pa * p_d * o.p_pp * (1.0 - o.p_ps);
      if (q_ps < m) {
        emit(qp - 1, q_ps + 1, relayed);
      } else {
        emit(qp, q_ps, relayed);
      }
      emit(qp, q_ps, pa * p_d * o.p_pp * o.p_ps);
      emit(qp, q_ps, pa * (1.0 - p_d));  // collision with the dominant SU
    } else if (q_ps > 0) {
      const double served = pa * (1.0 - p_f) * (1.0 - o.p_sp);
      emit(0, q_ps - 1, served);
      emit(0, q_ps, pa - served);
    } else {
      emit(0, 0, pa);
    }
  }
}

std::vector<double> step(const Chain& chain, const std::vector<double>& pi) {
  std::vector<double> next(chain.n_states, 0.0);
  for (std::size_t r = 0; r < chain.n_states; ++r) {
    const double mass = pi[r];
    if (mass == 0.0) continue;
    for (auto k = chain.row_start[r]; k < chain.row_start[r + 1]; ++k) {
      next[chain.column[k]] += mass * chain.probability[k];
    }
  }
  return next;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

void clip_and_normalize(std::vector<double>& pi) {
  double total = 0.0;
  for (double& p : pi) {
    if (!(p > 0.0)) p = 0.0;
    total += p;
  }
  for (double& p : pi) p /= total;
}

bool direct_solve(const Chain& chain, std::vector<double>& pi) {
  const auto n = static_cast<Eigen::Index>(chain.n_states);
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> triplets;
  triplets.reserve(chain.column.size() + 2 * chain.n_states);
  // Rows of (P^T - I); the balance equation of state 0 is replaced by
  // pi_0 = 1 and the result normalized afterwards. A row of ones would
  // couple every state and destroy the band structure.
  for (std::size_t r = 0; r < chain.n_states; ++r) {
    for (auto k = chain.row_start[r]; k < chain.row_start[r + 1]; ++k) {
      const auto row = static_cast<Eigen::Index>(chain.column[k]);
      if (row != 0) triplets.emplace_back(row, static_cast<Eigen::Index>(r), chain.probability[k]);
    }
    const auto i = static_cast<Eigen::Index>(r);
    triplets.emplace_back(i, i, i == 0 ? 1.0 : -1.0);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) return false;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(0) = 1.0;
  const Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite() || !(x.sum() > 0.0)) return false;
  pi.assign(x.data(), x.data() + n);
  clip_and_normalize(pi);
  return true;
}

}  // namespace

StationaryVector stationary(const Chain& chain, const StationaryOptions& options) {
  if (chain.n_states == 0) throw DomainError("empty chain");
  StationaryVector out;
  out.direct_solve = direct_solve(chain, out.pi);
  if (!out.direct_solve) {
    out.pi.assign(chain.n_states, 1.0 / static_cast<double>(chain.n_states));
  }

  for (;;) {
    auto next = step(chain, out.pi);
    const double change = max_abs_diff(next, out.pi);
    out.residual = change;
    if (change <= options.step_tolerance) break;
    if (out.power_iterations == options.max_power_iterations) break;
    out.pi = std::move(next);
    clip_and_normalize(out.pi);
    ++out.power_iterations;
  }
  if (!(out.residual <= options.residual_tolerance)) {
    throw ConvergenceError(fmt::format(
        "stationary solve stopped with residual {} after {} power iterations",
        out.residual, out.power_iterations));
  }
  return out;
}

DominantChain build_chain(const SystemConfig& config, int k_max) {
  require_valid(config);
  if (k_max < 2) {
    throw DomainError(fmt::format("k_max must be at least 2, got {}", k_max));
  }
  const auto states = static_cast<std::size_t>(k_max + 1) * static_cast<std::size_t>(config.m + 1);
  if (states > kMaxStates) {
    throw DomainError(fmt::format("chain with {} states exceeds the {} state cap", states,
                                  kMaxStates));
  }

  DominantChain dc;
  dc.config = config;
  dc.k_max = k_max;
  dc.m = config.m;
  auto& chain = dc.chain;
  chain.n_states = states;
  chain.row_start.reserve(states + 1);
  chain.row_start.push_back(0);

  std::vector<std::pair<std::size_t, double>> row;
  for (int qp = 0; qp <= k_max; ++qp) {
    for (int qps = 0; qps <= config.m; ++qps) {
      row.clear();
      for_each_successor(config, k_max, qp, qps, [&](int np, int nps, double p) {
        if (p == 0.0) return;
        const auto idx = dc.index(np, nps);
        auto it = std::find_if(row.begin(), row.end(),
                               [idx](const auto& e) { return e.first == idx; });
        if (it == row.end()) {
          row.emplace_back(idx, p);
        } else {
          it->second += p;
        }
      });
      std::sort(row.begin(), row.end());
      for (const auto& [idx, p] : row) {
        chain.column.push_back(idx);
        chain.probability.push_back(p);
      }
      chain.row_start.push_back(chain.column.size());
    }
  }
  return dc;
}

JointStationary stationary(const DominantChain& dc, const StationaryOptions& options) {
  const auto solved = stationary(dc.chain, options);
  const auto& config = dc.config;
  const auto& o = config.outages;
  const double p_d = config.sensing.p_d;
  const double p_f = config.sensing.p_f;

  JointStationary js;
  js.k_max = dc.k_max;
  js.m = dc.m;
  js.pi = solved.pi;
  js.residual = solved.residual;
  js.primary_marginal.assign(static_cast<std::size_t>(dc.k_max + 1), 0.0);
  js.relay_marginal.assign(static_cast<std::size_t>(dc.m + 1), 0.0);

  double tx = 0.0;
  double pu_success = 0.0;
  double admissions = 0.0;
  double relay_opportunity = 0.0;
  double relay_busy = 0.0;
  double su_opportunity = 0.0;
  double idle = 0.0;
  for (int qp = 0; qp <= dc.k_max; ++qp) {
    for (int qps = 0; qps <= dc.m; ++qps) {
      const double mass = js.at(qp, qps);
      js.primary_marginal[static_cast<std::size_t>(qp)] += mass;
      js.relay_marginal[static_cast<std::size_t>(qps)] += mass;
      if (qps > 0) relay_busy += mass;
      const double arrival = qp < dc.k_max ? config.lambda_p : 0.0;
      const double p_busy = qp > 0 ? 1.0 : arrival;
      const double relay_ok = qps < dc.m ? 1.0 : 0.0;
      tx += mass * p_busy;
      pu_success += mass * p_busy * p_d * ((1.0 - o.p_pp) + o.p_pp * (1.0 - o.p_ps) * relay_ok);
      admissions += mass * p_busy * p_d * o.p_pp * (1.0 - o.p_ps) * relay_ok;
      idle += mass * (1.0 - p_busy);
      (qps > 0 ? relay_opportunity : su_opportunity) += mass * (1.0 - p_busy);
    }
  }
  js.truncation_mass = js.primary_marginal.back();

  const double relay_per_opportunity = (1.0 - p_f) * (1.0 - o.p_sp);
  const double su_per_opportunity = (1.0 - p_f) * (1.0 - o.p_ss);
  js.primary_busy = tx;
  if (tx > 0.0) {
    js.mu_p = pu_success / tx;
  } else {
    // No primary traffic: the rate a packet would see against the relay marginal.
    double not_full = 1.0 - js.relay_marginal.back();
    js.mu_p = p_d * ((1.0 - o.p_pp) + o.p_pp * (1.0 - o.p_ps) * not_full);
  }
  js.lambda_ps = admissions;
  js.mu_ps = relay_per_opportunity;
  js.mu_s = su_per_opportunity;
  js.relay_throughput = relay_opportunity * relay_per_opportunity;
  js.mu_ps_queue = relay_busy > 0.0 ? js.relay_throughput / relay_busy
                                    : idle * relay_per_opportunity;
  js.mu_s_queue = su_opportunity * su_per_opportunity;

  if (js.truncation_mass > kMaxTruncationMass) {
    throw TruncationError(
        fmt::format("stationary mass {} at q_p = k_max = {} exceeds {}", js.truncation_mass,
                    dc.k_max, kMaxTruncationMass),
        js.truncation_mass);
  }
  return js;
}

JointStationary solve(const SystemConfig& config, int k_max, const StationaryOptions& options) {
  require_valid(config);
  double previous_mass = 1.0;
  for (;;) {
    try {
      return stationary(build_chain(config, k_max), options);
    } catch (const TruncationError& e) {
      // A stable chain loses boundary mass geometrically as k_max doubles; an
      // unstable one keeps a fixed share there however large k_max gets.
      if (e.truncation_mass() > 0.99 * previous_mass) {
        throw TruncationError(
            fmt::format("{}; it did not shrink when k_max was doubled, the primary queue "
                        "looks unstable",
                        e.what()),
            e.truncation_mass());
      }
      previous_mass = e.truncation_mass();
      const auto next_states =
          static_cast<std::size_t>(2 * k_max + 1) * static_cast<std::size_t>(config.m + 1);
      if (next_states > kMaxStates) throw;
      k_max *= 2;
    }
  }
}

}  // namespace crn::oracle
