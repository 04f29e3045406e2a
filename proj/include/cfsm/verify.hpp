#ifndef CFSM_VERIFY_HPP
#define CFSM_VERIFY_HPP

// Brute-force oracles for the estimator and aggregate identities, the variance
// and drift bounds, and the lower-bound instance. Oracle gradients go through
// a private shadow ledger, never through the ledger of the run being checked.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cfsm/core.hpp"
#include "cfsm/csvrg.hpp"
#include "cfsm/problems.hpp"

namespace cfsm {

struct OracleReport {
  std::string suite;
  std::size_t cases = 0;
  double max_violation = -std::numeric_limits<double>::infinity();
  double tolerance = 0.0;

  bool pass() const { return cases > 0 && max_violation <= tolerance; }

  void add(double violation) {
    ++cases;
    if (std::isnan(violation)) violation = std::numeric_limits<double>::infinity();
    max_violation = std::max(max_violation, violation);
  }

  void merge(const OracleReport& other) {
    cases += other.cases;
    max_violation = std::max(max_violation, other.max_violation);
  }

  /// `suite,cases,max_violation,tolerance,pass`
  std::string csv_line() const;
};

/// ||a - b|| / max(1, ||b||).
template <typename Scalar>
double relative_error(const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
  return static_cast<double>((a - b).norm() / std::max(Scalar(1), b.norm()));
}

/// (1/m) sum_{k<=m} grad f_k(x), evaluated on a shadow ledger.
template <typename Scalar>
VectorX<Scalar> direct_prefix_gradient(const ComponentStream<Scalar>& stream, std::size_t m, const VectorX<Scalar>& x) {
  FoLedger shadow;
  return prefix_gradient(stream, m, x, shadow);
}

/// Relative gap between the state's aggregate and (1/(i-1)) sum_{k<i} grad f_k(x̂_prev).
template <typename Scalar>
double aggregate_violation(const ComponentStream<Scalar>& stream, const CsvrgSnapshot<Scalar>& state) {
  if (state.stage < 2) throw InvalidStage("aggregate check needs i >= 2");
  return relative_error(state.agg, direct_prefix_gradient(stream, state.stage - 1, state.x_prev_hat));
}

enum class Reachability { kEnforce, kSkip };

inline constexpr double kIdentityTolerance = 1e-10;

/// Averages the estimator over every u in [1, i-1] and compares with grad g_i(x_cur).
template <typename Scalar>
OracleReport unbias_oracle(const ComponentStream<Scalar>& stream, const CsvrgSnapshot<Scalar>& state,
                           Reachability reachability = Reachability::kEnforce) {
  if (state.stage < 2) throw InvalidStage("unbias_oracle: needs i >= 2");
  if (reachability == Reachability::kEnforce && aggregate_violation(stream, state) > kIdentityTolerance)
    throw PreconditionError("unbias_oracle: aggregate is not reachable from x̂_prev");
  FoLedger shadow;
  const std::size_t i = state.stage;
  VectorX<Scalar> mean = VectorX<Scalar>::Zero(stream.dimension());
  for (std::size_t u = 1; u < i; ++u) mean += estimator(stream, i, u, state.x_cur, state.x_prev_hat, state.agg, shadow);
  mean /= static_cast<Scalar>(i - 1);
  OracleReport report{"unbias", 0, -std::numeric_limits<double>::infinity(), kIdentityTolerance};
  report.add(relative_error(mean, prefix_gradient(stream, i, state.x_cur, shadow)));
  return report;
}

/// Constants entering the second-moment bound. L is the per-component smoothness.
struct VarianceBoundInputs {
  double L = 0.0;
  double G = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
};

/// E_u ||est_u - grad g_i(x)||^2 <= 8 L^2 ||x - x*_i||^2 + 64 (L G / mu)^2 a^2 + 16 L^2 ||x*_prev - x̂_prev||^2.
///
/// a = max(alpha, (i - prev)/i): the bound's derivation needs i - prev <= a i, which
/// the recompute branch at small i (prev = i-1, 1 > alpha i) does not provide.
/// The violation is LHS - RHS.
template <typename Scalar>
OracleReport variance_oracle(const ComponentStream<Scalar>& stream, const CsvrgSnapshot<Scalar>& state,
                             const VectorX<Scalar>& optimum_i, const VectorX<Scalar>& optimum_prev,
                             const VarianceBoundInputs& c) {
  if (state.stage < 2) throw InvalidStage("variance_oracle: needs i >= 2");
  if (optimum_i.size() != stream.dimension() || optimum_prev.size() != stream.dimension())
    throw PreconditionError("variance_oracle: exact optima unavailable");
  FoLedger shadow;
  const std::size_t i = state.stage;
  const VectorX<Scalar> exact = prefix_gradient(stream, i, state.x_cur, shadow);
  Scalar second_moment = 0;
  for (std::size_t u = 1; u < i; ++u)
    second_moment += (estimator(stream, i, u, state.x_cur, state.x_prev_hat, state.agg, shadow) - exact).squaredNorm();
  second_moment /= static_cast<Scalar>(i - 1);

  const double window = std::max(c.alpha, static_cast<double>(i - state.prev) / static_cast<double>(i));
  const double L2 = c.L * c.L;
  const double rhs = 8.0 * L2 * static_cast<double>((state.x_cur - optimum_i).squaredNorm()) +
                     64.0 * L2 * c.G * c.G / (c.mu * c.mu) * window * window +
                     16.0 * L2 * static_cast<double>((optimum_prev - state.x_prev_hat).squaredNorm());
  OracleReport report{"variance", 0, -std::numeric_limits<double>::infinity(), kIdentityTolerance};
  report.add(static_cast<double>(second_moment) - rhs);
  return report;
}

/// ||x̂_j - x*_i||^2 - [(8/mu^2)(G(i-j)/(i+j))^2 + 2||x̂_j - x*_j||^2]  (nonpositive when the bound holds).
template <typename Scalar>
double distance_bound_violation(const VectorX<Scalar>& x_hat_j, const VectorX<Scalar>& optimum_j,
                                const VectorX<Scalar>& optimum_i, std::size_t i, std::size_t j, double G, double mu) {
  const double ratio = G * static_cast<double>(i - j) / static_cast<double>(i + j);
  const double rhs = 8.0 / (mu * mu) * ratio * ratio + 2.0 * static_cast<double>((x_hat_j - optimum_j).squaredNorm());
  return static_cast<double>((x_hat_j - optimum_i).squaredNorm()) - rhs;
}

// ---------------------------------------------------------------------------
// Lower-bound demonstration
// ---------------------------------------------------------------------------

/// Minimizes a unimodal function on [lo, hi] by golden-section search.
double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                               double tol = 1e-12, double* argmin = nullptr);

/// min over [-1,1]^2 of the lower-bound prefix g_i (nested golden-section search).
double adversarial_numeric_minimum(std::size_t i);
/// min over {w in [-1,1], z = 0} of the lower-bound prefix g_i.
double adversarial_numeric_axis_minimum(std::size_t i);

struct LowerBoundDemo {
  std::size_t stage = 0;
  std::size_t hidden = 0;
  std::size_t queries_at_stage = 0;
  bool hidden_queried = false;
  bool earlier_outputs_at_origin = true;
  bool second_coordinate_zero = false;
  double measured_gap = 0.0;
  double analytic_bound = 0.0;

  /// Every claim that applies to this run held.
  bool holds() const {
    if (!earlier_outputs_at_origin) return false;
    if (hidden_queried) return true;
    return second_coordinate_zero && measured_gap >= analytic_bound - 1e-12;
  }
};

/// Runs projected SGD (a natural first-order method) from (0,0) on the
/// lower-bound instance with target stage i* = n: one query per earlier stage
/// and floor((i*-1)/2) queries at i*.
LowerBoundDemo lowerbound_demo(std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

struct SuiteOptions {
  std::uint64_t seed = 1;
  std::size_t unbias_states = 50;
  std::size_t variance_states = 200;
  std::size_t aggregate_stages = 500;
  std::size_t drift_instances = 100;
};

const std::vector<std::string>& suite_names();

/// Runs one named suite; throws InvalidInput for unknown names.
OracleReport run_suite(const std::string& name, const SuiteOptions& options = {});

}  // namespace cfsm

#endif  // CFSM_VERIFY_HPP
