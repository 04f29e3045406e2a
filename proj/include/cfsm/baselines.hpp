#ifndef CFSM_BASELINES_HPP
#define CFSM_BASELINES_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cfsm/core.hpp"
#include "cfsm/rng.hpp"

namespace cfsm {

/// Which components SGD samples at stage i.
enum class SgdSampling {
  kPrefix,         // Unif{1..i}
  kExcludeNewest,  // Unif{1..i-1} (Unif{1} at i = 1), as printed in the original pseudocode
};

/// T rounds of x^t = Pi(x^{t-1} - gamma grad f_{j_t}(x^{t-1}) / t); returns the
/// uniform average of x^1..x^T. Costs T FOs.
template <typename Scalar>
VectorX<Scalar> sgd_stage(const ComponentStream<Scalar>& stream, const Domain<Scalar>& domain, std::size_t i,
                          const VectorX<Scalar>& x_init, Scalar gamma, std::size_t T, Rng& rng, FoLedger& ledger,
                          SgdSampling sampling = SgdSampling::kPrefix) {
  stream.check_stage(i);
  if (T < 1) throw InvalidConfig("sgd_stage: T must be >= 1");
  if (!(gamma > 0)) throw InvalidConfig("sgd_stage: gamma must be positive");
  const std::size_t top = (sampling == SgdSampling::kExcludeNewest && i > 1) ? i - 1 : i;
  VectorX<Scalar> x = x_init;
  VectorX<Scalar> grad(stream.dimension());
  VectorX<Scalar> average = VectorX<Scalar>::Zero(x.size());
  for (std::size_t t = 1; t <= T; ++t) {
    const std::size_t j = rng.uniform_index(1, top);
    stream.gradient(j, x, grad, ledger);
    x = project(domain, VectorX<Scalar>(x - (gamma / static_cast<Scalar>(t)) * grad));
    average += x;
  }
  return average / static_cast<Scalar>(T);
}

/// Per-stage budget table: a single entry applies to every stage, otherwise T[i-1] is stage i.
inline std::size_t budget_at(const std::vector<std::size_t>& table, std::size_t i) {
  if (table.empty()) throw InvalidConfig("empty iteration budget");
  if (table.size() == 1) return table.front();
  if (i > table.size()) throw InvalidConfig("iteration budget shorter than the stream");
  return table[i - 1];
}

struct SgdConfig {
  double gamma = 1.0;
  std::vector<std::size_t> T{100};
  std::uint64_t seed = 0;
  SgdSampling sampling = SgdSampling::kPrefix;
};

namespace detail {

template <typename Scalar>
RunRecord stage_record(std::size_t i, const char* method, const FoLedger& ledger,
                       std::chrono::steady_clock::time_point started) {
  RunRecord record;
  record.stage = i;
  record.method = method;
  record.cum_fos = ledger.count();
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

template <typename Scalar>
VectorX<Scalar> origin_start(const ComponentStream<Scalar>& stream, const Domain<Scalar>& domain) {
  if (domain.dimension() != stream.dimension()) throw InvalidInput("domain dimension mismatch");
  return project(domain, VectorX<Scalar>(VectorX<Scalar>::Zero(stream.dimension())));
}

}  // namespace detail

/// SGD at every stage, warm-started from the previous output.
template <typename Scalar>
ContinualRun<Scalar> sgd_run(const ComponentStream<Scalar>& stream, const Domain<Scalar>& domain,
                             const SgdConfig& config) {
  ContinualRun<Scalar> run;
  FoLedger ledger;
  VectorX<Scalar> x = detail::origin_start(stream, domain);
  for (std::size_t i = 1; i <= stream.size(); ++i) {
    const auto started = std::chrono::steady_clock::now();
    Rng rng(derive_seed(config.seed, i));
    x = sgd_stage(stream, domain, i, x, static_cast<Scalar>(config.gamma), budget_at(config.T, i), rng, ledger,
                  config.sampling);
    run.outputs.push_back(x);
    run.records.push_back(detail::stage_record<Scalar>(i, "sgd", ledger, started));
  }
  return run;
}

struct SgdSparseConfig {
  double alpha = 0.002;
  std::vector<std::size_t> T{414};  // indexed by stage, single entry = uniform
  double gamma = 1.0;
  std::uint64_t seed = 0;
  SgdSampling sampling = SgdSampling::kPrefix;

  void validate() const {
    if (!(alpha > 0)) throw InvalidConfig("sgd-sparse: alpha must be positive");
    if (T.empty() || std::any_of(T.begin(), T.end(), [](std::size_t t) { return t < 1; }))
      throw InvalidConfig("sgd-sparse: T values must be >= 1");
    if (!(gamma > 0)) throw InvalidConfig("sgd-sparse: gamma must be positive");
  }
};

/// Stages at which SGD-sparse runs SGD: those with prev (1 + alpha) < i.
inline std::vector<std::size_t> sgd_sparse_invocations(std::size_t n, double alpha) {
  std::vector<std::size_t> stages;
  std::size_t prev = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (static_cast<double>(prev) * (1.0 + alpha) < static_cast<double>(i)) {
      stages.push_back(i);
      prev = i;
    }
  }
  return stages;
}

/// alpha = epsilon / (2 |D| G). Requires a bounded domain.
template <typename Scalar>
double sgd_sparse_theoretical_alpha(const Domain<Scalar>& domain, double G, double epsilon) {
  if (!domain.bounded()) throw InvalidConfig("sgd-sparse: theoretical alpha needs a bounded domain");
  if (!(G > 0) || !(epsilon > 0)) throw InvalidConfig("sgd-sparse: need G > 0 and epsilon > 0");
  return epsilon / (2.0 * static_cast<double>(domain.diameter()) * G);
}

template <typename Scalar = double>
struct SgdSparseRun : ContinualRun<Scalar> {
  std::vector<std::size_t> invocation_stages;
};

template <typename Scalar>
SgdSparseRun<Scalar> sgd_sparse_run(const ComponentStream<Scalar>& stream, const Domain<Scalar>& domain,
                                    const SgdSparseConfig& config) {
  config.validate();
  SgdSparseRun<Scalar> run;
  FoLedger ledger;
  std::size_t prev = 0;
  VectorX<Scalar> x_prev_hat = detail::origin_start(stream, domain);
  VectorX<Scalar> x_last = x_prev_hat;
  for (std::size_t i = 1; i <= stream.size(); ++i) {
    const auto started = std::chrono::steady_clock::now();
    if (static_cast<double>(prev) * (1.0 + config.alpha) < static_cast<double>(i)) {
      Rng rng(derive_seed(config.seed, i));
      x_last = sgd_stage(stream, domain, i, x_last, static_cast<Scalar>(config.gamma), budget_at(config.T, i), rng,
                         ledger, config.sampling);
      x_prev_hat = x_last;
      prev = i;
      run.invocation_stages.push_back(i);
    } else {
      x_last = x_prev_hat;
    }
    run.outputs.push_back(x_last);
    run.records.push_back(detail::stage_record<Scalar>(i, "sgd_sparse", ledger, started));
  }
  return run;
}

// ---------------------------------------------------------------------------
// Variance-reduced solvers applied to each prefix g_i
// ---------------------------------------------------------------------------

struct VrConfig {
  std::size_t outer = 10;
  std::size_t inner = 100;
  double step = 0.0;

  void validate() const {
    if (outer < 1 || inner < 1) throw InvalidConfig("vr: outer and inner must be >= 1");
    if (!(step > 0) || !std::isfinite(step)) throw InvalidConfig("vr: step must be positive");
  }
};

namespace detail {

/// grad f_j(x) - grad f_j(snapshot) + full, written into out. 2 FOs.
template <typename Scalar>
void svrg_direction(const ComponentStream<Scalar>& stream, std::size_t j, const VectorX<Scalar>& x,
                    const VectorX<Scalar>& snapshot, const VectorX<Scalar>& full, VectorX<Scalar>& scratch,
                    VectorX<Scalar>& out, FoLedger& ledger) {
  stream.gradient(j, x, out, ledger);
  stream.gradient(j, snapshot, scratch, ledger);
  out -= scratch;
  out += full;
}

}  // namespace detail

/// SVRG on g_i: per epoch one full prefix gradient at the snapshot, then
/// `inner` projected steps; the last iterate becomes the next snapshot.
/// Costs outer (i + 2 inner) FOs. With inner = 1 every epoch is one projected
/// full-gradient step.
template <typename Scalar>
VectorX<Scalar> svrg_stage(const ComponentStream<Scalar>& stream, const Domain<Scalar>& domain, std::size_t i,
                           const VectorX<Scalar>& x_init, const VrConfig& config, Rng& rng, FoLedger& ledger) {
  config.validate();
  stream.check_stage(i);
  const auto step = static_cast<Scalar>(config.step);
  VectorX<Scalar> snapshot = x_init;
  VectorX<Scalar> x = x_init;
  VectorX<Scalar> direction(stream.dimension()), scratch(stream.dimension());
  for (std::size_t s = 0; s < config.outer; ++s) {
    const VectorX<Scalar> full = prefix_gradient(stream, i, snapshot, ledger);
    x = snapshot;
    for (std::size_t k = 0; k < config.inner; ++k) {
      const std::size_t j = rng.uniform_index(1, i);
      detail::svrg_direction(stream, j, x, snapshot, full, scratch, direction, ledger);
      x = project(domain, VectorX<Scalar>(x - step * direction));
    }
    snapshot = x;
  }
  return snapshot;
}

/// Optional overrides of the Katyusha momentum weights.
struct KatyushaMomentum {
  std::optional<double> tau1;
  std::optional<double> tau2;
};

/// Katyusha (strongly convex variant) on g_i with step 1/(3L) = config.step:
/// tau2 = 1/2, tau1 = min(sqrt(m mu / (3L)), 1/2), alpha = 1/(3 tau1 L), and the
/// snapshot is the (1 + alpha mu)^j-weighted average of the epoch's y iterates.
/// Projection replaces the proximal steps. Costs outer (i + 2 inner) FOs.
///
/// With tau1 = tau2 = 0 the method degenerates to svrg_stage on the same draws.
template <typename Scalar>
VectorX<Scalar> katyusha_stage(const ComponentStream<Scalar>& stream, const Domain<Scalar>& domain, std::size_t i,
                               const VectorX<Scalar>& x_init, const VrConfig& config, Rng& rng, FoLedger& ledger,
                               const KatyushaMomentum& momentum = {}) {
  config.validate();
  stream.check_stage(i);
  const auto step = static_cast<Scalar>(config.step);  // 1 / (3L)
  const Scalar mu = stream.constants().mu;
  const auto m = static_cast<Scalar>(config.inner);
  const Scalar tau2 = momentum.tau2 ? static_cast<Scalar>(*momentum.tau2) : Scalar(0.5);
  const Scalar tau1 = momentum.tau1 ? static_cast<Scalar>(*momentum.tau1)
                                    : std::min(std::sqrt(m * mu * step), Scalar(0.5));
  const bool plain = tau1 == 0;
  const Scalar alpha = plain ? Scalar(0) : step / tau1;
  const Scalar growth = Scalar(1) + alpha * mu;

  VectorX<Scalar> snapshot = x_init, y = x_init, z = x_init, x = x_init;
  VectorX<Scalar> direction(stream.dimension()), scratch(stream.dimension());
  VectorX<Scalar> weighted(stream.dimension());
  for (std::size_t s = 0; s < config.outer; ++s) {
    const VectorX<Scalar> full = prefix_gradient(stream, i, snapshot, ledger);
    weighted.setZero();
    Scalar weight = 1, weight_sum = 0;
    for (std::size_t k = 0; k < config.inner; ++k) {
      x = tau1 * z + tau2 * snapshot + (Scalar(1) - tau1 - tau2) * y;
      const std::size_t j = rng.uniform_index(1, i);
      detail::svrg_direction(stream, j, x, snapshot, full, scratch, direction, ledger);
      if (!plain) z = project(domain, VectorX<Scalar>(z - alpha * direction));
      y = project(domain, VectorX<Scalar>(x - step * direction));
      weighted += weight * y;
      weight_sum += weight;
      weight *= growth;
    }
    snapshot = plain ? y : VectorX<Scalar>(weighted / weight_sum);
    if (!all_finite(snapshot)) throw NumericError("katyusha_stage: non-finite snapshot");
  }
  return snapshot;
}

enum class VrMethod { kSvrg, kKatyusha };

/// Continual wrapper: at each stage run the VR solver on g_i from x̂_{i-1}.
template <typename Scalar>
ContinualRun<Scalar> vr_run(VrMethod method, const ComponentStream<Scalar>& stream, const Domain<Scalar>& domain,
                            const VrConfig& config, std::uint64_t seed) {
  config.validate();
  ContinualRun<Scalar> run;
  FoLedger ledger;
  VectorX<Scalar> x = detail::origin_start(stream, domain);
  const char* name = method == VrMethod::kSvrg ? "svrg" : "katyusha";
  for (std::size_t i = 1; i <= stream.size(); ++i) {
    const auto started = std::chrono::steady_clock::now();
    Rng rng(derive_seed(seed, i));
    x = method == VrMethod::kSvrg ? svrg_stage(stream, domain, i, x, config, rng, ledger)
                                  : katyusha_stage(stream, domain, i, x, config, rng, ledger);
    run.outputs.push_back(x);
    run.records.push_back(detail::stage_record<Scalar>(i, name, ledger, started));
  }
  return run;
}

}  // namespace cfsm

#endif  // CFSM_BASELINES_HPP
