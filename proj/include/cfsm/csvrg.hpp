#ifndef CFSM_CSVRG_HPP
#define CFSM_CSVRG_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <type_traits>
#include <variant>
#include <vector>

#include "cfsm/core.hpp"
#include "cfsm/rng.hpp"

namespace cfsm {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Inner iteration counts from the accuracy guarantee (see theoretical_schedule).
struct TheoreticalSchedule {
  double epsilon = 0.0;
};
/// Same T at every stage.
struct FixedSchedule {
  std::size_t T = 100;
};
/// T[i-1] is the inner count of stage i; entry 0 is unused.
struct CustomSchedule {
  std::vector<std::size_t> T;
};
using Schedule = std::variant<TheoreticalSchedule, FixedSchedule, CustomSchedule>;

/// gamma_t = 4 / (mu (t + beta)).
struct TheoreticalStep {};
/// gamma_t = base_step / (i * t), t counted from 1.
struct PracticalStep {
  double base_step = 0.0;
};
using StepMode = std::variant<TheoreticalStep, PracticalStep>;

struct CsvrgConfig {
  double alpha = 0.3;  // replaced by the derived value under TheoreticalSchedule
  Schedule schedule = FixedSchedule{};
  StepMode step = TheoreticalStep{};
  std::uint64_t seed = 0;
  std::optional<double> beta;       // default 72 L^2 / mu^2
  double stage1_epsilon = 1e-8;     // replaced by epsilon under TheoreticalSchedule
  std::optional<Eigen::VectorXd> x0;  // default: projection of the origin

  void validate() const {
    if (!std::holds_alternative<TheoreticalSchedule>(schedule) && !(alpha > 0 && alpha < 1))
      throw InvalidConfig("csvrg: alpha must lie in (0, 1)");
    if (const auto* fixed = std::get_if<FixedSchedule>(&schedule); fixed && fixed->T < 1)
      throw InvalidConfig("csvrg: fixed T must be >= 1");
    if (const auto* custom = std::get_if<CustomSchedule>(&schedule)) {
      for (std::size_t k = 1; k < custom->T.size(); ++k)
        if (custom->T[k] < 1) throw InvalidConfig("csvrg: custom T values must be >= 1");
    }
    if (const auto* theory = std::get_if<TheoreticalSchedule>(&schedule);
        theory && !(theory->epsilon > 0 && std::isfinite(theory->epsilon)))
      throw InvalidConfig("csvrg: theoretical schedule needs a finite epsilon > 0");
    if (const auto* practical = std::get_if<PracticalStep>(&step); practical && !(practical->base_step > 0))
      throw InvalidConfig("csvrg: practical base_step must be positive");
    if (beta && !(*beta >= 1)) throw InvalidConfig("csvrg: beta must be >= 1");
    if (!(stage1_epsilon > 0)) throw InvalidConfig("csvrg: stage-1 epsilon must be positive");
  }
};

/// Averaging parameters of one FUM call.
///
/// The output is sum_{t=0}^{T-1} (t + beta - 1) x^{t+1} / Z with
/// Z = sum_{t=0}^{T-1} (t + beta - 1) = T(T-1)/2 + T(beta - 1), so the
/// weights form a convex combination.
template <typename Scalar = double>
struct FumParams {
  Scalar beta{};
  std::size_t T = 0;
  Scalar Z{};

  static FumParams make(Scalar beta, std::size_t T) {
    if (T < 1) throw InvalidConfig("fum: T must be >= 1");
    if (!(beta >= 1)) throw InvalidConfig("fum: beta must be >= 1");
    const auto t = static_cast<Scalar>(T);
    const Scalar Z = t * (t - 1) / 2 + t * (beta - 1);
    if (!(Z > 0)) throw InvalidConfig("fum: beta = 1 with T = 1 leaves nothing to average");
    return {beta, T, Z};
  }

  static Scalar default_beta(const Constants<Scalar>& c) { return 72 * c.L * c.L / (c.mu * c.mu); }

  Scalar weight(std::size_t t) const { return (static_cast<Scalar>(t) + beta - 1) / Z; }
};

/// Result of theoretical_schedule.
struct ScheduleEntry {
  std::size_t T = 0;
  double alpha = 0.0;
};

/// T_i = ceil(720 G L^2 / (mu^{5/2} i sqrt(eps)) + 9 L^{2/3} G^{2/3} / (eps^{1/3} mu) + 864 L^2 / mu^2),
/// alpha = mu eps^{1/3} / (20 G^{2/3} L^{2/3}), clamped into (0, 1).
inline ScheduleEntry theoretical_schedule(double mu, double L, double G, double epsilon, std::size_t i) {
  if (!(mu > 0) || !(L >= mu) || !(G > 0) || !(epsilon > 0) || i < 1)
    throw InvalidConfig("theoretical_schedule: need mu > 0, L >= mu, G > 0, epsilon > 0, i >= 1");
  if (!std::isfinite(L) || !std::isfinite(G) || !std::isfinite(epsilon))
    throw InvalidConfig("theoretical_schedule: constants must be finite");
  const double stage = static_cast<double>(i);
  const double t = 720.0 * G * L * L / (std::pow(mu, 2.5) * stage * std::sqrt(epsilon)) +
                   9.0 * std::cbrt(L * L) * std::cbrt(G * G) / (std::cbrt(epsilon) * mu) +
                   864.0 * L * L / (mu * mu);
  double alpha = mu * std::cbrt(epsilon) / (20.0 * std::cbrt(G * G) * std::cbrt(L * L));
  alpha = std::clamp(alpha, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
  return {static_cast<std::size_t>(std::ceil(t)), alpha};
}

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

/// (1 - 1/i)(grad f_u(x_cur) - grad f_u(x_prev_hat) + agg) + (1/i) grad f_i(x_cur). 3 FOs.
template <typename Scalar>
VectorX<Scalar> estimator(const ComponentStream<Scalar>& stream, std::size_t i, std::size_t u,
                          const VectorX<Scalar>& x_cur, const VectorX<Scalar>& x_prev_hat,
                          const VectorX<Scalar>& agg, FoLedger& ledger) {
  if (i < 2) throw InvalidStage("estimator: defined for stages i >= 2");
  stream.check_stage(i);
  if (u < 1 || u > i - 1) throw InvalidInput("estimator: u must lie in [1, i-1]");
  if (agg.size() != stream.dimension()) throw InvalidInput("estimator: aggregate dimension mismatch");
  const Scalar keep = Scalar(1) - Scalar(1) / static_cast<Scalar>(i);
  VectorX<Scalar> at_cur(stream.dimension()), at_prev(stream.dimension()), newest(stream.dimension());
  stream.gradient(u, x_cur, at_cur, ledger);
  stream.gradient(u, x_prev_hat, at_prev, ledger);
  stream.gradient(i, x_cur, newest, ledger);
  return keep * (at_cur - at_prev + agg) + newest / static_cast<Scalar>(i);
}

/// (1 - 1/i) agg + (1/i) grad_new. The caller pays the 1 FO for grad_new.
template <typename Scalar>
VectorX<Scalar> aggregate_cheap_update(const VectorX<Scalar>& agg, const VectorX<Scalar>& grad_new,
                                       std::size_t i) {
  if (i < 2) throw InvalidStage("aggregate_cheap_update: defined for stages i >= 2");
  if (agg.size() != grad_new.size()) throw InvalidInput("aggregate_cheap_update: dimension mismatch");
  const Scalar inv = Scalar(1) / static_cast<Scalar>(i);
  return (Scalar(1) - inv) * agg + inv * grad_new;
}

/// State of the algorithm observed by taps. `round` is the FUM round (0-based)
/// or npos at the entry of the FUM call / the end of a stage.
template <typename Scalar = double>
struct CsvrgSnapshot {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t stage = 0;
  std::size_t round = npos;
  std::size_t prev = 0;
  VectorX<Scalar> x_cur;
  VectorX<Scalar> x_prev_hat;
  VectorX<Scalar> agg;
};

template <typename Scalar = double>
struct CsvrgTap {
  using Callback = std::function<void(const CsvrgSnapshot<Scalar>&)>;
  Callback on_fum_entry;  // before FUM; agg is the stage-(i-1) aggregate
  Callback on_round;      // before each estimator evaluation
  Callback on_stage_end;  // after the aggregate is advanced to stage i
};

/// Inputs of one FUM call at stage i.
template <typename Scalar = double>
struct FumInputs {
  std::size_t stage = 0;
  std::size_t prev = 0;
  const VectorX<Scalar>* agg = nullptr;         // aggregate for stage i-1
  const VectorX<Scalar>* x_init = nullptr;      // x̂_{i-1}
  const VectorX<Scalar>* x_prev_hat = nullptr;  // x̂_prev
};

/// Frequent update method: T variance-reduced projected steps, weighted-average output.
/// Costs exactly 3T FOs.
template <typename Scalar>
VectorX<Scalar> fum_stage(const ComponentStream<Scalar>& stream, const Domain<Scalar>& domain,
                          const FumInputs<Scalar>& in, const FumParams<Scalar>& params, const StepMode& step,
                          Rng& rng, FoLedger& ledger, const CsvrgTap<Scalar>* tap = nullptr) {
  if (in.stage < 2) throw InvalidStage("fum_stage: defined for stages i >= 2");
  if (params.T < 1) throw InvalidConfig("fum_stage: T must be >= 1");
  if (!in.agg || !in.x_init || !in.x_prev_hat) throw InvalidInput("fum_stage: missing inputs");
  const std::size_t i = in.stage;
  const Scalar mu = stream.constants().mu;

  VectorX<Scalar> x = *in.x_init;
  VectorX<Scalar> average = VectorX<Scalar>::Zero(x.size());
  for (std::size_t t = 0; t < params.T; ++t) {
    if (tap && tap->on_round) tap->on_round({i, t, in.prev, x, *in.x_prev_hat, *in.agg});
    const std::size_t u = rng.uniform_index(1, i - 1);
    const VectorX<Scalar> direction = estimator(stream, i, u, x, *in.x_prev_hat, *in.agg, ledger);
    const Scalar gamma = std::visit(
        [&](const auto& mode) -> Scalar {
          using Mode = std::decay_t<decltype(mode)>;
          if constexpr (std::is_same_v<Mode, TheoreticalStep>) {
            return Scalar(4) / (mu * (static_cast<Scalar>(t) + params.beta));
          } else {
            return static_cast<Scalar>(mode.base_step) / (static_cast<Scalar>(i) * static_cast<Scalar>(t + 1));
          }
        },
        step);
    x = project(domain, VectorX<Scalar>(x - gamma * direction));
    average += params.weight(t) * x;
  }
  return average;
}

/// Projected gradient descent on f_1 with step 1/L_1.
///
/// Stops once ||G(x)||^2 / (2 mu) <= epsilon, where G is the gradient mapping
/// (the gradient itself when unconstrained), or after
/// ceil((L_1/mu) ln(L_1 r^2 / epsilon)) steps with r = 2 ||G(x_0)|| / mu.
template <typename Scalar>
std::pair<VectorX<Scalar>, std::size_t> first_stage_descent(const ComponentStream<Scalar>& stream,
                                                            const Domain<Scalar>& domain,
                                                            const VectorX<Scalar>& x0, Scalar epsilon,
                                                            FoLedger& ledger) {
  const Scalar smooth = stream.component_smoothness(1);
  const Scalar mu = stream.constants().mu;
  const Scalar step = Scalar(1) / smooth;
  VectorX<Scalar> x = project(domain, x0);
  VectorX<Scalar> grad = stream.gradient(1, x, ledger);
  auto mapping_norm = [&]() { return (smooth * (x - project(domain, VectorX<Scalar>(x - step * grad)))).norm(); };

  Scalar norm = mapping_norm();
  if (norm * norm / (2 * mu) <= epsilon) return {x, 0};
  const Scalar radius = 2 * norm / mu;
  const Scalar ratio = std::max(std::exp(Scalar(1)), smooth * radius * radius / epsilon);
  const auto cap = static_cast<std::size_t>(std::ceil((smooth / mu) * std::log(ratio)));

  std::size_t steps = 0;
  while (steps < std::max<std::size_t>(cap, 1)) {
    x = project(domain, VectorX<Scalar>(x - step * grad));
    ++steps;
    stream.gradient(1, x, grad, ledger);
    norm = mapping_norm();
    if (norm * norm / (2 * mu) <= epsilon) break;
  }
  return {x, steps};
}

// ---------------------------------------------------------------------------
// The continual loop
// ---------------------------------------------------------------------------

struct CsvrgFoBreakdown {
  std::uint64_t stage1 = 0;     // descent on f_1 plus the initial aggregate
  std::uint64_t fum = 0;        // 3 per inner round
  std::uint64_t recompute = 0;  // (i-1) + i per full recompute at stage i
  std::uint64_t cheap = 0;      // 1 per cheap aggregate update

  std::uint64_t total() const noexcept { return stage1 + fum + recompute + cheap; }
};

template <typename Scalar = double>
struct CsvrgRun : ContinualRun<Scalar> {
  std::vector<std::size_t> recompute_stages;
  std::vector<std::size_t> inner_iterations;  // T_i per stage; entry 0 holds the stage-1 descent steps
  CsvrgFoBreakdown fos;
  double alpha = 0.0;
};

template <typename Scalar>
CsvrgRun<Scalar> csvrg_run(const ComponentStream<Scalar>& stream, const Domain<Scalar>& domain,
                           const CsvrgConfig& config, const CsvrgTap<Scalar>& tap = {}) {
  config.validate();
  const std::size_t n = stream.size();
  if (n < 1) throw InvalidInput("csvrg_run: empty stream");
  if (domain.dimension() != stream.dimension()) throw InvalidInput("csvrg_run: domain dimension mismatch");
  const Constants<Scalar> constants = stream.constants();
  constants.validate();

  const auto* theory = std::get_if<TheoreticalSchedule>(&config.schedule);
  if (theory && !domain.bounded())
    throw InvalidConfig("csvrg_run: the theoretical schedule needs a bounded domain");
  const double alpha =
      theory ? theoretical_schedule(constants.mu, constants.L, constants.G, theory->epsilon, 1).alpha : config.alpha;
  const Scalar beta = config.beta ? static_cast<Scalar>(*config.beta) : FumParams<Scalar>::default_beta(constants);
  const Scalar stage1_eps = static_cast<Scalar>(theory ? theory->epsilon : config.stage1_epsilon);

  auto inner_count = [&](std::size_t i) -> std::size_t {
    if (theory) return theoretical_schedule(constants.mu, constants.L, constants.G, theory->epsilon, i).T;
    if (const auto* fixed = std::get_if<FixedSchedule>(&config.schedule)) return fixed->T;
    const auto& table = std::get<CustomSchedule>(config.schedule).T;
    if (i > table.size()) throw InvalidConfig("csvrg_run: custom schedule shorter than the stream");
    return table[i - 1];
  };

  CsvrgRun<Scalar> run;
  run.alpha = alpha;
  run.outputs.reserve(n);
  run.records.reserve(n);
  run.inner_iterations.reserve(n);
  FoLedger ledger;
  using Clock = std::chrono::steady_clock;

  auto finish_stage = [&](std::size_t i, Clock::time_point started) {
    RunRecord record;
    record.stage = i;
    record.method = "csvrg";
    record.cum_fos = ledger.count();
    record.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
    run.records.push_back(std::move(record));
  };

  // Stage 1: descent on f_1, then the exact aggregate at its output.
  auto started = Clock::now();
  const VectorX<Scalar> x0 =
      config.x0 ? VectorX<Scalar>(config.x0->template cast<Scalar>()) : VectorX<Scalar>::Zero(stream.dimension());
  auto [x_first, descent_steps] = first_stage_descent(stream, domain, x0, stage1_eps, ledger);
  VectorX<Scalar> agg = stream.gradient(1, x_first, ledger);
  run.fos.stage1 = ledger.count();
  run.inner_iterations.push_back(descent_steps);
  run.outputs.push_back(std::move(x_first));
  std::size_t prev = 1;
  VectorX<Scalar> x_prev_hat = run.outputs.back();
  finish_stage(1, started);
  if (tap.on_stage_end) tap.on_stage_end({1, CsvrgSnapshot<Scalar>::npos, prev, run.outputs.back(), x_prev_hat, agg});

  VectorX<Scalar> grad(stream.dimension());
  for (std::size_t i = 2; i <= n; ++i) {
    started = Clock::now();
    bool update = false;
    if (static_cast<double>(i - prev) >= alpha * static_cast<double>(i)) {
      const std::uint64_t before = ledger.count();
      agg = prefix_gradient(stream, i - 1, run.outputs[i - 2], ledger);
      run.fos.recompute += ledger.count() - before;
      prev = i - 1;
      x_prev_hat = run.outputs[i - 2];
      update = true;
    }
    if (tap.on_fum_entry) tap.on_fum_entry({i, CsvrgSnapshot<Scalar>::npos, prev, run.outputs[i - 2], x_prev_hat, agg});

    const std::size_t T = inner_count(i);
    run.inner_iterations.push_back(T);
    const FumParams<Scalar> params = FumParams<Scalar>::make(beta, T);
    Rng rng(derive_seed(config.seed, i));
    const FumInputs<Scalar> inputs{i, prev, &agg, &run.outputs[i - 2], &x_prev_hat};
    std::uint64_t before = ledger.count();
    VectorX<Scalar> x_hat = fum_stage(stream, domain, inputs, params, config.step, rng, ledger, &tap);
    run.fos.fum += ledger.count() - before;
    run.outputs.push_back(std::move(x_hat));

    before = ledger.count();
    if (update) {
      agg = prefix_gradient(stream, i, run.outputs.back(), ledger);
      run.fos.recompute += ledger.count() - before;
      prev = i;
      x_prev_hat = run.outputs.back();
      run.recompute_stages.push_back(i);
    } else {
      stream.gradient(i, x_prev_hat, grad, ledger);
      agg = aggregate_cheap_update(agg, grad, i);
      run.fos.cheap += ledger.count() - before;
    }
    finish_stage(i, started);
    if (tap.on_stage_end) tap.on_stage_end({i, CsvrgSnapshot<Scalar>::npos, prev, run.outputs.back(), x_prev_hat, agg});
  }
  return run;
}

}  // namespace cfsm

#endif  // CFSM_CSVRG_HPP
