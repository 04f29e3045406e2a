#include "cfsm/verify.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cfsm/baselines.hpp"
#include "cfsm/format.hpp"
#include "cfsm/rng.hpp"

namespace cfsm {

std::string OracleReport::csv_line() const {
  return suite + "," + std::to_string(cases) + "," + format_double(max_violation) + "," +
         format_double(tolerance) + "," + (pass() ? "true" : "false");
}

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double tol,
                               double* argmin) {
  if (!(lo <= hi)) throw InvalidInput("golden_section_minimize: need lo <= hi");
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && (b - a) > tol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  // The bracket endpoints are candidates too: the minimum may sit on the boundary.
  double best_x = fc <= fd ? c : d;
  double best = std::min(fc, fd);
  for (double x : {lo, hi}) {
    const double v = f(x);
    if (v < best) best = v, best_x = x;
  }
  if (argmin) *argmin = best_x;
  return best;
}

namespace {

// Prefix value of the lower-bound instance at its target stage, straight from
// the component definitions (no closed forms involved).
double adversarial_prefix(std::size_t i, double w, double z) {
  const AdversarialInstance<double> instance(i, i, 1);
  Eigen::VectorXd x(2);
  x << w, z;
  return prefix_value(instance, i, x);
}

}  // namespace

double adversarial_numeric_minimum(std::size_t i) {
  if (i < 2) throw InvalidInput("adversarial_numeric_minimum: need i >= 2");
  auto over_z = [i](double w) {
    return golden_section_minimize([i, w](double z) { return adversarial_prefix(i, w, z); }, -1.0, 1.0);
  };
  return golden_section_minimize(over_z, -1.0, 1.0);
}

double adversarial_numeric_axis_minimum(std::size_t i) {
  if (i < 2) throw InvalidInput("adversarial_numeric_axis_minimum: need i >= 2");
  return golden_section_minimize([i](double w) { return adversarial_prefix(i, w, 0.0); }, -1.0, 1.0);
}

LowerBoundDemo lowerbound_demo(std::size_t n, std::uint64_t seed) {
  if (n < 4) throw InvalidInput("lowerbound_demo: need n >= 4");
  Rng picker(derive_seed(seed, 0));
  const auto instance = AdversarialInstance<double>::sample(n, n, picker);
  const auto domain = AdversarialInstance<double>::domain();
  const double gamma = 1.0 / instance.constants().mu;

  LowerBoundDemo demo;
  demo.stage = n;
  demo.hidden = instance.hidden();

  FoLedger ledger;
  ledger.enable_log();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  for (std::size_t i = 1; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    x = sgd_stage(instance, domain, i, x, gamma, 1, rng, ledger);
    if (x(0) != 0.0 || x(1) != 0.0) demo.earlier_outputs_at_origin = false;
  }

  ledger.clear_log();
  Rng rng(derive_seed(seed, n));
  x = sgd_stage(instance, domain, n, x, gamma, (n - 1) / 2, rng, ledger);
  demo.queries_at_stage = ledger.log().size();
  for (std::size_t j : ledger.log())
    if (j == demo.hidden) demo.hidden_queried = true;
  demo.second_coordinate_zero = x(1) == 0.0;
  demo.measured_gap = prefix_value(instance, n, x) - prefix_value(instance, n, adversarial_optimum<double>(n));
  demo.analytic_bound = adversarial_gap<double>(n);
  return demo;
}

namespace {

using Vec = Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

OracleReport empty_report(const std::string& name, double tolerance) { return {name, 0, -kInf, tolerance}; }

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); }

QuadraticStream<double> random_quadratic(Rng& rng, std::size_t n, Eigen::Index d) {
  auto centers = random_ball_points<double>(n, d, 1.0, rng);
  std::vector<double> scales(n);
  for (auto& s : scales) s = uniform(rng, 0.5, 2.0);
  return QuadraticStream<double>(std::move(centers), std::move(scales), 1.0);
}

Domain<double> unit_ball(Eigen::Index d) { return Domain<double>::ball(Vec::Zero(d), 1.0); }

/// Runs CSVRG and keeps the state seen at round `round` of stage `stage`.
CsvrgSnapshot<double> capture_state(const ComponentStream<double>& stream, const Domain<double>& domain,
                                    const CsvrgConfig& config, std::size_t stage, std::size_t round) {
  CsvrgSnapshot<double> kept;
  CsvrgTap<double> tap;
  tap.on_round = [&](const CsvrgSnapshot<double>& s) {
    if (s.stage == stage && s.round == round) kept = s;
  };
  csvrg_run(stream, domain, config, tap);
  if (kept.stage != stage) throw NumericError("capture_state: target round never reached");
  return kept;
}

CsvrgConfig practical_config(double alpha, std::size_t T, double base_step, std::uint64_t seed) {
  CsvrgConfig config;
  config.alpha = alpha;
  config.schedule = FixedSchedule{T};
  config.step = PracticalStep{base_step};
  config.seed = seed;
  return config;
}

OracleReport unbias_suite(const SuiteOptions& options) {
  OracleReport report = empty_report("unbias", kIdentityTolerance);
  const std::size_t quadratic_states = (options.unbias_states + 1) / 2;
  for (std::size_t k = 0; k < options.unbias_states; ++k) {
    Rng rng(derive_seed(options.seed, 1000 + k));
    const std::size_t n = rng.uniform_index(2, 200);
    const auto d = static_cast<Eigen::Index>(rng.uniform_index(1, 10));
    const std::size_t T = 3;
    const std::size_t stage = rng.uniform_index(2, n);
    const std::size_t round = rng.uniform_index(0, T - 1);
    const double alpha = uniform(rng, 0.05, 0.5);
    if (k < quadratic_states) {
      const auto stream = random_quadratic(rng, n, d);
      const auto config = practical_config(alpha, T, 1.0 / stream.constants().mu, rng.next());
      report.merge(unbias_oracle<double>(stream, capture_state(stream, unit_ball(d), config, stage, round)));
    } else {
      auto [rows, targets] = synthetic_ridge_data<double>({rng.next(), n, d, 0.1, FeatureDistribution::kGaussian});
      const RidgeStream<double> stream(std::move(rows), std::move(targets), 0.1, 5.0);
      const auto domain = Domain<double>::ball(Vec::Zero(d), 5.0);
      const auto config = practical_config(alpha, T, 1.0 / stream.lambda(), rng.next());
      report.merge(unbias_oracle<double>(stream, capture_state(stream, domain, config, stage, round)));
    }
  }
  return report;
}

OracleReport aggregate_suite(const SuiteOptions& options) {
  OracleReport report = empty_report("aggregate", kIdentityTolerance);
  const std::size_t n = std::max<std::size_t>(options.aggregate_stages, 2);
  auto [rows, targets] = synthetic_ridge_data<double>({derive_seed(options.seed, 2000), n, 10, 0.1,
                                                       FeatureDistribution::kGaussian});
  const RidgeStream<double> stream(std::move(rows), std::move(targets), 1e-3);
  CsvrgConfig config;
  config.alpha = 0.3;
  config.schedule = FixedSchedule{10};
  config.seed = options.seed;

  CsvrgTap<double> tap;
  tap.on_fum_entry = [&](const CsvrgSnapshot<double>& s) { report.add(aggregate_violation(stream, s)); };
  tap.on_stage_end = [&](const CsvrgSnapshot<double>& s) {
    report.add(relative_error(s.agg, direct_prefix_gradient<double>(stream, s.stage, s.x_prev_hat)));
  };
  csvrg_run(stream, Domain<double>::unconstrained(10), config, tap);
  return report;
}

/// Recompute stages implied by the branch rule i - prev >= alpha i with prev = 1 after stage 1.
std::vector<std::size_t> traced_recomputes(std::size_t n, double alpha) {
  std::vector<std::size_t> stages;
  std::size_t prev = 1;
  for (std::size_t i = 2; i <= n; ++i) {
    if (static_cast<double>(i - prev) >= alpha * static_cast<double>(i)) {
      stages.push_back(i);
      prev = i;
    }
  }
  return stages;
}

OracleReport sparsity_suite(const SuiteOptions& options) {
  OracleReport report = empty_report("sparsity", 0.0);
  for (std::size_t n : {10, 100, 1000}) {
    for (double alpha : {0.05, 0.1, 0.3, 0.5}) {
      Rng rng(derive_seed(options.seed, 3000 + n));
      const auto stream = random_quadratic(rng, n, 2);
      CsvrgConfig config;
      config.alpha = alpha;
      config.schedule = FixedSchedule{1};
      config.seed = options.seed;
      const auto run = csvrg_run(stream, unit_ball(2), config);

      const auto events = static_cast<double>(run.recompute_stages.size());
      const double limit = std::ceil(std::log(static_cast<double>(n)) / alpha);
      double violation = events - limit;

      if (run.recompute_stages != traced_recomputes(n, alpha)) violation = std::max(violation, 1.0);

      std::uint64_t recompute = 0;
      for (std::size_t i : run.recompute_stages) recompute += 2 * i - 1;
      std::uint64_t inner = 0;
      for (std::size_t k = 1; k < run.inner_iterations.size(); ++k) inner += run.inner_iterations[k];
      const std::uint64_t cheap = (n - 1) - run.recompute_stages.size();
      const std::uint64_t stage1 = run.inner_iterations.front() + 2;
      const std::uint64_t closed_form = stage1 + 3 * inner + recompute + cheap;
      const std::uint64_t ledger = run.records.back().cum_fos;
      const double mismatch = ledger > closed_form ? static_cast<double>(ledger - closed_form)
                                                   : static_cast<double>(closed_form - ledger);
      violation = std::max(violation, mismatch);
      violation = std::max(violation, static_cast<double>(recompute) - 2.0 * static_cast<double>(n) * limit);
      report.add(violation);
    }
  }
  return report;
}

OracleReport drift_suite(const SuiteOptions& options) {
  OracleReport report = empty_report("drift", 0.0);
  constexpr std::size_t n = 50;
  for (std::size_t k = 0; k < options.drift_instances; ++k) {
    Rng rng(derive_seed(options.seed, 4000 + k));
    const auto d = static_cast<Eigen::Index>(rng.uniform_index(1, 5));
    const auto stream = random_quadratic(rng, n, d);
    const auto c = stream.constants();
    std::vector<Vec> optima;
    for (std::size_t i = 1; i <= n; ++i) optima.push_back(stream.optimum(i));

    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = 1; i + j <= n; ++j)
        report.add((optima[i + j - 1] - optima[i - 1]).norm() - drift_bound(i, j, c.G, c.mu));

    // Distance from an arbitrary feasible x̂_j to a later optimum.
    const auto points = random_ball_points<double>(n, d, 1.0, rng);
    for (std::size_t j = 1; j < n; ++j)
      for (std::size_t i = j + 1; i <= n; ++i)
        report.add(distance_bound_violation<double>(points[j - 1], optima[j - 1], optima[i - 1], i, j, c.G, c.mu));
  }
  return report;
}

OracleReport variance_suite(const SuiteOptions& options) {
  OracleReport report = empty_report("variance", kIdentityTolerance);
  for (std::size_t k = 0; k < options.variance_states; ++k) {
    Rng rng(derive_seed(options.seed, 5000 + k));
    const std::size_t n = rng.uniform_index(2, 60);
    const auto d = static_cast<Eigen::Index>(rng.uniform_index(1, 5));
    const std::size_t T = 3;
    const std::size_t stage = rng.uniform_index(2, n);
    const std::size_t round = rng.uniform_index(0, T - 1);
    const double alpha = uniform(rng, 0.05, 0.5);
    const auto stream = random_quadratic(rng, n, d);
    const auto c = stream.constants();
    const auto config = practical_config(alpha, T, 1.0 / c.mu, rng.next());
    const auto state = capture_state(stream, unit_ball(d), config, stage, round);
    report.merge(variance_oracle<double>(stream, state, stream.optimum(state.stage), stream.optimum(state.prev),
                                         {c.L, c.G, c.mu, alpha}));
  }
  return report;
}

OracleReport adversarial_suite(const SuiteOptions& options) {
  OracleReport report = empty_report("adversarial", 1e-9);
  for (std::size_t i = 2; i <= 50; ++i) {
    const double full = adversarial_numeric_minimum(i);
    const double axis = adversarial_numeric_axis_minimum(i);
    const AdversarialInstance<double> instance(i, i, 1);
    const double closed_value = prefix_value(instance, i, adversarial_optimum<double>(i));
    double violation = std::abs((axis - full) - adversarial_gap<double>(i));
    violation = std::max(violation, std::abs(full - closed_value));
    violation = std::max(violation, std::abs(axis - adversarial_axis_minimum<double>(i).second));
    report.add(violation);
  }
  for (std::size_t n = 4; n <= 40; ++n) {
    const auto demo = lowerbound_demo(n, derive_seed(options.seed, 6000 + n));
    report.add(demo.holds() ? 0.0 : 1.0);
  }
  return report;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"unbias", "aggregate", "sparsity", "drift", "variance", "adversarial"};
  return names;
}

OracleReport run_suite(const std::string& name, const SuiteOptions& options) {
  if (name == "unbias") return unbias_suite(options);
  if (name == "aggregate") return aggregate_suite(options);
  if (name == "sparsity") return sparsity_suite(options);
  if (name == "drift") return drift_suite(options);
  if (name == "variance") return variance_suite(options);
  if (name == "adversarial") return adversarial_suite(options);
  throw InvalidInput("unknown suite '" + name + "'");
}

}  // namespace cfsm
