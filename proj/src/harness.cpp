#include "cfsm/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include <toml.hpp>

#include "cfsm/csvrg.hpp"
#include "cfsm/format.hpp"
#include "cfsm/libsvm.hpp"

namespace cfsm {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  bool present() const { return table_ != nullptr; }

  void allow(std::initializer_list<std::string_view> keys) const {
    if (!table_) return;
    const std::set<std::string_view> allowed(keys);
    for (const auto& [key, node] : *table_)
      if (!allowed.count(key.str())) throw InvalidConfig("[" + name_ + "]: unknown key '" + std::string(key.str()) + "'");
  }

  const toml::node* find(std::string_view key) const { return table_ ? table_->get(key) : nullptr; }

  std::optional<double> real(std::string_view key) const {
    const auto* node = find(key);
    if (!node) return std::nullopt;
    if (auto v = node->value_exact<double>()) return *v;
    if (auto v = node->value_exact<std::int64_t>()) return static_cast<double>(*v);
    throw InvalidConfig(where(key) + " must be a number");
  }

  std::optional<std::int64_t> integer(std::string_view key) const {
    const auto* node = find(key);
    if (!node) return std::nullopt;
    if (auto v = node->value_exact<std::int64_t>()) return *v;
    throw InvalidConfig(where(key) + " must be an integer");
  }

  std::optional<std::size_t> count(std::string_view key, std::int64_t minimum) const {
    const auto v = integer(key);
    if (!v) return std::nullopt;
    if (*v < minimum) throw InvalidConfig(where(key) + " must be >= " + std::to_string(minimum));
    return static_cast<std::size_t>(*v);
  }

  std::optional<std::string> text(std::string_view key) const {
    const auto* node = find(key);
    if (!node) return std::nullopt;
    if (auto v = node->value_exact<std::string>()) return *v;
    throw InvalidConfig(where(key) + " must be a string");
  }

  std::optional<bool> flag(std::string_view key) const {
    const auto* node = find(key);
    if (!node) return std::nullopt;
    if (auto v = node->value_exact<bool>()) return *v;
    throw InvalidConfig(where(key) + " must be a boolean");
  }

  /// Integer budget or the string "match".
  std::optional<std::size_t> budget(std::string_view key, std::optional<std::size_t> fallback) const {
    const auto* node = find(key);
    if (!node) return fallback;
    if (auto s = node->value_exact<std::string>()) {
      if (*s == "match") return std::nullopt;
      throw InvalidConfig(where(key) + " must be a positive integer or \"match\"");
    }
    return count(key, 1);
  }

  std::string where(std::string_view key) const { return "[" + name_ + "] " + std::string(key); }

 private:
  const toml::table* table_;
  std::string name_;
};

template <typename Enum>
Enum choose(const Section& s, std::string_view key, Enum fallback,
            std::initializer_list<std::pair<std::string_view, Enum>> options) {
  const auto value = s.text(key);
  if (!value) return fallback;
  for (const auto& [name, e] : options)
    if (*value == name) return e;
  std::string names;
  for (const auto& [name, e] : options) names += (names.empty() ? "" : ", ") + std::string(name);
  throw InvalidConfig(s.where(key) + " must be one of: " + names);
}

SgdSampling parse_sampling(const Section& s) {
  return choose(s, "sampling", SgdSampling::kPrefix,
                {{"prefix", SgdSampling::kPrefix}, {"exclude_newest", SgdSampling::kExcludeNewest}});
}

const toml::table* subtable(const toml::table& parent, std::string_view key, const std::string& label) {
  const auto* node = parent.get(key);
  if (!node) return nullptr;
  if (!node->is_table()) throw InvalidConfig("[" + label + "] must be a table");
  return node->as_table();
}

VrMethodConfig parse_vr(const Section& s) {
  s.allow({"outer", "inner", "step"});
  VrMethodConfig vr;
  vr.outer = s.count("outer", 1).value_or(vr.outer);
  vr.inner = s.count("inner", 1).value_or(vr.inner);
  vr.step = s.real("step");
  return vr;
}

}  // namespace

std::vector<std::string> ExperimentConfig::methods() const {
  std::vector<std::string> names;
  if (csvrg) names.emplace_back("csvrg");
  if (sgd) names.emplace_back("sgd");
  if (sgd_sparse) names.emplace_back("sgd_sparse");
  if (svrg) names.emplace_back("svrg");
  if (katyusha) names.emplace_back("katyusha");
  return names;
}

void ExperimentConfig::validate() const {
  if (methods().empty()) throw InvalidConfig("at least one method is required");
  if (run.runs < 1) throw InvalidConfig("[run] runs must be >= 1");
  if (problem.kind != ProblemKind::kLibsvm && (!problem.n || *problem.n < 1))
    throw InvalidConfig("[problem] n is required and must be >= 1");
  if (problem.kind == ProblemKind::kLibsvm && problem.path.empty()) throw InvalidConfig("[problem] path is required");
  if (problem.d < 1) throw InvalidConfig("[problem] d must be >= 1");
  if (!(problem.lambda > 0)) throw InvalidConfig("[problem] lambda must be positive");
  if (!(problem.noise >= 0)) throw InvalidConfig("[problem] noise must be nonnegative");
  if (problem.radius && !(*problem.radius > 0 && std::isfinite(*problem.radius)))
    throw InvalidConfig("[problem] radius must be positive and finite");
  if (!(problem.scale_min > 0) || !(problem.scale_max >= problem.scale_min))
    throw InvalidConfig("[problem] need 0 < scale_min <= scale_max");
  if (run.epsilon && !(*run.epsilon > 0)) throw InvalidConfig("[run] epsilon must be positive");
  auto positive = [](const std::optional<double>& v, const char* what) {
    if (v && !(*v > 0 && std::isfinite(*v))) throw InvalidConfig(std::string(what) + " must be positive");
  };
  if (csvrg) {
    if (!csvrg->theoretical_schedule && !(csvrg->alpha > 0 && csvrg->alpha < 1))
      throw InvalidConfig("[methods.csvrg] alpha must lie in (0, 1)");
    if (csvrg->theoretical_schedule && !run.epsilon)
      throw InvalidConfig("[methods.csvrg] the theoretical schedule needs [run] epsilon");
    positive(csvrg->base_step, "[methods.csvrg] base_step");
    if (csvrg->beta && !(*csvrg->beta >= 1)) throw InvalidConfig("[methods.csvrg] beta must be >= 1");
  }
  if (sgd) {
    positive(sgd->gamma, "[methods.sgd] gamma");
    if (!sgd->T && !csvrg) throw InvalidConfig("[methods.sgd] T = \"match\" needs [methods.csvrg]");
  }
  if (sgd_sparse) {
    if (!(sgd_sparse->alpha > 0)) throw InvalidConfig("[methods.sgd_sparse] alpha must be positive");
    positive(sgd_sparse->gamma, "[methods.sgd_sparse] gamma");
    if (!sgd_sparse->T && !csvrg) throw InvalidConfig("[methods.sgd_sparse] T = \"match\" needs [methods.csvrg]");
  }
  positive(svrg ? svrg->step : std::nullopt, "[methods.svrg] step");
  positive(katyusha ? katyusha->step : std::nullopt, "[methods.katyusha] step");
}

ExperimentConfig parse_config(std::string_view toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw ParseError(static_cast<std::size_t>(e.source().begin.line), std::string(e.description()));
  }
  for (const auto& [key, node] : root)
    if (key.str() != "problem" && key.str() != "methods" && key.str() != "run")
      throw InvalidConfig("unknown section '" + std::string(key.str()) + "'");

  ExperimentConfig config;

  const Section problem(subtable(root, "problem", "problem"), "problem");
  if (!problem.present()) throw InvalidConfig("missing [problem] section");
  problem.allow({"kind", "n", "d", "seed", "noise", "distribution", "path", "standardize", "lambda", "radius",
                 "scale_min", "scale_max"});
  auto& p = config.problem;
  p.kind = choose(problem, "kind", ProblemKind::kSyntheticRidge,
                  {{"synthetic_ridge", ProblemKind::kSyntheticRidge},
                   {"libsvm", ProblemKind::kLibsvm},
                   {"quadratic", ProblemKind::kQuadratic}});
  p.n = problem.count("n", 1);
  p.d = static_cast<Eigen::Index>(problem.count("d", 1).value_or(static_cast<std::size_t>(p.d)));
  if (auto seed = problem.integer("seed")) p.seed = static_cast<std::uint64_t>(*seed);
  p.noise = problem.real("noise").value_or(p.noise);
  p.distribution = choose(problem, "distribution", FeatureDistribution::kGaussian,
                          {{"gaussian", FeatureDistribution::kGaussian}, {"uniform", FeatureDistribution::kUniform}});
  p.path = problem.text("path").value_or("");
  p.standardize = problem.flag("standardize").value_or(false);
  p.lambda = problem.real("lambda").value_or(p.lambda);
  if (const auto* node = problem.find("radius"); node && node->is_string()) {
    if (problem.text("radius") != "auto") throw InvalidConfig("[problem] radius must be a number or \"auto\"");
    if (p.kind == ProblemKind::kQuadratic) throw InvalidConfig("[problem] radius = \"auto\" applies to ridge problems");
    p.radius_auto = true;
  } else {
    p.radius = problem.real("radius");
  }
  p.scale_min = problem.real("scale_min").value_or(p.scale_min);
  p.scale_max = problem.real("scale_max").value_or(std::max(p.scale_min, p.scale_max));

  if (const auto* methods = subtable(root, "methods", "methods")) {
    for (const auto& [key, node] : *methods) {
      const std::string name(key.str());
      if (!node.is_table()) throw InvalidConfig("[methods." + name + "] must be a table");
      const Section s(node.as_table(), "methods." + name);
      if (name == "csvrg") {
        s.allow({"alpha", "T", "schedule", "step", "base_step", "beta"});
        CsvrgMethodConfig c;
        c.alpha = s.real("alpha").value_or(c.alpha);
        c.T = s.count("T", 1).value_or(c.T);
        c.theoretical_schedule = choose(s, "schedule", false, {{"fixed", false}, {"theoretical", true}});
        c.theoretical_step = choose(s, "step", false, {{"practical", false}, {"theoretical", true}});
        c.base_step = s.real("base_step");
        c.beta = s.real("beta");
        config.csvrg = c;
      } else if (name == "sgd") {
        s.allow({"T", "gamma", "sampling"});
        SgdMethodConfig c;
        c.T = s.budget("T", std::nullopt);
        c.gamma = s.real("gamma");
        c.sampling = parse_sampling(s);
        config.sgd = c;
      } else if (name == "sgd_sparse") {
        s.allow({"alpha", "T", "gamma", "sampling"});
        SgdSparseMethodConfig c;
        c.alpha = s.real("alpha").value_or(c.alpha);
        c.T = s.budget("T", c.T);
        c.gamma = s.real("gamma");
        c.sampling = parse_sampling(s);
        config.sgd_sparse = c;
      } else if (name == "svrg") {
        config.svrg = parse_vr(s);
      } else if (name == "katyusha") {
        config.katyusha = parse_vr(s);
      } else {
        throw InvalidConfig("unknown method '" + name + "'");
      }
    }
  }

  const Section run(subtable(root, "run", "run"), "run");
  run.allow({"runs", "seed", "output", "epsilon", "timing"});
  config.run.runs = run.count("runs", 1).value_or(config.run.runs);
  if (auto seed = run.integer("seed")) config.run.seed = static_cast<std::uint64_t>(*seed);
  config.run.output = run.text("output").value_or("");
  config.run.epsilon = run.real("epsilon");
  config.run.timing = run.flag("timing").value_or(false);

  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

namespace {

using Vec = Eigen::VectorXd;

/// Immutable problem shared by every seed.
struct Instance {
  std::unique_ptr<ComponentStream<double>> stream;
  std::optional<Domain<double>> domain;
  std::function<double(std::size_t, const Vec&)> gap;
  double default_step = 1.0;  // 1/lambda for ridge, 1/mu otherwise
  double max_smoothness = 0.0;
};

/// lambda ||x*_i||^2 <= g_i(x*_i) <= g_i(0) = mean_{j<=i} b_j^2, so every prefix
/// optimum lies in the origin ball of radius sqrt(max_i mean_{j<=i} b_j^2 / lambda).
double certified_radius(const Vec& targets, double lambda) {
  double sum = 0, worst = 0;
  for (Eigen::Index j = 0; j < targets.size(); ++j) {
    sum += targets(j) * targets(j);
    worst = std::max(worst, sum / static_cast<double>(j + 1));
  }
  return std::max(std::sqrt(worst / lambda), 1e-12);
}

Instance build_ridge(RowMatrixX<double> rows, Vec targets, ProblemConfig p) {
  Instance inst;
  if (p.radius_auto) p.radius = certified_radius(targets, p.lambda);
  const double radius = p.radius.value_or(std::numeric_limits<double>::infinity());
  auto stream = std::make_unique<RidgeStream<double>>(std::move(rows), std::move(targets), p.lambda, radius);
  const auto& rc = stream->ridge_constants();
  if (!rc.converged)
    std::cerr << "warning: power iteration did not converge after " << rc.iterations
              << " iterations; using the best estimate\n";
  auto optima = std::make_shared<RidgeOptima<double>>(*stream);
  inst.gap = [optima](std::size_t i, const Vec& x) { return optima->gap(i, x); };
  inst.default_step = 1.0 / p.lambda;
  inst.max_smoothness = rc.L_component;
  inst.domain = p.radius ? Domain<double>::ball(Vec::Zero(stream->dimension()), *p.radius)
                         : Domain<double>::unconstrained(stream->dimension());
  inst.stream = std::move(stream);
  return inst;
}

Instance build_instance(const ProblemConfig& p) {
  switch (p.kind) {
    case ProblemKind::kSyntheticRidge: {
      auto [rows, targets] = synthetic_ridge_data<double>({p.seed, *p.n, p.d, p.noise, p.distribution});
      if (p.standardize) standardize_features(rows);
      return build_ridge(std::move(rows), std::move(targets), p);
    }
    case ProblemKind::kLibsvm: {
      auto data = parse_libsvm_file(p.path);
      if (p.n) {
        if (*p.n > static_cast<std::size_t>(data.rows.rows()))
          throw InvalidConfig("[problem] n exceeds the number of rows in '" + p.path + "'");
        data.rows.conservativeResize(static_cast<Eigen::Index>(*p.n), Eigen::NoChange);
        data.targets.conservativeResize(static_cast<Eigen::Index>(*p.n));
      }
      if (p.standardize) standardize_features(data.rows);
      return build_ridge(std::move(data.rows), std::move(data.targets), p);
    }
    case ProblemKind::kQuadratic: {
      Rng rng(p.seed);
      const std::size_t n = *p.n;
      auto centers = random_ball_points<double>(n, p.d, 1.0, rng);
      std::vector<double> scales(n);
      for (auto& s : scales) s = p.scale_min + (p.scale_max - p.scale_min) * rng.uniform01();
      const double radius = p.radius.value_or(1.0);
      auto stream = std::make_shared<QuadraticStream<double>>(std::move(centers), scales, radius);
      std::vector<double> weight(n);
      double total = 0;
      for (std::size_t j = 0; j < n; ++j) weight[j] = total += scales[j];
      Instance inst;
      // g_i(x) - g_i(x*_i) = (sum_{j<=i} s_j / i) ||x - x*_i||^2.
      inst.gap = [stream, weight](std::size_t i, const Vec& x) {
        return weight[i - 1] / static_cast<double>(i) * (x - stream->optimum(i)).squaredNorm();
      };
      inst.default_step = 1.0 / stream->constants().mu;
      inst.max_smoothness = stream->constants().L;
      inst.domain = p.radius ? Domain<double>::ball(Vec::Zero(p.d), *p.radius) : Domain<double>::unconstrained(p.d);
      inst.stream = std::make_unique<QuadraticStream<double>>(*stream);
      return inst;
    }
  }
  throw InvalidConfig("unknown problem kind");
}

struct Trace {
  std::vector<double> gap;
  std::vector<std::uint64_t> fos;
  std::vector<double> wall_ms;
};

struct SeedOutcome {
  std::vector<std::optional<Trace>> traces;  // one per method, in methods() order
  std::vector<std::string> warnings;
};

Trace make_trace(const Instance& inst, const std::string& method, const ContinualRun<double>& run) {
  Trace trace;
  const std::size_t n = run.outputs.size();
  trace.gap.reserve(n);
  std::uint64_t last = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    const Vec& x = run.outputs[i - 1];
    if (!all_finite(x)) throw NumericError(method + ": non-finite output at stage " + std::to_string(i));
    const double gap = inst.gap(i, x);
    if (!(gap >= -1e-10))
      throw InvariantViolation(method + ": gap " + format_double(gap) + " below -1e-10 at stage " + std::to_string(i));
    const auto& record = run.records[i - 1];
    if (record.cum_fos < last) throw InvariantViolation(method + ": cumulative FOs decreased at stage " + std::to_string(i));
    last = record.cum_fos;
    trace.gap.push_back(gap);
    trace.fos.push_back(record.cum_fos);
    trace.wall_ms.push_back(record.wall_seconds * 1e3);
  }
  return trace;
}

/// Spreads `total` FOs over `stages` (1-based) as evenly as possible; other stages get 1.
std::vector<std::size_t> spread_budget(std::uint64_t total, std::size_t n, const std::vector<std::size_t>& stages) {
  std::vector<std::size_t> table(n, 1);
  const std::uint64_t k = stages.size();
  if (k == 0 || total < k) throw InvalidConfig("FO matching: budget too small for the invoked stages");
  for (std::size_t idx = 0; idx < stages.size(); ++idx)
    table[stages[idx] - 1] = static_cast<std::size_t>(total / k + (idx < total % k ? 1 : 0));
  return table;
}

SeedOutcome run_seed(const ExperimentConfig& config, const Instance& inst, std::uint64_t seed) {
  const auto& stream = *inst.stream;
  const auto& domain = *inst.domain;
  const std::size_t n = stream.size();
  const auto names = config.methods();
  SeedOutcome out;
  out.traces.resize(names.size());
  std::optional<std::uint64_t> csvrg_total;

  auto attempt = [&](std::size_t slot, const std::function<ContinualRun<double>()>& body) {
    try {
      out.traces[slot] = make_trace(inst, names[slot], body());
      if (names[slot] == "csvrg") csvrg_total = out.traces[slot]->fos.back();
    } catch (const NumericError& e) {
      out.warnings.push_back("seed " + std::to_string(seed) + ", " + names[slot] + ": " + e.what() + " (excluded)");
    }
  };
  auto match_unavailable = [&](std::size_t slot) {
    out.warnings.push_back("seed " + std::to_string(seed) + ", " + names[slot] +
                           ": no CSVRG total to match (excluded)");
  };

  for (std::size_t slot = 0; slot < names.size(); ++slot) {
    const std::string& name = names[slot];
    if (name == "csvrg") {
      const auto& m = *config.csvrg;
      CsvrgConfig c;
      c.alpha = m.alpha;
      c.seed = seed;
      c.beta = m.beta;
      if (m.theoretical_schedule) {
        c.schedule = TheoreticalSchedule{*config.run.epsilon};
      } else {
        c.schedule = FixedSchedule{m.T};
      }
      if (m.theoretical_step) {
        c.step = TheoreticalStep{};
      } else {
        c.step = PracticalStep{m.base_step.value_or(inst.default_step)};
      }
      attempt(slot, [&] { return ContinualRun<double>(csvrg_run(stream, domain, c)); });
    } else if (name == "sgd") {
      const auto& m = *config.sgd;
      SgdConfig c;
      c.gamma = m.gamma.value_or(inst.default_step);
      c.seed = seed;
      c.sampling = m.sampling;
      if (m.T) {
        c.T = {*m.T};
      } else if (csvrg_total) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i + 1;
        c.T = spread_budget(*csvrg_total, n, all);
      } else {
        match_unavailable(slot);
        continue;
      }
      attempt(slot, [&] { return sgd_run(stream, domain, c); });
    } else if (name == "sgd_sparse") {
      const auto& m = *config.sgd_sparse;
      SgdSparseConfig c;
      c.alpha = m.alpha;
      c.gamma = m.gamma.value_or(inst.default_step);
      c.seed = seed;
      c.sampling = m.sampling;
      if (m.T) {
        c.T = {*m.T};
      } else if (csvrg_total) {
        c.T = spread_budget(*csvrg_total, n, sgd_sparse_invocations(n, m.alpha));
      } else {
        match_unavailable(slot);
        continue;
      }
      attempt(slot, [&] { return ContinualRun<double>(sgd_sparse_run(stream, domain, c)); });
    } else {
      const bool is_svrg = name == "svrg";
      const auto& m = is_svrg ? *config.svrg : *config.katyusha;
      VrConfig c{m.outer, m.inner, m.step.value_or(1.0 / (3.0 * inst.max_smoothness))};
      attempt(slot, [&] { return vr_run(is_svrg ? VrMethod::kSvrg : VrMethod::kKatyusha, stream, domain, c, seed); });
    }
  }
  return out;
}

}  // namespace

unsigned thread_limit() {
  if (const char* raw = std::getenv("CFSM_THREADS"); raw && *raw) {
    char* end = nullptr;
    const long value = std::strtol(raw, &end, 10);
    if (*end != '\0' || value < 1) throw InvalidConfig("CFSM_THREADS must be a positive integer");
    return static_cast<unsigned>(value);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  const Instance inst = build_instance(config.problem);
  const std::size_t runs = config.run.runs;
  const std::size_t n = inst.stream->size();
  const auto names = config.methods();

  std::vector<SeedOutcome> outcomes(runs);
  std::vector<std::exception_ptr> errors(runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < runs; r = next++) {
      try {
        outcomes[r] = run_seed(config, inst, config.run.seed + r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const unsigned count = std::min<unsigned>(threads ? threads : thread_limit(), static_cast<unsigned>(runs));
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentResult result;
  for (const auto& o : outcomes) result.warnings.insert(result.warnings.end(), o.warnings.begin(), o.warnings.end());

  std::vector<std::vector<const Trace*>> kept(names.size());
  for (std::size_t m = 0; m < names.size(); ++m) {
    for (const auto& o : outcomes)
      if (o.traces[m]) kept[m].push_back(&*o.traces[m]);
    if (kept[m].empty()) throw InvariantViolation(names[m] + ": every run failed");
  }

  result.rows.reserve(n * names.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < names.size(); ++m) {
      const auto& traces = kept[m];
      const auto k = static_cast<double>(traces.size());
      double gap_sum = 0, fos_sum = 0, wall_sum = 0;
      for (const Trace* t : traces) {
        gap_sum += t->gap[i];
        fos_sum += static_cast<double>(t->fos[i]);
        wall_sum += t->wall_ms[i];
      }
      CsvRow row;
      row.stage = i + 1;
      row.method = names[m];
      row.gap_mean = gap_sum / k;
      if (traces.size() > 1) {
        double sq = 0;
        for (const Trace* t : traces) sq += (t->gap[i] - row.gap_mean) * (t->gap[i] - row.gap_mean);
        row.gap_std = std::sqrt(sq / (k - 1));
      }
      row.cum_fos_mean = fos_sum / k;
      row.wall_ms_mean = config.run.timing ? wall_sum / k : 0.0;
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV and FO report
// ---------------------------------------------------------------------------

void write_csv(std::ostream& out, const std::vector<CsvRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.stage << ',' << r.method << ',' << format_double(r.gap_mean) << ',' << format_double(r.gap_std) << ','
        << format_double(r.cum_fos_mean) << ',' << format_double(r.wall_ms_mean) << '\n';
}

std::vector<CsvRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ParseError(1, "unexpected header '" + line + "'");
  std::vector<CsvRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) throw ParseError(number, "expected 6 fields, got " + std::to_string(fields.size()));
    CsvRow row;
    try {
      std::size_t used = 0;
      const long long stage = std::stoll(fields[0], &used);
      if (used != fields[0].size() || stage < 1) throw std::invalid_argument("stage");
      row.stage = static_cast<std::size_t>(stage);
      row.method = fields[1];
      double* targets[] = {&row.gap_mean, &row.gap_std, &row.cum_fos_mean, &row.wall_ms_mean};
      for (std::size_t k = 0; k < 4; ++k) {
        *targets[k] = std::stod(fields[k + 2], &used);
        if (used != fields[k + 2].size()) throw std::invalid_argument("number");
      }
    } catch (const std::exception&) {
      throw ParseError(number, "malformed row '" + line + "'");
    }
    if (row.method.empty()) throw ParseError(number, "empty method name");
    rows.push_back(std::move(row));
  }
  return rows;
}

FoSummary fo_report(const std::vector<CsvRow>& rows) {
  FoSummary summary;
  std::vector<std::size_t> last_stage;
  for (const auto& r : rows) {
    auto it = std::find_if(summary.final_fos.begin(), summary.final_fos.end(),
                           [&](const auto& e) { return e.first == r.method; });
    if (it == summary.final_fos.end()) {
      summary.final_fos.emplace_back(r.method, r.cum_fos_mean);
      last_stage.push_back(r.stage);
    } else {
      const auto k = static_cast<std::size_t>(it - summary.final_fos.begin());
      if (r.stage >= last_stage[k]) {
        last_stage[k] = r.stage;
        it->second = r.cum_fos_mean;
      }
    }
  }
  for (std::size_t a = 0; a < summary.final_fos.size(); ++a)
    for (std::size_t b = a + 1; b < summary.final_fos.size(); ++b)
      summary.ratios.push_back({summary.final_fos[a].first, summary.final_fos[b].first,
                                summary.final_fos[a].second / summary.final_fos[b].second});
  return summary;
}

void write_fo_report(std::ostream& out, const FoSummary& summary) {
  out << "method,final_cum_fos\n";
  for (const auto& [method, fos] : summary.final_fos) out << method << ',' << format_double(fos) << '\n';
  if (summary.ratios.empty()) return;
  out << "numerator,denominator,ratio\n";
  for (const auto& r : summary.ratios) out << r.numerator << ',' << r.denominator << ',' << format_double(r.value) << '\n';
}

}  // namespace cfsm
