#ifndef CFSM_HARNESS_HPP
#define CFSM_HARNESS_HPP

// Multi-seed experiments: TOML config in, gap-vs-stage CSV out.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfsm/baselines.hpp"
#include "cfsm/problems.hpp"

namespace cfsm {

enum class ProblemKind { kSyntheticRidge, kLibsvm, kQuadratic };

struct ProblemConfig {
  ProblemKind kind = ProblemKind::kSyntheticRidge;
  std::optional<std::size_t> n;  // required for synthetic families; truncates LIBSVM data
  Eigen::Index d = 10;
  std::uint64_t seed = 0;        // data seed, independent of the run seeds
  double noise = 0.1;
  FeatureDistribution distribution = FeatureDistribution::kGaussian;
  std::string path;              // LIBSVM file
  bool standardize = false;
  double lambda = 1e-3;
  std::optional<double> radius;  // origin ball domain; unconstrained when absent
  bool radius_auto = false;      // ridge: smallest origin ball certified to hold every x*_i
  double scale_min = 1.0;        // quadratic scales ~ Unif[scale_min, scale_max]
  double scale_max = 1.0;
};

/// Base step of the practical schedule: defaults to 1/lambda (ridge) or 1/mu.
struct CsvrgMethodConfig {
  double alpha = 0.3;
  std::size_t T = 100;
  bool theoretical_schedule = false;
  bool theoretical_step = false;
  std::optional<double> base_step;
  std::optional<double> beta;
};

/// T absent means "match CSVRG's total FO count".
struct SgdMethodConfig {
  std::optional<std::size_t> T;
  std::optional<double> gamma;
  SgdSampling sampling = SgdSampling::kPrefix;
};

struct SgdSparseMethodConfig {
  double alpha = 0.002;
  std::optional<std::size_t> T = 414;
  std::optional<double> gamma;
  SgdSampling sampling = SgdSampling::kPrefix;
};

/// step defaults to 1/(3 L) with L the largest component smoothness.
struct VrMethodConfig {
  std::size_t outer = 10;
  std::size_t inner = 100;
  std::optional<double> step;
};

struct RunConfig {
  std::size_t runs = 10;
  std::uint64_t seed = 0;  // run r uses seed + r
  std::string output;      // CSV path; empty means stdout
  std::optional<double> epsilon;
  bool timing = false;     // wall_ms_mean is 0 unless enabled (keeps CSVs byte-stable)
};

struct ExperimentConfig {
  ProblemConfig problem;
  std::optional<CsvrgMethodConfig> csvrg;
  std::optional<SgdMethodConfig> sgd;
  std::optional<SgdSparseMethodConfig> sgd_sparse;
  std::optional<VrMethodConfig> svrg;
  std::optional<VrMethodConfig> katyusha;
  RunConfig run;

  std::vector<std::string> methods() const;
  void validate() const;
};

/// Throws ParseError for malformed TOML and InvalidConfig for bad values or unknown keys.
ExperimentConfig parse_config(std::string_view toml_text);
ExperimentConfig load_config(const std::string& path);

struct CsvRow {
  std::size_t stage = 0;
  std::string method;
  double gap_mean = 0.0;
  double gap_std = 0.0;
  double cum_fos_mean = 0.0;
  double wall_ms_mean = 0.0;
};

struct ExperimentResult {
  std::vector<CsvRow> rows;            // stage-major, methods in canonical order
  std::vector<std::string> warnings;   // excluded seeds
};

inline constexpr std::string_view kCsvHeader = "stage,method,gap_mean,gap_std,cum_fos_mean,wall_ms_mean";

/// Runs every method for every seed and aggregates per (stage, method).
/// Seeds run on up to `threads` threads (0: CFSM_THREADS or the hardware count);
/// the output does not depend on the thread count.
ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads = 0);

void write_csv(std::ostream& out, const std::vector<CsvRow>& rows);
std::vector<CsvRow> read_csv(std::istream& in);

/// Thread cap from CFSM_THREADS (>= 1), else the hardware concurrency.
unsigned thread_limit();

struct FoSummary {
  std::vector<std::pair<std::string, double>> final_fos;   // per method, in CSV order
  struct Ratio {
    std::string numerator, denominator;
    double value = 0.0;
  };
  std::vector<Ratio> ratios;                               // empty with fewer than two methods
};

FoSummary fo_report(const std::vector<CsvRow>& rows);
void write_fo_report(std::ostream& out, const FoSummary& summary);

}  // namespace cfsm

#endif  // CFSM_HARNESS_HPP
