// cfsm: run experiments, verification suites and the lower-bound demo.
//
// Exit codes: 0 success, 1 invariant failure, 2 config/parse error.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cfsm/format.hpp"
#include "cfsm/harness.hpp"
#include "cfsm/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvariant = 1;
constexpr int kConfig = 2;

int cmd_run(const std::string& path, const std::string& output_override) {
  auto config = cfsm::load_config(path);
  if (!output_override.empty()) config.run.output = output_override;
  const auto result = cfsm::run_experiment(config);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  if (config.run.output.empty() || config.run.output == "-") {
    cfsm::write_csv(std::cout, result.rows);
  } else {
    std::ofstream out(config.run.output, std::ios::binary);
    if (!out) throw cfsm::InvalidConfig("cannot write '" + config.run.output + "'");
    cfsm::write_csv(out, result.rows);
    if (!out) throw cfsm::InvalidConfig("failed writing '" + config.run.output + "'");
  }
  return kOk;
}

int cmd_verify(const std::string& suite, std::uint64_t seed) {
  std::vector<std::string> selected;
  if (suite == "all") {
    selected = cfsm::suite_names();
  } else {
    const auto& names = cfsm::suite_names();
    if (std::find(names.begin(), names.end(), suite) == names.end())
      throw cfsm::InvalidConfig("unknown suite '" + suite + "'");
    selected = {suite};
  }
  cfsm::SuiteOptions options;
  options.seed = seed;
  bool all_pass = true;
  std::cout << "suite,cases,max_violation,tolerance,pass\n";
  for (const auto& name : selected) {
    const auto report = cfsm::run_suite(name, options);
    std::cout << report.csv_line() << std::endl;
    all_pass = all_pass && report.pass();
  }
  return all_pass ? kOk : kInvariant;
}

int cmd_lower_bound(long long n, std::uint64_t seed) {
  if (n < 4) throw cfsm::InvalidConfig("--n must be >= 4");
  const auto demo = cfsm::lowerbound_demo(static_cast<std::size_t>(n), seed);
  std::cout << "stage=" << demo.stage << '\n'
            << "hidden=" << demo.hidden << '\n'
            << "queries_at_stage=" << demo.queries_at_stage << '\n'
            << "hidden_queried=" << (demo.hidden_queried ? "true" : "false") << '\n'
            << "earlier_outputs_at_origin=" << (demo.earlier_outputs_at_origin ? "true" : "false") << '\n'
            << "second_coordinate_zero=" << (demo.second_coordinate_zero ? "true" : "false") << '\n'
            << "measured_gap=" << cfsm::format_double(demo.measured_gap) << '\n'
            << "analytic_bound=" << cfsm::format_double(demo.analytic_bound) << '\n'
            << "holds=" << (demo.holds() ? "true" : "false") << '\n';
  return demo.holds() ? kOk : kInvariant;
}

int cmd_fo_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cfsm::InvalidConfig("cannot open '" + path + "'");
  cfsm::write_fo_report(std::cout, cfsm::fo_report(cfsm::read_csv(in)));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual finite-sum minimization toolkit"};
  app.require_subcommand(1);

  std::string config_path, output;
  auto* run = app.add_subcommand("run", "Run the experiment described by a TOML config and write the CSV");
  run->add_option("config", config_path, "Experiment config (TOML)")->required();
  run->add_option("-o,--output", output, "Override [run] output");

  std::string suite;
  std::uint64_t seed = 1;
  auto* verify = app.add_subcommand("verify", "Run verification suites");
  verify->add_option("--suite", suite, "Suite name or 'all'")->required();
  verify->add_option("--seed", seed, "Root seed of the sampled cases");

  long long n = 0;
  std::uint64_t lb_seed = 0;
  auto* lower = app.add_subcommand("lower-bound", "Run the lower-bound demonstration");
  lower->add_option("--n", n, "Target stage (>= 4)")->required();
  lower->add_option("--seed", lb_seed, "Seed");

  std::string csv_path;
  auto* report = app.add_subcommand("fo-report", "Summarize final FO counts from a result CSV");
  report->add_option("csv", csv_path, "Result CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, output);
    if (verify->parsed()) return cmd_verify(suite, seed);
    if (lower->parsed()) return cmd_lower_bound(n, lb_seed);
    if (report->parsed()) return cmd_fo_report(csv_path);
  } catch (const cfsm::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const cfsm::InvalidConfig& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const cfsm::InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvariant;
  }
  return kOk;
}
