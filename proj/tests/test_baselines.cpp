#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cfsm/baselines.hpp"
#include "cfsm/problems.hpp"

using cfsm::Domain;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v(k++) = x;
  return v;
}

cfsm::QuadraticStream<double> ball_quadratic(std::uint64_t seed, std::size_t n, Eigen::Index d, double scale = 1.0) {
  cfsm::Rng rng(seed);
  return {cfsm::random_ball_points<double>(n, d, 1.0, rng), scale, 1.0};
}

/// Ill-conditioned least squares: feature k scaled by 10^{-3k/(d-1)/2}, so the
/// prefix Hessian spans roughly three orders of magnitude.
cfsm::RidgeStream<double> ill_conditioned(std::uint64_t seed, std::size_t n, Eigen::Index d) {
  auto [rows, targets] = cfsm::synthetic_ridge_data<double>({seed, n, d, 0.1, cfsm::FeatureDistribution::kGaussian});
  for (Eigen::Index k = 0; k < d; ++k) rows.col(k) *= std::pow(10.0, -1.5 * static_cast<double>(k) / (d - 1));
  return {rows, targets, 1e-4};
}

}  // namespace

TEST_SUITE("sgd") {
  TEST_CASE("stage 1 only ever samples f_1") {
    const auto stream = ball_quadratic(1, 5, 2);
    cfsm::FoLedger ledger;
    ledger.enable_log();
    cfsm::Rng rng(3);
    cfsm::sgd_stage(stream, Domain<double>::unconstrained(2), 1, vec({0, 0}), 0.5, 25, rng, ledger);
    CHECK(ledger.count() == 25);
    for (std::size_t j : ledger.log()) CHECK(j == 1);
  }

  TEST_CASE("sampling variants") {
    const auto stream = ball_quadratic(2, 6, 2);
    cfsm::FoLedger ledger;
    ledger.enable_log();
    cfsm::Rng rng(4);
    cfsm::sgd_stage(stream, Domain<double>::unconstrained(2), 6, vec({0, 0}), 0.5, 500, rng, ledger,
                    cfsm::SgdSampling::kExcludeNewest);
    for (std::size_t j : ledger.log()) REQUIRE(j <= 5);
    ledger.clear_log();
    cfsm::sgd_stage(stream, Domain<double>::unconstrained(2), 6, vec({0, 0}), 0.5, 500, rng, ledger);
    bool newest = false;
    for (std::size_t j : ledger.log()) newest = newest || j == 6;
    CHECK(newest);
  }

  TEST_CASE("averaged iterate improves on the start") {
    const auto stream = ball_quadratic(5, 30, 3);
    const auto domain = Domain<double>::unconstrained(3);
    const VectorXd start = vec({2, -2, 1});
    const VectorXd opt = stream.optimum(30);
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      cfsm::FoLedger ledger;
      cfsm::Rng rng(seed);
      const double gamma = 1.0 / stream.constants().mu;
      const VectorXd out = cfsm::sgd_stage(stream, domain, 30, start, gamma, 100, rng, ledger);
      if (cfsm::prefix_value(stream, 30, out) - cfsm::prefix_value(stream, 30, opt) <
          cfsm::prefix_value(stream, 30, start) - cfsm::prefix_value(stream, 30, opt))
        ++improved;
    }
    CHECK(improved >= 48);
  }

  TEST_CASE("argument checks") {
    const auto stream = ball_quadratic(6, 3, 2);
    cfsm::FoLedger ledger;
    cfsm::Rng rng(1);
    const auto domain = Domain<double>::unconstrained(2);
    CHECK_THROWS_AS(cfsm::sgd_stage(stream, domain, 2, vec({0, 0}), 0.5, 0, rng, ledger), cfsm::InvalidConfig);
    CHECK_THROWS_AS(cfsm::sgd_stage(stream, domain, 2, vec({0, 0}), 0.0, 3, rng, ledger), cfsm::InvalidConfig);
    CHECK_THROWS_AS(cfsm::sgd_stage(stream, domain, 4, vec({0, 0}), 0.5, 3, rng, ledger), cfsm::InvalidInput);
  }

  TEST_CASE("continual run charges T per stage") {
    const auto stream = ball_quadratic(7, 20, 2);
    cfsm::SgdConfig config;
    config.gamma = 0.5;
    config.T = {7};
    const auto run = cfsm::sgd_run(stream, Domain<double>::ball(vec({0, 0}), 1.0), config);
    for (std::size_t i = 1; i <= 20; ++i) CHECK(run.records[i - 1].cum_fos == 7 * i);
    config.T = {1, 2, 3};
    CHECK_THROWS_AS(cfsm::sgd_run(stream, Domain<double>::unconstrained(2), config), cfsm::InvalidConfig);
  }
}

TEST_SUITE("sgd_sparse") {
  TEST_CASE("invocation trace for n = 10, alpha = 1") {
    CHECK(cfsm::sgd_sparse_invocations(10, 1.0) == std::vector<std::size_t>{1, 3, 7});
  }

  TEST_CASE("tiny alpha invokes at every stage") {
    CHECK(cfsm::sgd_sparse_invocations(50, 1e-9).size() == 50);
  }

  TEST_CASE("invocations are geometrically spaced") {
    for (double alpha : {0.002, 0.05, 0.5}) {
      const auto stages = cfsm::sgd_sparse_invocations(5000, alpha);
      for (std::size_t k = 1; k < stages.size(); ++k)
        REQUIRE(static_cast<double>(stages[k]) > static_cast<double>(stages[k - 1]) * (1 + alpha));
    }
  }

  TEST_CASE("invocation count under the theoretical alpha") {
    const auto box = Domain<double>::box(vec({-1, -1}), vec({1, 1}));
    const double G = 6 * std::sqrt(2.0);
    for (double eps : {0.5, 1.0, 5.0}) {
      const double alpha = cfsm::sgd_sparse_theoretical_alpha(box, G, eps);
      CHECK(alpha == doctest::Approx(eps / (2 * box.diameter() * G)));
      for (std::size_t n : {100, 10000}) {
        const double limit = 4 * box.diameter() * G * std::log(static_cast<double>(n)) / eps;
        CHECK(static_cast<double>(cfsm::sgd_sparse_invocations(n, alpha).size()) <= limit);
      }
    }
    CHECK_THROWS_AS(cfsm::sgd_sparse_theoretical_alpha(Domain<double>::unconstrained(2), G, 1.0), cfsm::InvalidConfig);
  }

  TEST_CASE("skipped stages repeat the last output for free") {
    const auto stream = ball_quadratic(8, 10, 2);
    cfsm::SgdSparseConfig config;
    config.alpha = 1.0;
    config.T = {5};
    config.gamma = 0.5;
    const auto run = cfsm::sgd_sparse_run(stream, Domain<double>::unconstrained(2), config);
    CHECK(run.invocation_stages == std::vector<std::size_t>{1, 3, 7});
    CHECK(run.records[1].cum_fos == 5);
    CHECK(run.records[2].cum_fos == 10);
    CHECK(run.records[9].cum_fos == 15);
    CHECK(run.outputs[3] == run.outputs[2]);
    CHECK(run.outputs[9] == run.outputs[6]);
    config.alpha = 0;
    CHECK_THROWS_AS(cfsm::sgd_sparse_run(stream, Domain<double>::unconstrained(2), config), cfsm::InvalidConfig);
  }
}

TEST_SUITE("variance reduced") {
  TEST_CASE("FO cost per stage") {
    const auto stream = ball_quadratic(9, 40, 2);
    const auto domain = Domain<double>::unconstrained(2);
    const cfsm::VrConfig config{10, 100, 0.1};
    for (std::size_t i : {1, 17, 40}) {
      cfsm::FoLedger a, b;
      cfsm::Rng r1(1), r2(1);
      cfsm::svrg_stage(stream, domain, i, vec({0, 0}), config, r1, a);
      cfsm::katyusha_stage(stream, domain, i, vec({0, 0}), config, r2, b);
      CHECK(a.count() == 10 * (i + 200));
      CHECK(b.count() == 10 * (i + 200));
    }
  }

  TEST_CASE("continual totals") {
    const auto stream = ball_quadratic(10, 30, 2);
    const cfsm::VrConfig config{3, 7, 0.1};
    const auto run = cfsm::vr_run(cfsm::VrMethod::kKatyusha, stream, Domain<double>::unconstrained(2), config, 5);
    std::uint64_t expected = 0;
    for (std::size_t i = 1; i <= 30; ++i) {
      expected += 3 * (i + 14);
      REQUIRE(run.records[i - 1].cum_fos == expected);
    }
  }

  TEST_CASE("one inner step per epoch is projected gradient descent") {
    const auto stream = ball_quadratic(11, 12, 3, 2.0);
    const auto domain = Domain<double>::ball(vec({0, 0, 0}), 0.5);
    const cfsm::VrConfig config{6, 1, 0.05};
    cfsm::FoLedger ledger;
    cfsm::Rng rng(2);
    const VectorXd start = vec({0.3, 0.3, -0.2});
    const VectorXd out = cfsm::svrg_stage(stream, domain, 12, start, config, rng, ledger);
    VectorXd x = start;
    cfsm::FoLedger shadow;
    for (int s = 0; s < 6; ++s) x = cfsm::project(domain, VectorXd(x - 0.05 * cfsm::prefix_gradient(stream, 12, x, shadow)));
    CHECK((out - x).norm() <= 1e-14);
    CHECK_THROWS_AS(cfsm::svrg_stage(stream, domain, 12, start, cfsm::VrConfig{6, 0, 0.05}, rng, ledger),
                    cfsm::InvalidConfig);
  }

  TEST_CASE("zero momentum reproduces SVRG exactly") {
    const auto stream = ill_conditioned(12, 60, 5);
    const auto domain = Domain<double>::unconstrained(5);
    const cfsm::VrConfig config{5, 30, 0.05};
    cfsm::FoLedger a, b;
    cfsm::Rng r1(9), r2(9);
    const VectorXd start = VectorXd::Zero(5);
    const VectorXd svrg = cfsm::svrg_stage(stream, domain, 60, start, config, r1, a);
    const VectorXd kat = cfsm::katyusha_stage(stream, domain, 60, start, config, r2, b, {0.0, 0.0});
    CHECK(svrg == kat);
  }

  TEST_CASE("momentum reaches 1e-8 with fewer FOs than SVRG") {
    const std::size_t n = 100;
    const Eigen::Index d = 5;
    int faster = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto stream = ill_conditioned(100 + seed, n, d);
      const cfsm::RidgeOptima<double> optima(stream);
      const auto domain = Domain<double>::unconstrained(d);
      const cfsm::VrConfig base{1, 50, 1.0 / (3.0 * stream.ridge_constants().L_component)};
      auto epochs_needed = [&](bool momentum) {
        for (std::size_t outer = 1; outer <= 400; ++outer) {
          cfsm::VrConfig config = base;
          config.outer = outer;
          cfsm::FoLedger ledger;
          cfsm::Rng rng(seed);
          const VectorXd x = momentum ? cfsm::katyusha_stage(stream, domain, n, VectorXd(VectorXd::Zero(d)), config, rng, ledger)
                                      : cfsm::svrg_stage(stream, domain, n, VectorXd(VectorXd::Zero(d)), config, rng, ledger);
          if (optima.gap(n, x) <= 1e-8) return outer;
        }
        return std::size_t{1000};
      };
      if (epochs_needed(true) < epochs_needed(false)) ++faster;
    }
    CHECK(faster >= 8);
  }

  TEST_CASE("outputs stay feasible") {
    const auto stream = ball_quadratic(13, 25, 2, 3.0);
    const auto box = Domain<double>::box(vec({0.2, 0.2}), vec({0.4, 0.9}));
    const cfsm::VrConfig config{3, 10, 0.05};
    for (auto method : {cfsm::VrMethod::kSvrg, cfsm::VrMethod::kKatyusha}) {
      const auto run = cfsm::vr_run(method, stream, box, config, 3);
      for (const auto& x : run.outputs) REQUIRE(box.contains(x, 1e-12));
    }
  }

  TEST_CASE("deterministic given the seed") {
    const auto stream = ball_quadratic(14, 25, 2);
    const cfsm::VrConfig config{2, 10, 0.1};
    const auto a = cfsm::vr_run(cfsm::VrMethod::kKatyusha, stream, Domain<double>::unconstrained(2), config, 8);
    const auto b = cfsm::vr_run(cfsm::VrMethod::kKatyusha, stream, Domain<double>::unconstrained(2), config, 8);
    for (std::size_t i = 0; i < 25; ++i) REQUIRE(a.outputs[i] == b.outputs[i]);
  }

  TEST_CASE("config checks") {
    CHECK_THROWS_AS((cfsm::VrConfig{0, 1, 0.1}.validate()), cfsm::InvalidConfig);
    CHECK_THROWS_AS((cfsm::VrConfig{1, 1, 0.0}.validate()), cfsm::InvalidConfig);
  }
}
