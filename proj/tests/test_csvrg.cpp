#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cfsm/csvrg.hpp"
#include "cfsm/problems.hpp"

using cfsm::CsvrgConfig;
using cfsm::Domain;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v(k++) = x;
  return v;
}

/// f_j(x) = (x - j)^2 in one dimension.
cfsm::QuadraticStream<double> integer_centers(std::size_t n) {
  std::vector<VectorXd> centers;
  for (std::size_t j = 1; j <= n; ++j) centers.push_back(vec({static_cast<double>(j)}));
  return {centers, 1.0, static_cast<double>(n)};
}

cfsm::QuadraticStream<double> random_quadratic(std::uint64_t seed, std::size_t n, Eigen::Index d) {
  cfsm::Rng rng(seed);
  auto centers = cfsm::random_ball_points<double>(n, d, 1.0, rng);
  std::vector<double> scales(n);
  for (auto& s : scales) s = 0.5 + 1.5 * rng.uniform01();
  return {centers, scales, 1.0};
}

Domain<double> unit_ball(Eigen::Index d) { return Domain<double>::ball(VectorXd::Zero(d), 1.0); }

CsvrgConfig fixed(double alpha, std::size_t T, std::uint64_t seed = 1) {
  CsvrgConfig c;
  c.alpha = alpha;
  c.schedule = cfsm::FixedSchedule{T};
  c.seed = seed;
  return c;
}

class EmptyStream final : public cfsm::ComponentStream<double> {
 public:
  std::size_t size() const override { return 0; }
  Eigen::Index dimension() const override { return 1; }
  cfsm::Constants<double> constants() const override { return {1, 1, 1}; }

 protected:
  double do_value(std::size_t, const VectorXd&) const override { return 0; }
  void do_gradient(std::size_t, const VectorXd&, Eigen::Ref<VectorXd> out) const override { out.setZero(); }
};

}  // namespace

TEST_SUITE("estimator") {
  TEST_CASE("costs three FOs") {
    const auto stream = integer_centers(5);
    cfsm::FoLedger ledger;
    cfsm::estimator(stream, 4, 2, vec({0}), vec({1}), vec({0}), ledger);
    CHECK(ledger.count() == 3);
  }

  TEST_CASE("corrections cancel at the snapshot") {
    const auto stream = random_quadratic(3, 12, 3);
    cfsm::FoLedger ledger;
    const VectorXd x = vec({0.1, -0.2, 0.3});
    const std::size_t i = 9;
    const VectorXd agg = cfsm::prefix_gradient(stream, i - 1, x, ledger);
    const VectorXd exact = cfsm::prefix_gradient(stream, i, x, ledger);
    for (std::size_t u = 1; u < i; ++u)
      CHECK((cfsm::estimator(stream, i, u, x, x, agg, ledger) - exact).norm() <= 1e-14);
  }

  TEST_CASE("scalar enumeration at i = 3") {
    const auto stream = integer_centers(3);
    cfsm::FoLedger ledger;
    // agg = (grad f_1(0.5) + grad f_2(0.5)) / 2 = (-1 - 3) / 2
    const VectorXd agg = vec({-2});
    const double mean = (cfsm::estimator(stream, 3, 1, vec({0}), vec({0.5}), agg, ledger)(0) +
                         cfsm::estimator(stream, 3, 2, vec({0}), vec({0.5}), agg, ledger)(0)) /
                        2;
    // grad g_3(0) = (2 (0-1) + 2 (0-2) + 2 (0-3)) / 3
    CHECK(mean == doctest::Approx(-4.0).epsilon(1e-15));
  }

  TEST_CASE("argument checks") {
    const auto stream = integer_centers(4);
    cfsm::FoLedger ledger;
    CHECK_THROWS_AS(cfsm::estimator(stream, 1, 1, vec({0}), vec({0}), vec({0}), ledger), cfsm::InvalidStage);
    CHECK_THROWS_AS(cfsm::estimator(stream, 3, 3, vec({0}), vec({0}), vec({0}), ledger), cfsm::InvalidInput);
    CHECK_THROWS_AS(cfsm::estimator(stream, 3, 0, vec({0}), vec({0}), vec({0}), ledger), cfsm::InvalidInput);
    CHECK(ledger.count() == 0);
  }
}

TEST_SUITE("aggregate") {
  TEST_CASE("cheap update arithmetic") {
    const VectorXd out = cfsm::aggregate_cheap_update<double>(vec({2, 0}), vec({0, 4}), 4);
    CHECK(out(0) == 1.5);
    CHECK(out(1) == 1.0);
    CHECK(cfsm::aggregate_cheap_update<double>(vec({3, -1}), vec({3, -1}), 7).isApprox(vec({3, -1})));
    CHECK_THROWS_AS(cfsm::aggregate_cheap_update<double>(vec({1}), vec({1}), 1), cfsm::InvalidStage);
  }

  TEST_CASE("iterated cheap updates reproduce the direct sum") {
    const auto stream = random_quadratic(4, 40, 4);
    cfsm::FoLedger ledger;
    const VectorXd snapshot = vec({0.2, 0.1, -0.4, 0.3});
    const std::size_t prev = 6;
    VectorXd agg = cfsm::prefix_gradient(stream, prev, snapshot, ledger);
    for (std::size_t i = prev + 1; i <= 40; ++i) {
      agg = cfsm::aggregate_cheap_update<double>(agg, stream.gradient(i, snapshot, ledger), i);
      const VectorXd direct = cfsm::prefix_gradient(stream, i, snapshot, ledger);
      REQUIRE((agg - direct).norm() <= 1e-12 * std::max(1.0, direct.norm()));
    }
  }
}

TEST_SUITE("fum") {
  TEST_CASE("weights for T = 3, beta = 4") {
    const auto p = cfsm::FumParams<double>::make(4.0, 3);
    CHECK(p.Z == 12.0);
    CHECK(p.weight(0) == doctest::Approx(3.0 / 12));
    CHECK(p.weight(1) == doctest::Approx(4.0 / 12));
    CHECK(p.weight(2) == doctest::Approx(5.0 / 12));
  }

  TEST_CASE("weights sum to one") {
    for (double beta : {1.0, 1.5, 72.0, 1e6})
      for (std::size_t T : {1, 2, 17, 1000}) {
        if (beta == 1.0 && T == 1) continue;
        const auto p = cfsm::FumParams<double>::make(beta, T);
        double total = 0;
        for (std::size_t t = 0; t < T; ++t) total += p.weight(t);
        CHECK(std::abs(total - 1.0) <= 1e-12);
      }
    CHECK_THROWS_AS(cfsm::FumParams<double>::make(4.0, 0), cfsm::InvalidConfig);
    CHECK_THROWS_AS(cfsm::FumParams<double>::make(0.5, 3), cfsm::InvalidConfig);
    CHECK_THROWS_AS(cfsm::FumParams<double>::make(1.0, 1), cfsm::InvalidConfig);
  }

  TEST_CASE("costs 3T FOs and contracts toward a shared optimum") {
    const VectorXd c = vec({0.4, -0.3});
    const cfsm::QuadraticStream<double> stream(std::vector<VectorXd>(6, c), 1.0, 1.0);
    const auto domain = unit_ball(2);
    cfsm::FoLedger ledger;
    const VectorXd start = vec({-0.5, 0.5});
    const VectorXd agg = cfsm::prefix_gradient(stream, 4, start, ledger);
    const std::uint64_t before = ledger.count();
    cfsm::Rng rng(1);
    const cfsm::FumInputs<double> in{5, 4, &agg, &start, &start};
    const auto params = cfsm::FumParams<double>::make(cfsm::FumParams<double>::default_beta(stream.constants()), 10);
    const VectorXd out = cfsm::fum_stage(stream, domain, in, params, cfsm::StepMode{cfsm::TheoreticalStep{}}, rng, ledger);
    CHECK(ledger.count() - before == 30);
    CHECK(cfsm::prefix_value(stream, 5, out) - cfsm::prefix_value(stream, 5, c) <
          cfsm::prefix_value(stream, 5, start) - cfsm::prefix_value(stream, 5, c));
  }

  TEST_CASE("rejects stage 1") {
    const auto stream = integer_centers(3);
    const auto domain = Domain<double>::unconstrained(1);
    cfsm::FoLedger ledger;
    cfsm::Rng rng(1);
    const VectorXd x = vec({0});
    const cfsm::FumInputs<double> in{1, 0, &x, &x, &x};
    CHECK_THROWS_AS(cfsm::fum_stage(stream, domain, in, cfsm::FumParams<double>::make(2, 3),
                                    cfsm::StepMode{cfsm::TheoreticalStep{}}, rng, ledger),
                    cfsm::InvalidStage);
  }
}

TEST_SUITE("schedule") {
  TEST_CASE("unit constants") {
    const auto e = cfsm::theoretical_schedule(1, 1, 1, 1, 1);
    CHECK(e.T == 1593);
    CHECK(e.alpha == doctest::Approx(0.05));
  }

  TEST_CASE("T is nonincreasing in i") {
    std::size_t last = cfsm::theoretical_schedule(2, 6, 8, 0.01, 1).T;
    for (std::size_t i = 2; i <= 200; ++i) {
      const std::size_t T = cfsm::theoretical_schedule(2, 6, 8, 0.01, i).T;
      REQUIRE(T <= last);
      last = T;
    }
  }

  TEST_CASE("rejects nonpositive inputs") {
    CHECK_THROWS_AS(cfsm::theoretical_schedule(0, 1, 1, 1, 1), cfsm::InvalidConfig);
    CHECK_THROWS_AS(cfsm::theoretical_schedule(1, 1, 0, 1, 1), cfsm::InvalidConfig);
    CHECK_THROWS_AS(cfsm::theoretical_schedule(1, 1, 1, -1, 1), cfsm::InvalidConfig);
    CHECK_THROWS_AS(cfsm::theoretical_schedule(2, 1, 1, 1, 1), cfsm::InvalidConfig);
  }

  TEST_CASE("alpha is clamped below one") {
    const auto e = cfsm::theoretical_schedule(1, 1, 1e-6, 100, 1);
    CHECK(e.alpha < 1.0);
    CHECK(e.alpha > 0.0);
  }
}

TEST_SUITE("csvrg_run") {
  TEST_CASE("n = 2, alpha = 0.9 uses the cheap update") {
    const auto stream = random_quadratic(5, 2, 2);
    cfsm::CsvrgTap<double> tap;
    VectorXd agg_end;
    VectorXd x_prev;
    tap.on_stage_end = [&](const cfsm::CsvrgSnapshot<double>& s) {
      agg_end = s.agg;
      x_prev = s.x_prev_hat;
    };
    const auto run = cfsm::csvrg_run(stream, unit_ball(2), fixed(0.9, 5), tap);
    CHECK(run.recompute_stages.empty());
    CHECK(run.fos.cheap == 1);
    cfsm::FoLedger shadow;
    CHECK((agg_end - cfsm::prefix_gradient(stream, 2, x_prev, shadow)).norm() <= 1e-14);
  }

  TEST_CASE("small alpha recomputes at stage 2") {
    const auto stream = random_quadratic(6, 3, 2);
    const auto run = cfsm::csvrg_run(stream, unit_ball(2), fixed(0.3, 5));
    CHECK(run.recompute_stages.front() == 2);
  }

  TEST_CASE("FO decomposition matches the ledger") {
    const auto stream = random_quadratic(7, 300, 3);
    for (double alpha : {0.05, 0.3, 0.7}) {
      const auto run = cfsm::csvrg_run(stream, unit_ball(3), fixed(alpha, 4));
      CHECK(run.fos.total() == run.records.back().cum_fos);
      CHECK(run.fos.fum == 3 * 4 * 299);
      CHECK(run.fos.cheap == 299 - run.recompute_stages.size());
      std::uint64_t recompute = 0;
      for (std::size_t i : run.recompute_stages) recompute += 2 * i - 1;
      CHECK(run.fos.recompute == recompute);
      CHECK(static_cast<double>(run.recompute_stages.size()) <= std::ceil(std::log(300.0) / alpha));
      for (std::size_t i = 1; i < run.records.size(); ++i) REQUIRE(run.records[i].cum_fos >= run.records[i - 1].cum_fos);
    }
  }

  TEST_CASE("every iterate and output is feasible") {
    const auto stream = random_quadratic(8, 60, 2);
    const auto domain = unit_ball(2);
    cfsm::CsvrgTap<double> tap;
    bool feasible = true;
    tap.on_round = [&](const cfsm::CsvrgSnapshot<double>& s) { feasible = feasible && domain.contains(s.x_cur, 1e-12); };
    CsvrgConfig config = fixed(0.3, 8);
    config.step = cfsm::PracticalStep{50.0};  // deliberately large so projection binds
    const auto run = cfsm::csvrg_run(stream, domain, config, tap);
    CHECK(feasible);
    for (const auto& x : run.outputs) CHECK(domain.contains(x, 1e-12));
  }

  TEST_CASE("aggregate identity at every FUM entry") {
    const auto stream = random_quadratic(9, 120, 3);
    cfsm::CsvrgTap<double> tap;
    double worst = 0;
    tap.on_fum_entry = [&](const cfsm::CsvrgSnapshot<double>& s) {
      cfsm::FoLedger shadow;
      const VectorXd direct = cfsm::prefix_gradient(stream, s.stage - 1, s.x_prev_hat, shadow);
      worst = std::max(worst, (s.agg - direct).norm() / std::max(1.0, direct.norm()));
    };
    cfsm::csvrg_run(stream, unit_ball(3), fixed(0.2, 3), tap);
    CHECK(worst <= 1e-10);
  }

  TEST_CASE("deterministic given the seed") {
    const auto stream = random_quadratic(10, 50, 3);
    const auto a = cfsm::csvrg_run(stream, unit_ball(3), fixed(0.3, 5, 77));
    const auto b = cfsm::csvrg_run(stream, unit_ball(3), fixed(0.3, 5, 77));
    const auto c = cfsm::csvrg_run(stream, unit_ball(3), fixed(0.3, 5, 78));
    bool same = true, differs = false;
    for (std::size_t i = 0; i < 50; ++i) {
      same = same && a.outputs[i] == b.outputs[i];
      differs = differs || a.outputs[i] != c.outputs[i];
    }
    CHECK(same);
    CHECK(differs);
  }

  TEST_CASE("custom schedule") {
    const auto stream = random_quadratic(11, 4, 2);
    CsvrgConfig config = fixed(0.3, 1);
    config.schedule = cfsm::CustomSchedule{{0, 2, 3, 4}};
    const auto run = cfsm::csvrg_run(stream, unit_ball(2), config);
    CHECK(run.fos.fum == 3 * (2 + 3 + 4));
    config.schedule = cfsm::CustomSchedule{{0, 2}};
    CHECK_THROWS_AS(cfsm::csvrg_run(stream, unit_ball(2), config), cfsm::InvalidConfig);
  }

  TEST_CASE("stage 1 descends on f_1") {
    const auto stream = random_quadratic(12, 5, 3);
    const auto run = cfsm::csvrg_run(stream, unit_ball(3), fixed(0.3, 2));
    const double gap = stream.value(1, run.outputs[0]) - stream.value(1, stream.center(1));
    CHECK(gap <= 1e-8);
    CHECK(run.fos.stage1 == run.inner_iterations[0] + 2);
  }

  TEST_CASE("configuration errors") {
    const auto stream = random_quadratic(13, 5, 2);
    CHECK_THROWS_AS(cfsm::csvrg_run(stream, unit_ball(2), fixed(0.0, 3)), cfsm::InvalidConfig);
    CHECK_THROWS_AS(cfsm::csvrg_run(stream, unit_ball(2), fixed(1.0, 3)), cfsm::InvalidConfig);
    CHECK_THROWS_AS(cfsm::csvrg_run(stream, unit_ball(2), fixed(0.3, 0)), cfsm::InvalidConfig);
    CsvrgConfig theory;
    theory.schedule = cfsm::TheoreticalSchedule{0.1};
    CHECK_THROWS_AS(cfsm::csvrg_run(stream, Domain<double>::unconstrained(2), theory), cfsm::InvalidConfig);
    theory.schedule = cfsm::TheoreticalSchedule{0.0};
    CHECK_THROWS_AS(cfsm::csvrg_run(stream, unit_ball(2), theory), cfsm::InvalidConfig);
    CsvrgConfig practical = fixed(0.3, 3);
    practical.step = cfsm::PracticalStep{-1.0};
    CHECK_THROWS_AS(cfsm::csvrg_run(stream, unit_ball(2), practical), cfsm::InvalidConfig);
    CHECK_THROWS_AS(cfsm::csvrg_run(stream, unit_ball(3), fixed(0.3, 3)), cfsm::InvalidInput);
    const EmptyStream empty;
    CHECK_THROWS_AS(cfsm::csvrg_run(empty, Domain<double>::unconstrained(1), fixed(0.3, 3)), cfsm::InvalidInput);
  }
}
