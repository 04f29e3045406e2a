#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cfsm/verify.hpp"

using cfsm::CsvrgSnapshot;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v(k++) = x;
  return v;
}

cfsm::QuadraticStream<double> random_quadratic(std::uint64_t seed, std::size_t n, Eigen::Index d) {
  cfsm::Rng rng(seed);
  auto centers = cfsm::random_ball_points<double>(n, d, 1.0, rng);
  std::vector<double> scales(n);
  for (auto& s : scales) s = 0.5 + 1.5 * rng.uniform01();
  return {centers, scales, 1.0};
}

/// A reachable-by-construction state: agg is the exact stage-(i-1) aggregate at x̂_prev.
CsvrgSnapshot<double> state_at(const cfsm::ComponentStream<double>& stream, std::size_t i, std::size_t prev,
                               VectorXd x_cur, VectorXd x_prev_hat) {
  cfsm::FoLedger shadow;
  CsvrgSnapshot<double> s;
  s.stage = i;
  s.round = 0;
  s.prev = prev;
  s.agg = cfsm::prefix_gradient(stream, i - 1, x_prev_hat, shadow);
  s.x_cur = std::move(x_cur);
  s.x_prev_hat = std::move(x_prev_hat);
  return s;
}

}  // namespace

TEST_CASE("report semantics") {
  cfsm::OracleReport r{"x", 0, -INFINITY, 1e-10};
  CHECK_FALSE(r.pass());
  r.add(1e-12);
  CHECK(r.pass());
  r.add(NAN);
  CHECK_FALSE(r.pass());
  cfsm::OracleReport ok{"unbias", 0, -INFINITY, 1e-10};
  ok.add(0.0);
  CHECK(ok.csv_line() == "unbias,1,0,1e-10,true");
}

TEST_SUITE("unbias") {
  TEST_CASE("i = 2 has a single u") {
    const auto stream = random_quadratic(1, 5, 2);
    const auto s = state_at(stream, 2, 1, vec({0.1, 0.2}), vec({-0.3, 0.4}));
    const auto report = cfsm::unbias_oracle<double>(stream, s);
    CHECK(report.cases == 1);
    CHECK(report.pass());
  }

  TEST_CASE("random state at i = 10") {
    const auto stream = random_quadratic(2, 20, 3);
    const auto s = state_at(stream, 10, 7, vec({0.5, -0.1, 0.2}), vec({-0.2, 0.3, 0.1}));
    CHECK(cfsm::unbias_oracle<double>(stream, s).pass());
  }

  TEST_CASE("corrupted aggregate fails by (1 - 1/i) times the corruption") {
    const auto stream = random_quadratic(3, 20, 3);
    const std::size_t i = 10;
    auto s = state_at(stream, i, 7, stream.optimum(i), vec({-0.2, 0.3, 0.1}));
    s.agg(1) += 0.1;
    CHECK_THROWS_AS(cfsm::unbias_oracle<double>(stream, s), cfsm::PreconditionError);
    const auto report = cfsm::unbias_oracle<double>(stream, s, cfsm::Reachability::kSkip);
    CHECK_FALSE(report.pass());
    // grad g_i vanishes at x*_i, so the relative error is the absolute one.
    CHECK(report.max_violation == doctest::Approx((1.0 - 1.0 / i) * 0.1).epsilon(1e-9));
  }

  TEST_CASE("oracles do not touch the run's FO count") {
    cfsm::Rng rng(4);
    const cfsm::QuadraticStream<double> stream(cfsm::random_ball_points<double>(40, 2, 1.0, rng), 1.0, 1.0);
    const auto domain = cfsm::Domain<double>::ball(VectorXd::Zero(2), 1.0);
    cfsm::CsvrgConfig config;
    config.schedule = cfsm::FixedSchedule{4};
    cfsm::CsvrgTap<double> tap;
    std::size_t checked = 0;
    tap.on_round = [&](const CsvrgSnapshot<double>& s) {
      checked += cfsm::unbias_oracle<double>(stream, s).pass();
    };
    const auto watched = cfsm::csvrg_run(stream, domain, config, tap);
    const auto plain = cfsm::csvrg_run(stream, domain, config);
    CHECK(checked == 39 * 4);
    for (std::size_t i = 0; i < 40; ++i) REQUIRE(watched.records[i].cum_fos == plain.records[i].cum_fos);
  }
}

TEST_SUITE("variance") {
  TEST_CASE("state at the optima with an empty window") {
    const auto stream = random_quadratic(5, 30, 3);
    const auto c = stream.constants();
    const std::size_t i = 12;
    const auto s = state_at(stream, i, i - 1, stream.optimum(i), stream.optimum(i - 1));
    const auto report =
        cfsm::variance_oracle<double>(stream, s, stream.optimum(i), stream.optimum(i - 1), {c.L, c.G, c.mu, 0.05});
    CHECK(report.pass());
  }

  TEST_CASE("bound grows with alpha") {
    const auto stream = random_quadratic(6, 30, 3);
    const auto c = stream.constants();
    const auto s = state_at(stream, 20, 15, vec({0.1, 0.2, 0.3}), vec({0.0, -0.5, 0.2}));
    double last = INFINITY;
    for (double alpha : {0.3, 0.4, 0.6, 0.9}) {
      const double v = cfsm::variance_oracle<double>(stream, s, stream.optimum(20), stream.optimum(15),
                                                     {c.L, c.G, c.mu, alpha})
                           .max_violation;
      CHECK(v <= last);
      last = v;
    }
  }

  TEST_CASE("needs optima") {
    const auto stream = random_quadratic(7, 10, 2);
    const auto c = stream.constants();
    const auto s = state_at(stream, 5, 4, vec({0, 0}), vec({0, 0}));
    CHECK_THROWS_AS(cfsm::variance_oracle<double>(stream, s, VectorXd(), stream.optimum(4), {c.L, c.G, c.mu, 0.1}),
                    cfsm::PreconditionError);
  }
}

TEST_SUITE("distance") {
  TEST_CASE("extension bound holds for arbitrary points") {
    const auto stream = random_quadratic(8, 30, 2);
    const auto c = stream.constants();
    cfsm::Rng rng(8);
    const auto points = cfsm::random_ball_points<double>(200, 2, 1.0, rng);
    for (std::size_t k = 0; k < points.size(); ++k) {
      const std::size_t j = 1 + k % 29;
      for (std::size_t i = j + 1; i <= 30; ++i)
        REQUIRE(cfsm::distance_bound_violation<double>(points[k], stream.optimum(j), stream.optimum(i), i, j, c.G,
                                                       c.mu) <= 0.0);
    }
  }
}

TEST_SUITE("lower bound") {
  TEST_CASE("golden section") {
    double at = 0;
    const double v = cfsm::golden_section_minimize([](double x) { return (x - 0.3) * (x - 0.3) + 2; }, -1, 1, 1e-12, &at);
    CHECK(v == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(at == doctest::Approx(0.3).epsilon(1e-7));
    CHECK(cfsm::golden_section_minimize([](double x) { return x; }, -1, 1) == -1.0);
  }

  TEST_CASE("numeric minimization reproduces the gap formula") {
    for (std::size_t i : {2, 5, 10, 50}) {
      const double gap = cfsm::adversarial_numeric_axis_minimum(i) - cfsm::adversarial_numeric_minimum(i);
      CHECK(std::abs(gap - cfsm::adversarial_gap<double>(i)) <= 1e-9);
    }
  }

  TEST_CASE("demo at n = 10") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto demo = cfsm::lowerbound_demo(10, seed);
      CHECK(demo.earlier_outputs_at_origin);
      CHECK(demo.queries_at_stage == 4);
      CHECK(demo.analytic_bound == doctest::Approx(1.0 / 15720.0));
      if (!demo.hidden_queried) {
        CHECK(demo.second_coordinate_zero);
        CHECK(demo.measured_gap >= 1.0 / 15720.0 - 1e-12);
      }
      CHECK(demo.holds());
    }
    CHECK_THROWS_AS(cfsm::lowerbound_demo(3, 0), cfsm::InvalidInput);
  }
}

TEST_SUITE("suites") {
  TEST_CASE("names and dispatch") {
    CHECK(cfsm::suite_names().size() == 6);
    CHECK_THROWS_AS(cfsm::run_suite("nope"), cfsm::InvalidInput);
  }

  TEST_CASE("every suite passes and is reproducible") {
    for (const auto& name : cfsm::suite_names()) {
      const auto a = cfsm::run_suite(name);
      const auto b = cfsm::run_suite(name);
      CHECK_MESSAGE(a.pass(), a.csv_line());
      CHECK(a.csv_line() == b.csv_line());
    }
  }
}
