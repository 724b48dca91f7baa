#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qms/errors.hpp"
#include "qms/space.hpp"
#include "support.hpp"

using namespace qms;
using namespace qms::testing;

TEST_CASE("two-atom ball masses") {
  const auto k = fix2();
  const auto sigma = AtomicMeasure::uniform(2, 1.0);
  CHECK(ball_measure(k.space(), sigma, "x1", 0.5) == 1.0);
  CHECK(ball_measure(k.space(), sigma, "x1", 1.0) == 2.0);
  CHECK(ball_measure(k.space(), sigma, "x1", 0.49) == 0.0);
  CHECK(ball_measure(k.space(), AtomicMeasure::zero(2), "x1", 10.0) == 0.0);
  CHECK_THROWS_AS(ball_measure(k.space(), sigma, "nope", 1.0), InputError);
  CHECK_THROWS_AS(ball_measure(k.space(), sigma, 0, 0.0), InputError);
}

TEST_CASE("two-atom kappa scan is exact") {
  const auto k = fix2();
  const auto est = estimate_kappa(k.space());
  CHECK(est.value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k.kappa() == 1.0);
  CHECK(est.witness[0] == 0);
  CHECK(est.witness[1] == 0);
  CHECK(est.witness[2] == 1);
  CHECK_FALSE(est.lower_bound_only);
}

TEST_CASE("single point scan") {
  const auto k = fix1();
  CHECK(estimate_kappa(k.space()).value == 0.5);
  CHECK(k.kappa() == 1.0);
  CHECK(breakpoints(k.space(), 0) == std::vector<double>{1.0});
}

TEST_CASE("breakpoints are sorted and deduplicated") {
  const auto k = fix2();
  CHECK(breakpoints(k.space(), "x1") == std::vector<double>{0.5, 1.0});
  std::vector<double> rho{1, 2, 2, 2, 1, 3, 2, 3, 1};
  QuasiMetricSpace s(named_points(3), rho);
  CHECK(breakpoints(s, 0) == std::vector<double>{1.0, 2.0});
}

TEST_CASE("declared kappa below the scan is a violation") {
  // rho(a,c) = 10 with a detour of length 2 through b
  std::vector<double> rho{1, 1, 10, 1, 1, 1, 10, 1, 1};
  SpaceOptions o;
  o.declared_kappa = 2.0;
  try {
    QuasiMetricSpace s(named_points(3), rho, o);
    FAIL("expected a violation");
  } catch (const QuasiMetricViolation& v) {
    CHECK(v.ratio() == doctest::Approx(5.0));
    CHECK(v.witness()[2] == 1);
  }
  o.declared_kappa = 5.0;
  CHECK_NOTHROW(QuasiMetricSpace(named_points(3), rho, o));
  QuasiMetricSpace free(named_points(3), rho);
  CHECK(free.kappa() == doctest::Approx(5.0));
}

TEST_CASE("malformed tables are rejected") {
  CHECK_THROWS_AS(QuasiMetricSpace(named_points(2), {1, 0.5, 0.6, 1}), InputError);
  CHECK_THROWS_AS(QuasiMetricSpace(named_points(2), {1, 0.0, 0.0, 1}), InputError);
  CHECK_THROWS_AS(QuasiMetricSpace(named_points(2), {1, 2, 2}), InputError);
  auto dup = named_points(2);
  dup[1].id = dup[0].id;
  CHECK_THROWS_AS(QuasiMetricSpace(dup, {1, 1, 1, 1}), InputError);
  SpaceOptions o;
  o.declared_kappa = 0.5;
  CHECK_THROWS_AS(QuasiMetricSpace(named_points(1), {1.0}, o), InputError);
  CHECK_THROWS_AS(QuasiMetricSpace::from_upper_triangle(named_points(2), std::vector<double>{1, 2}), InputError);
}

TEST_CASE("measures validate their weights") {
  CHECK_THROWS_AS(AtomicMeasure({1.0, -1.0}), InputError);
  const auto k = fix2();
  CHECK_THROWS_AS(AtomicMeasure::from_ids(k.space(), {{"x3", 1.0}}), InputError);
  const auto m = AtomicMeasure::from_ids(k.space(), {{"x2", 2.0}});
  CHECK(m[0] == 0.0);
  CHECK(m[1] == 2.0);
  CHECK(m.total() == 2.0);
  CHECK(m.scaled(0.5).total() == 1.0);
  CHECK(AtomicMeasure::zero(3).is_zero());
}

TEST_CASE("conjugate exponents") {
  const auto c = ConjugatePair::from_q(2.0);
  CHECK(c.p() == 2.0);
  CHECK(c.small_constant() == doctest::Approx(0.25));
  CHECK(c.gauge_factor() == doctest::Approx(4.0));
  const auto d = ConjugatePair::from_p(3.0);
  CHECK(1.0 / d.p() + 1.0 / d.q() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(ConjugatePair::from_q(1.0), InputError);
  CHECK_THROWS_AS(ConjugatePair(2.0, 3.0), InputError);
}

TEST_CASE("property: ball mass is a right-continuous step function with jumps at breakpoints") {
  Gen g(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + g.index(15);
    const auto k = random_kernel(g, n);
    const auto mu = random_measure(g, n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
      const auto bps = breakpoints(k.space(), x);
      for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
        CHECK(bps[i] < bps[i + 1]);
        const double at = ball_measure(k.space(), mu, x, bps[i]);
        const double mid = ball_measure(k.space(), mu, x, 0.5 * (bps[i] + bps[i + 1]));
        const double next = ball_measure(k.space(), mu, x, bps[i + 1]);
        CHECK(at == mid);
        CHECK(next > mid);
      }
      CHECK(ball_measure(k.space(), mu, x, 0.999 * bps.front()) == 0.0);
      CHECK(ball_measure(k.space(), mu, x, bps.back()) == doctest::Approx(mu.total()));
    }
  }
}

TEST_CASE("property: kappa of powered Euclidean distances stays below 2^(beta-1)") {
  Gen g(12);
  for (int trial = 0; trial < 30; ++trial) {
    const double beta = g.uniform(1.0, 2.0);
    const auto k = random_power_kernel(g, 3 + g.index(20), 1 + g.index(3), beta);
    CHECK(k.kappa() >= 1.0);
    CHECK(k.kappa() <= std::pow(2.0, beta - 1.0) * (1.0 + 1e-12));
  }
}

TEST_CASE("property: kappa is invariant under scaling and sampled scans never exceed the exact one") {
  Gen g(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + g.index(20);
    const auto k = random_kernel(g, n);
    const double lambda = g.uniform(0.01, 100.0);
    std::vector<double> rho(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) rho[i * n + j] = lambda * k.space().rho(i, j);
    }
    const QuasiMetricSpace scaled(named_points(n), rho);
    CHECK(close_rel(scaled.kappa_scan().value, k.space().kappa_scan().value, 1e-12));
    const auto sampled = estimate_kappa(k.space(), KappaMode::sampled, 500, 3);
    CHECK(sampled.lower_bound_only);
    CHECK(sampled.value <= k.space().kappa_scan().value * (1.0 + 1e-15));
  }
}

TEST_CASE("property: no accepted space violates its stored kappa") {
  Gen g(14);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + g.index(12);
    const auto k = random_kernel(g, n);
    const auto& s = k.space();
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t z = 0; z < n; ++z) {
          CHECK(s.rho(x, y) <= s.kappa() * (s.rho(x, z) + s.rho(z, y)) * (1.0 + 1e-12));
        }
      }
    }
  }
}
