#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qms/capacity.hpp"
#include "qms/errors.hpp"
#include "support.hpp"

using namespace qms;
using namespace qms::testing;

namespace {

const AtomicMeasure two = AtomicMeasure::uniform(2, 1.0);

std::vector<PointIndex> random_subset(Gen& g, std::size_t n) {
  std::vector<PointIndex> e;
  for (std::size_t i = 0; i < n; ++i) {
    if (g.coin(0.4)) e.push_back(i);
  }
  if (e.empty()) e.push_back(g.index(n));
  return e;
}

}  // namespace

TEST_CASE("capacity of one atom of a pair") {
  const std::vector<PointIndex> e{0};
  const auto c = capacity(fix2(), two, 2.0, e);
  CHECK(c.converged);
  CHECK(c.value == doctest::Approx(0.2).epsilon(1e-10));
  CHECK(c.g_star[0] == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(c.g_star[1] == doctest::Approx(0.4).epsilon(1e-8));
  CHECK(c.dual_bound <= c.value * (1 + 1e-12));
  CHECK(c.value - c.dual_bound < 1e-10);
}

TEST_CASE("capacity of the whole pair and of a single atom space") {
  const std::vector<PointIndex> both{0, 1};
  CHECK(capacity(fix2(), two, 2.0, both).value == doctest::Approx(2.0 / 9.0).epsilon(1e-10));
  const std::vector<PointIndex> e{0};
  CHECK(capacity(fix1(), AtomicMeasure::uniform(1, 1.0), 2.0, e).value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("capacity condition constant on the pair") {
  FamilyOptions atoms;
  atoms.family = SetFamily::atoms;
  const auto a = capacity_condition_constant(fix2(), two, 2.0, two, atoms);
  CHECK(a.value == doctest::Approx(5.0).epsilon(1e-9));
  const auto b = capacity_condition_constant(fix2(), two, 2.0, two);
  CHECK(b.value == doctest::Approx(9.0).epsilon(1e-9));
  CHECK(b.witness.size() == 2);
  CHECK(b.witness_cap == doctest::Approx(2.0 / 9.0).epsilon(1e-9));
}

TEST_CASE("explicit ball test function") {
  const auto b = capacity_ball_upper(fix2(), two, 2.0, 0, 0.5);
  CHECK_FALSE(b.vacuous);
  CHECK(b.N == doctest::Approx(2.5));
  CHECK(b.feasible_value == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(b.bound == doctest::Approx(1.6).epsilon(1e-12));
  CHECK(b.min_on_ball >= 1.0 - 1e-12);
  const std::vector<std::pair<PointIndex, double>> samples{{0, 0.5}, {0, 1.0}};
  for (const auto& r : capacity_ball_bounds_check(fix2(), two, 2.0, samples)) {
    CHECK(r.upper_ok);
    CHECK(r.cap <= r.bound * (1 + 1e-12));
  }
}

TEST_CASE("sigma-null points do not count in the almost-everywhere mode") {
  const AtomicMeasure sigma({1.0, 0.0});
  const std::vector<PointIndex> e{1};
  CHECK(capacity(fix2(), sigma, 2.0, e).value == doctest::Approx(0.25).epsilon(1e-10));
  CapacityOptions o;
  o.mode = CapacityMode::sigma_ae;
  CHECK(capacity(fix2(), sigma, 2.0, e, o).value == 0.0);
}

TEST_CASE("power program on one row") {
  const std::vector<double> a{1.0, 1.0}, w{1.0}, mu{1.0, 1.0};
  const auto r = solve_power_program(a, w, mu, 2.0);
  CHECK(r.value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.g_star[0] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("infeasible and bad input") {
  const std::vector<double> a{0.0, 0.0}, w{1.0}, mu{1.0, 1.0};
  CHECK_FALSE(solve_power_program(a, w, mu, 2.0).feasible);
  const std::vector<PointIndex> e{5};
  CHECK_THROWS_AS(capacity(fix2(), two, 2.0, e), InputError);
  const std::vector<PointIndex> ok{0};
  CHECK_THROWS_AS(capacity(fix2(), two, 1.0, ok), InputError);
}

TEST_CASE("ball lower check is skipped on one atom") {
  const auto l = ball_lower_check(fix1(), AtomicMeasure::uniform(1, 1.0), 2.0);
  CHECK(l.skipped);
}

TEST_CASE("set families") {
  const auto k = fix2();
  FamilyOptions o;
  // B_0.5(x1) = {x2}
  o.family = SetFamily::balls;
  CHECK(enumerate_sets(k.space(), o).size() == 3);
  o.family = SetFamily::atoms;
  CHECK(enumerate_sets(k.space(), o).size() == 2);
  o.family = SetFamily::balls_atoms;
  CHECK(enumerate_sets(k.space(), o).size() == 3);
  CHECK(set_family_name(SetFamily::unions) == "unions");
}

TEST_CASE("property: primal value and dual bound agree and g is feasible") {
  Gen g(41);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + g.index(15);
    const auto k = random_kernel(g, n);
    const auto sigma = random_measure(g, n, 0.0);
    const double p = g.uniform(1.3, 4.0);
    const auto e = random_subset(g, n);
    const auto c = capacity(k, sigma, p, e);
    REQUIRE(c.feasible);
    CHECK(c.dual_bound <= c.value * (1 + 1e-10));
    CHECK(c.value - c.dual_bound <= 1e-7 * std::max(1.0, c.value));
    const auto kg = potential_of(k, sigma, c.g_star);
    for (auto x : e) CHECK(kg[x] >= 1.0 - 1e-9);
    double obj = 0.0;
    for (std::size_t j = 0; j < n; ++j) obj += sigma[j] * std::pow(c.g_star[j], p);
    CHECK(close_rel(obj, c.value, 1e-9));
  }
}

TEST_CASE("property: capacity is monotone in E") {
  Gen g(42);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + g.index(12);
    const auto k = random_kernel(g, n);
    const auto sigma = random_measure(g, n, 0.0);
    const double p = g.uniform(1.3, 3.0);
    auto e = random_subset(g, n);
    const double small = capacity(k, sigma, p, e).value;
    e.push_back(g.index(n));
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    CHECK(capacity(k, sigma, p, e).value >= small * (1 - 1e-9));
  }
}

TEST_CASE("property: scaling K and sigma") {
  Gen g(43);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 1 + g.index(10);
    const auto k = random_kernel(g, n);
    const auto sigma = random_measure(g, n, 0.0);
    const double p = g.uniform(1.3, 3.0), lambda = g.uniform(0.2, 5.0);
    const auto e = random_subset(g, n);
    const double base = capacity(k, sigma, p, e).value;
    // K -> lambda K
    std::vector<double> rho(n * n);
    for (std::size_t i = 0; i < n * n; ++i) rho[i] = k.space().rho(i / n, i % n) / lambda;
    const KernelModel scaled(QuasiMetricSpace(named_points(n), rho));
    CHECK(close_rel(capacity(scaled, sigma, p, e).value, base * std::pow(lambda, -p), 1e-7));
    // sigma -> lambda sigma
    CHECK(close_rel(capacity(k, sigma.scaled(lambda), p, e).value, base * std::pow(lambda, 1.0 - p), 1e-7));
  }
}

TEST_CASE("property: ball capacity is at most the explicit test function value") {
  Gen g(44);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 2 + g.index(12);
    const auto k = random_kernel(g, n);
    const auto sigma = random_measure(g, n, 0.0);
    const double p = g.uniform(1.3, 3.0);
    const PointIndex x = g.index(n);
    const auto bps = breakpoints(k.space(), x);
    const double a = bps[g.index(bps.size())];
    const auto b = capacity_ball_upper(k, sigma, p, x, a);
    if (b.vacuous) continue;
    CHECK(b.min_on_ball >= 1.0 - 1e-9);
    CHECK(b.feasible_value <= b.bound * (1 + 1e-12));
    const auto ball_pts = ball(k.space(), x, a);
    CHECK(capacity(k, sigma, p, ball_pts).value <= b.feasible_value * (1 + 1e-8));
  }
}
