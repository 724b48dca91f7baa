#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qms/criteria.hpp"
#include "qms/dirichlet.hpp"
#include "qms/errors.hpp"
#include "support.hpp"

using namespace qms;
using namespace qms::testing;

namespace {

double max_error(const BVPReport& r, double (*exact)(double)) {
  double e = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) e = std::max(e, std::abs(r.u[i] - exact(r.nodes[i])));
  return e;
}

double parabola(double x) { return 0.5 * x * (1.0 - x); }

// -u'' = x gives u = x(1 - x^2)/6
double cubic(double x) { return x * (1.0 - x * x) / 6.0; }

IntervalSpec linear_spec(std::size_t cells, double grading = 1.0) {
  IntervalSpec s;
  s.grid.cells = cells;
  s.grid.grading = grading;
  return s;
}

}  // namespace

TEST_CASE("green and naim point values") {
  CHECK(green1d(0.2, 0.8) == doctest::Approx(0.04));
  CHECK(green1d(0.3, 0.3) == doctest::Approx(0.21));
  CHECK(naim1d_rho(0.2, 0.8) == doctest::Approx(0.64));
  CHECK(naim1d_rho(0.2, 0.8) <= naim1d_rho(0.2, 0.5) + naim1d_rho(0.5, 0.8));
  CHECK(naim1d_rho(0.2, 0.5) + naim1d_rho(0.5, 0.8) == doctest::Approx(0.8));
  CHECK_THROWS_AS(green1d(0.0, 0.5), InputError);
  CHECK_THROWS_AS(naim1d_rho(0.5, 1.0), InputError);
}

TEST_CASE("naim distance is a metric on sampled triples") {
  const auto s = naim1d_triangle_scan(100000, 7);
  CHECK(s.violations == 0);
  CHECK(s.worst_ratio <= 1.0 + 1e-12);
}

TEST_CASE("model distance") {
  const std::vector<double> x{0.1, 0.2, 0.3}, y{0.4, -0.2, 0.0};
  CHECK(model_c11_distance(x, y, 0.0, 0.0, 3) == doctest::Approx(std::pow(0.5830951894845301, 3)).epsilon(1e-12));
  CHECK(model_c11_distance(x, y, 0.3, 0.1, 3) == doctest::Approx(model_c11_distance(y, x, 0.1, 0.3, 3)));
  CHECK(model_c11_bound(3) == 7.0);
  const auto c = model_c11_check(3, 50000, 3);
  CHECK(c.passed);
  CHECK(c.constant >= 1.0);
  CHECK_THROWS_AS(model_c11_check(2, 10, 1), InputError);
}

TEST_CASE("linear load reproduces the parabola with error h^2/8") {
  for (std::size_t cells : {32u, 64u, 128u}) {
    const auto r = solve_bvp_1d(make_interval_problem(linear_spec(cells)));
    REQUIRE(r.direct.status == SolveStatus::converged);
    const double h = 1.0 / cells;
    CHECK(max_error(r, parabola) == doctest::Approx(h * h / 8.0).epsilon(1e-6));
    CHECK(r.fd_residual < 1e-9);
    CHECK(r.transform_gap <= 1e-8 * (1.0 + 0.125));
    CHECK_FALSE(r.inconsistent);
  }
}

TEST_CASE("graded grids converge at second order") {
  const auto a = solve_bvp_1d(make_interval_problem(linear_spec(64, 2.0)));
  const auto b = solve_bvp_1d(make_interval_problem(linear_spec(128, 2.0)));
  const double order = std::log2(max_error(a, parabola) / max_error(b, parabola));
  CHECK(order >= 1.9);
}

TEST_CASE("polynomial load") {
  IntervalSpec s = linear_spec(128);
  s.omega = PowerDensity{1.0, -1.0, 0.0};
  const auto r = solve_bvp_1d(make_interval_problem(s));
  REQUIRE(r.direct.status == SolveStatus::converged);
  const double h = 1.0 / 128;
  CHECK(max_error(r, cubic) <= h * h);
}

TEST_CASE("nonlinear problem agrees on both paths and the pointwise constant is transform invariant") {
  IntervalSpec s = linear_spec(96);
  s.sigma = ConstantDensity{1.0};
  s.epsilon = 0.5;
  const auto r = solve_bvp_1d(make_interval_problem(s));
  REQUIRE(r.direct.status == SolveStatus::converged);
  REQUIRE(r.naim.status == SolveStatus::converged);
  double sup = 0.0;
  for (double v : r.u) sup = std::max(sup, v);
  CHECK(r.transform_gap <= 1e-8 * (1.0 + sup));
  REQUIRE(r.pointwise_computed);
  CHECK(close_rel(r.pointwise_green, r.pointwise_naim, 1e-10));
}

TEST_CASE("large epsilon diverges on both paths") {
  IntervalSpec s = linear_spec(64);
  s.sigma = ConstantDensity{1.0};
  s.epsilon = 500.0;
  const auto r = solve_bvp_1d(make_interval_problem(s));
  CHECK(r.direct.status == SolveStatus::diverged);
  CHECK(r.naim.status == SolveStatus::diverged);
  CHECK_FALSE(r.inconsistent);
}

TEST_CASE("richardson comparison shrinks with the grid") {
  // for a constant load the coarse offset cancels the interpolation error exactly
  CHECK(richardson_gap(linear_spec(64)) < 1e-14);
  IntervalSpec s = linear_spec(64);
  s.omega = PowerDensity{1.0, -1.0, 0.0};
  const double a = richardson_gap(s);
  s.grid.cells = 128;
  const double b = richardson_gap(s);
  CHECK(a > 0.0);
  CHECK(b < a);
}

TEST_CASE("point masses snap to nodes") {
  IntervalSpec s = linear_spec(10);
  s.omega = PointMasses{{{0.52, 1.0}}};
  const auto pr = make_interval_problem(s);
  CHECK(pr.omega[5] == 1.0);
  CHECK(pr.omega.total() == 1.0);
}

TEST_CASE("comparability band of the green potential") {
  IntervalSpec s = linear_spec(50);
  s.omega = PointMasses{{{0.49, 1.0}}};
  const auto r = solve_bvp_1d(make_interval_problem(s));
  // G(x, y) / (x(1-x)) is y/x right of y, (1-y)/(1-x) left of it
  CHECK(r.green_band_lower == doctest::Approx(0.49 / 0.99).epsilon(1e-9));
  CHECK(r.green_band_upper == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(solve_bvp_1d(make_interval_problem(linear_spec(16))).green_band_lower >= 0.5);
}

TEST_CASE("boundary-heavy omega is flagged") {
  IntervalSpec s = linear_spec(64);
  s.omega = PowerDensity{1.0, 0.0, 2.5};
  const auto pr = make_interval_problem(s);
  CHECK(pr.green_potential_infinite);
  IntervalSpec t = linear_spec(64);
  t.omega = PowerDensity{1.0, 0.0, 1.5};
  CHECK_FALSE(make_interval_problem(t).green_potential_infinite);
}

TEST_CASE("battery with Lebesgue omega") {
  IntervalSpec s = linear_spec(48);
  s.sigma = ConstantDensity{1.0};
  BatteryOptions o;
  o.max_sets = 24;
  o.max_interval = 16;
  const auto b = interval_battery(make_interval_problem(s), o);
  CHECK(std::isfinite(b.pointwise));
  CHECK(std::isfinite(b.capacity.value));
  CHECK(b.capacity.value > 0.0);
  CHECK(std::isfinite(b.testing));
  CHECK(b.threshold_lower > 0.0);
  CHECK(b.threshold_lower <= b.threshold_upper);
  CHECK_FALSE(b.cross_flag);
}

TEST_CASE("battery with one atom in the middle") {
  IntervalSpec s = linear_spec(48);
  s.sigma = ConstantDensity{1.0};
  s.omega = PointMasses{{{0.5, 1.0}}};
  BatteryOptions o;
  o.max_sets = 24;
  o.max_interval = 16;
  const auto b = interval_battery(make_interval_problem(s), o);
  CHECK(std::isfinite(b.pointwise));
  CHECK(b.threshold_lower > 0.0);
  CHECK_FALSE(b.cross_flag);
}

TEST_CASE("bad problem specs") {
  IntervalSpec s = linear_spec(2);
  CHECK_THROWS_AS(make_interval_problem(s), InputError);
  s = linear_spec(16);
  s.q = 1.0;
  CHECK_THROWS_AS(make_interval_problem(s), InputError);
  s = linear_spec(16);
  s.grid.grading = 0.5;
  CHECK_THROWS_AS(make_interval_problem(s), InputError);
}

TEST_CASE("property: threshold in epsilon shrinks when sigma or omega grows") {
  Gen g(61);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 24;
    IntervalSpec s = linear_spec(n);
    s.sigma = ConstantDensity{g.uniform(0.5, 2.0)};
    s.omega = ConstantDensity{g.uniform(0.5, 2.0)};
    const auto pr = make_interval_problem(s);
    const KernelModel green = make_green1d(interval_points(pr.nodes));
    auto threshold = [&](const AtomicMeasure& sigma, const AtomicMeasure& omega) {
      const auto z = znorm(green, sigma, pr.q, potential(green, omega), 1e-6);
      return 1.0 / z.upper;
    };
    Field bump_s(n), bump_w(n);
    for (std::size_t i = 0; i < n; ++i) {
      bump_s[i] = 1.0 + g.uniform(0.0, 1.0);
      bump_w[i] = 1.0 + g.uniform(0.0, 1.0);
    }
    const double base = threshold(pr.sigma, pr.omega);
    CHECK(threshold(pr.sigma.with_density(bump_s), pr.omega) <= base * (1 + 1e-5));
    CHECK(threshold(pr.sigma, pr.omega.with_density(bump_w)) <= base * (1 + 1e-5));
  }
}

TEST_CASE("property: naim kernel equals x(1-x) y(1-y) / G") {
  Gen g(62);
  for (int i = 0; i < 1000; ++i) {
    const double x = g.uniform(1e-6, 1 - 1e-6), y = g.uniform(1e-6, 1 - 1e-6);
    CHECK(close_rel(naim1d_rho(x, y), x * (1 - x) * y * (1 - y) / green1d(x, y), 1e-14));
    CHECK(green1d(x, y) == green1d(y, x));
  }
}
