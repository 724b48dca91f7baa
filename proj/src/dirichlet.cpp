#include "qms/dirichlet.hpp"

#include "qms/criteria.hpp"
#include "qms/errors.hpp"
#include "qms/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace qms {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_open_unit(double x, const char* what) {
  if (!(x > 0.0 && x < 1.0)) throw InputError(std::string(what) + ": argument must lie in (0,1)");
}

double grade(double t, double gamma) {
  if (gamma == 1.0) return t;
  const double a = std::pow(t, gamma), b = std::pow(1.0 - t, gamma);
  return a / (a + b);
}

SpaceOptions grid_options(std::size_t n) {
  SpaceOptions o;
  if (n > 128) {
    o.mode = KappaMode::sampled;
    o.samples = 200000;
  }
  return o;
}

struct Discretized {
  AtomicMeasure mu;
  bool infinite = false;
};

Discretized discretize(const DensitySpec& spec, const Field& nodes, const Field& weights, const char* what) {
  const std::size_t n = nodes.size();
  Field w(n, 0.0);
  Discretized out;
  if (const auto* c = std::get_if<ConstantDensity>(&spec)) {
    if (!(c->c >= 0.0)) throw InputError(std::string(what) + ": density must be nonnegative");
    for (std::size_t i = 0; i < n; ++i) w[i] = c->c * weights[i];
  } else if (const auto* pw = std::get_if<PowerDensity>(&spec)) {
    if (!(pw->c >= 0.0)) throw InputError(std::string(what) + ": density must be nonnegative");
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = pw->c * std::pow(nodes[i], -pw->a) * std::pow(1.0 - nodes[i], -pw->b) * weights[i];
    }
    out.infinite = pw->c > 0.0 && (pw->a >= 2.0 || pw->b >= 2.0);
  } else {
    for (const auto& [x, m] : std::get<PointMasses>(spec).atoms) {
      require_open_unit(x, what);
      if (!(m >= 0.0)) throw InputError(std::string(what) + ": atom weight must be nonnegative");
      const auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
      std::size_t k = static_cast<std::size_t>(it - nodes.begin());
      if (k == n || (k > 0 && x - nodes[k - 1] <= nodes[k] - x)) --k;
      w[k] += m;
    }
  }
  out.mu = AtomicMeasure(std::move(w));
  return out;
}

Field boundary_weight(const Field& nodes) {
  Field d(nodes.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = nodes[i] * (1.0 - nodes[i]);
  return d;
}

double interpolate(const Field& xs, const Field& ys, double x) {
  if (x <= xs.front()) return ys.front() * x / xs.front();
  if (x >= xs.back()) return ys.back() * (1.0 - x) / (1.0 - xs.back());
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - xs.begin());
  const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return (1.0 - t) * ys[k - 1] + t * ys[k];
}

}  // namespace

double green1d(double x, double y) {
  require_open_unit(x, "green1d");
  require_open_unit(y, "green1d");
  return std::min(x * (1.0 - y), y * (1.0 - x));
}

double naim1d_rho(double x, double y) {
  require_open_unit(x, "naim1d_rho");
  require_open_unit(y, "naim1d_rho");
  return (1.0 - std::min(x, y)) * std::max(x, y);
}

double model_c11_distance(std::span<const double> x, std::span<const double> y, double dx, double dy, int n) {
  if (n < 3) throw InputError("model_c11_distance: dimension must be >= 3");
  if (x.size() != y.size()) throw InputError("model_c11_distance: coordinate lengths differ");
  if (!(dx >= 0.0) || !(dy >= 0.0)) throw InputError("model_c11_distance: boundary distances must be >= 0");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  const double r = std::sqrt(s);
  return std::pow(r, n - 2) * (s + dx * dx + dy * dy);
}

TriangleScan naim1d_triangle_scan(std::size_t triples, std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&] {
    double v = u(rng);
    while (v <= 0.0) v = u(rng);
    return v;
  };
  TriangleScan out;
  out.triples = triples;
  for (std::size_t t = 0; t < triples; ++t) {
    const double x = draw(), y = draw(), z = draw();
    const double lhs = naim1d_rho(x, y);
    const double rhs = naim1d_rho(x, z) + naim1d_rho(z, y);
    const double r = lhs / rhs;
    if (r > out.worst_ratio) {
      out.worst_ratio = r;
      out.witness = {x, y, z};
    }
    if (lhs > rhs + tol) ++out.violations;
  }
  return out;
}

double model_c11_bound(int n) { return std::ldexp(1.0, n - 1) + 3.0 * std::ldexp(1.0, n - 3); }

ModelC11Scan model_c11_check(int n, std::size_t triples, std::uint64_t seed) {
  if (n < 3) throw InputError("model_c11_check: dimension must be >= 3");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t d = static_cast<std::size_t>(n);
  auto draw = [&](std::vector<double>& x) {
    double s = 0.0;
    for (auto& c : x) {
      c = gauss(rng);
      s += c * c;
    }
    const double r = std::pow(u(rng), 1.0 / n) / std::sqrt(s);
    for (auto& c : x) c *= r;
    return 1.0 - std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
  };
  ModelC11Scan out;
  out.bound = model_c11_bound(n);
  out.triples = triples;
  std::vector<double> x(d), y(d), z(d);
  for (std::size_t t = 0; t < triples; ++t) {
    const double dx = draw(x), dy = draw(y), dz = draw(z);
    const double lhs = model_c11_distance(x, y, dx, dy, n);
    const double rhs = model_c11_distance(x, z, dx, dz, n) + model_c11_distance(z, y, dz, dy, n);
    if (rhs > 0.0) out.constant = std::max(out.constant, lhs / rhs);
  }
  out.passed = out.constant <= out.bound;
  return out;
}

Interval1DProblem make_interval_problem(const IntervalSpec& spec) {
  if (spec.grid.cells < 3) throw InputError("dirichlet: at least 3 cells are required");
  if (!(spec.grid.grading >= 1.0)) throw InputError("dirichlet: grading must be >= 1");
  if (!(spec.q > 1.0)) throw InputError("dirichlet: q must exceed 1");
  if (!(spec.epsilon >= 0.0)) throw InputError("dirichlet: epsilon must be >= 0");
  const std::size_t n = spec.grid.cells;
  Interval1DProblem pr;
  pr.q = spec.q;
  pr.epsilon = spec.epsilon;
  pr.nodes.resize(n);
  pr.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = grade(static_cast<double>(i) / n, spec.grid.grading);
    const double b = grade(static_cast<double>(i + 1) / n, spec.grid.grading);
    pr.nodes[i] = 0.5 * (a + b);
    pr.weights[i] = b - a;
  }
  auto s = discretize(spec.sigma, pr.nodes, pr.weights, "sigma");
  auto w = discretize(spec.omega, pr.nodes, pr.weights, "omega");
  pr.sigma = std::move(s.mu);
  pr.omega = std::move(w.mu);
  pr.green_potential_infinite = w.infinite;
  if (w.infinite) pr.notes.push_back("omega: int x(1-x) domega diverges, so G omega is infinite");
  if (s.infinite) pr.notes.push_back("sigma: density not integrable against x(1-x)");
  return pr;
}

std::vector<Point> interval_points(const Field& nodes) {
  std::vector<Point> pts(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    pts[i].id = "x" + std::to_string(i);
    pts[i].coords = {nodes[i]};
  }
  return pts;
}

BVPReport solve_bvp_1d(const Interval1DProblem& problem, const SolveOptions& opts) {
  const std::size_t n = problem.nodes.size();
  const KernelModel green = make_green1d(interval_points(problem.nodes), grid_options(n));
  const Field delta = boundary_weight(problem.nodes);
  Field s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = 1.0 / delta[i];
  const NaimTransform tr = naim_transform(green, s, s, grid_options(n));

  BVPReport rep;
  rep.nodes = problem.nodes;
  Field f = potential(green, problem.omega);
  if (!problem.omega.is_zero()) {
    rep.green_band_lower = kInf;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = f[i] / delta[i];
      rep.green_band_lower = std::min(rep.green_band_lower, r);
      rep.green_band_upper = std::max(rep.green_band_upper, r);
    }
  }
  for (double& v : f) v *= problem.epsilon;
  rep.direct = picard_solve(green, problem.sigma, problem.q, f, opts);

  const AtomicMeasure sigma_t = tr.transform_sigma(problem.sigma, problem.q);
  rep.naim = picard_solve(tr.kernel, sigma_t, problem.q, tr.to_transformed(f), opts);
  rep.u = rep.direct.u;
  rep.u_naim = tr.from_transformed(rep.naim.u);

  const bool c1 = rep.direct.status == SolveStatus::converged;
  const bool c2 = rep.naim.status == SolveStatus::converged;
  const bool d1 = rep.direct.status == SolveStatus::diverged;
  const bool d2 = rep.naim.status == SolveStatus::diverged;
  rep.inconsistent = (c1 && d2) || (c2 && d1);
  if (c1 && c2) {
    for (std::size_t i = 0; i < n; ++i) rep.transform_gap = std::max(rep.transform_gap, std::abs(rep.u[i] - rep.u_naim[i]));
  } else {
    rep.transform_gap = kInf;
  }

  if (c1) {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double hm = problem.nodes[i] - problem.nodes[i - 1];
      const double hp = problem.nodes[i + 1] - problem.nodes[i];
      const double d2u = 2.0 * ((rep.u[i + 1] - rep.u[i]) / hp - (rep.u[i] - rep.u[i - 1]) / hm) / (hm + hp);
      const double load = (problem.sigma[i] * std::pow(rep.u[i], problem.q) + problem.epsilon * problem.omega[i]) /
                          problem.weights[i];
      rep.fd_residual = std::max(rep.fd_residual, std::abs(-d2u - load));
    }
  } else {
    rep.fd_residual = kInf;
  }

  if (!problem.sigma.is_zero() && !problem.omega.is_zero()) {
    rep.pointwise_green = pointwise_constant(green, problem.sigma, problem.q, problem.omega).value;
    rep.pointwise_naim = pointwise_constant(tr.kernel, sigma_t, problem.q, tr.transform_omega(problem.omega)).value;
    rep.pointwise_computed = true;
  }
  return rep;
}

double richardson_gap(const IntervalSpec& spec, const SolveOptions& opts) {
  IntervalSpec coarse = spec;
  coarse.grid.cells = spec.grid.cells / 2;
  const auto fine = solve_bvp_1d(make_interval_problem(spec), opts);
  const auto rough = solve_bvp_1d(make_interval_problem(coarse), opts);
  if (fine.direct.status != SolveStatus::converged || rough.direct.status != SolveStatus::converged) return kInf;
  double gap = 0.0;
  for (std::size_t i = 0; i < fine.nodes.size(); ++i) {
    gap = std::max(gap, std::abs(fine.u[i] - interpolate(rough.nodes, rough.u, fine.nodes[i])));
  }
  return gap;
}

IntervalBattery interval_battery(const Interval1DProblem& problem, const BatteryOptions& opts) {
  const std::size_t n = problem.nodes.size();
  const double q = problem.q;
  const double p = ConjugatePair::from_q(q).p();
  IntervalBattery out;
  out.green_potential_infinite = problem.green_potential_infinite;
  out.notes = problem.notes;
  const KernelModel green = make_green1d(interval_points(problem.nodes), grid_options(n));
  const Field delta = boundary_weight(problem.nodes);
  const AtomicMeasure lebesgue(problem.weights);
  const AtomicMeasure& omega = problem.omega;
  if (omega.is_zero()) {
    out.notes.push_back("omega is zero");
    return out;
  }

  // (a)
  out.pointwise = pointwise_constant(green, lebesgue, q, omega).value;

  // (b) intervals of dyadic length at evenly spread positions
  std::vector<std::vector<PointIndex>> sets;
  for (std::size_t len = 1; len <= std::min(opts.max_interval, n); len *= 2) {
    const std::size_t slots = std::max<std::size_t>(1, opts.max_sets / 7);
    for (std::size_t k = 0; k < slots; ++k) {
      const std::size_t start = (n - len) * k / std::max<std::size_t>(1, slots - 1);
      std::vector<PointIndex> e(len);
      for (std::size_t i = 0; i < len; ++i) e[i] = start + i;
      if (std::find(sets.begin(), sets.end(), e) == sets.end()) sets.push_back(std::move(e));
    }
  }
  if (sets.size() > opts.max_sets) sets.resize(opts.max_sets);
  CapacityOptions copts;
  copts.weight = delta;
  Field dens(n);
  for (std::size_t i = 0; i < n; ++i) dens[i] = std::pow(delta[i], 1.0 - p);
  copts.objective_density = dens;
  std::vector<double> ratio(sets.size(), 0.0), caps(sets.size(), 0.0), masses(sets.size(), 0.0);
  parallel_for(sets.size(), [&](std::size_t s) {
    double mass = 0.0;
    for (PointIndex x : sets[s]) mass += delta[x] * omega[x];
    masses[s] = mass;
    if (mass <= 0.0) return;
    const auto cap = capacity(green, lebesgue, p, sets[s], copts);
    caps[s] = cap.value;
    ratio[s] = cap.value > 0.0 ? mass / cap.value : kInf;
  });
  out.capacity.sets = sets.size();
  out.capacity.sampled = true;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    if (ratio[s] > out.capacity.value) {
      out.capacity.value = ratio[s];
      out.capacity.witness = sets[s];
      out.capacity.witness_cap = caps[s];
      out.capacity.witness_mass = masses[s];
    }
  }

  // (c) Euclidean balls grown around each node
  std::vector<double> best(n, 0.0);
  parallel_for(n, [&](std::size_t c) {
    Field v(n, 0.0);
    std::size_t lo = c, hi = c;
    auto add = [&](std::size_t j) {
      if (omega[j] == 0.0) return;
      const auto row = green.row(j);
      for (std::size_t i = 0; i < n; ++i) v[i] += row[i] * omega[j];
    };
    add(c);
    for (;;) {
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t i = lo; i <= hi; ++i) {
        lhs += std::pow(v[i], q) * delta[i] * problem.weights[i];
        rhs += delta[i] * omega[i];
      }
      if (rhs > 0.0) best[c] = std::max(best[c], lhs / rhs);
      if (lo == 0 && hi == n - 1) break;
      const double step = std::min(lo > 0 ? problem.nodes[c] - problem.nodes[lo - 1] : kInf,
                                   hi + 1 < n ? problem.nodes[hi + 1] - problem.nodes[c] : kInf);
      while (lo > 0 && problem.nodes[c] - problem.nodes[lo - 1] <= step * (1.0 + 1e-12)) add(--lo);
      while (hi + 1 < n && problem.nodes[hi + 1] - problem.nodes[c] <= step * (1.0 + 1e-12)) add(++hi);
    }
  });
  out.testing = *std::max_element(best.begin(), best.end());

  // (d)
  const Field gw = potential(green, omega);
  const auto zb = znorm(green, lebesgue, q, gw, opts.threshold_tol, opts.solve);
  out.threshold_lower = zb.upper > 0.0 ? 1.0 / zb.upper : kInf;
  out.threshold_upper = zb.lower > 0.0 ? 1.0 / zb.lower : kInf;

  const bool f1 = std::isfinite(out.pointwise), f2 = std::isfinite(out.capacity.value),
             f3 = std::isfinite(out.testing), f4 = out.threshold_lower > 0.0;
  out.cross_flag = !(f1 == f2 && f2 == f3 && f3 == f4) || (problem.green_potential_infinite && f1);
  if (problem.green_potential_infinite && f1) {
    out.notes.push_back("discrete constants are finite although the continuous G omega is infinite");
  }
  return out;
}

}  // namespace qms
