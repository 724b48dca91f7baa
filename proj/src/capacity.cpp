#include "qms/capacity.hpp"

#include "qms/criteria.hpp"
#include "qms/errors.hpp"
#include "qms/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace qms {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Program {
  std::size_t m = 0;
  std::size_t n = 0;
  std::span<const double> A;
  std::span<const double> w;
  std::span<const double> mu;
  double p = 2.0;
  double q = 2.0;

  double a(std::size_t i, std::size_t j) const { return A[i * n + j]; }

  void response(const std::vector<double>& lambda, std::vector<double>& c, std::vector<double>& g) const {
    c.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (lambda[i] == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c[j] += lambda[i] * a(i, j);
    }
    g.resize(n);
    for (std::size_t j = 0; j < n; ++j) g[j] = std::pow(c[j] / (p * mu[j]), q - 1.0);
  }

  std::vector<double> apply(const std::vector<double>& g) const {
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a(i, j) * g[j];
      out[i] = s;
    }
    return out;
  }

  double dual(const std::vector<double>& lambda, const std::vector<double>& c, const std::vector<double>& g) const {
    double d = 0.0;
    for (std::size_t i = 0; i < m; ++i) d += lambda[i] * w[i];
    for (std::size_t j = 0; j < n; ++j) d -= c[j] * g[j] / q;
    return d;
  }
};

}  // namespace

CapacityResult solve_power_program(std::span<const double> A, std::span<const double> w,
                                   std::span<const double> mu, double p, double tol, std::size_t max_iter) {
  if (!(p > 1.0)) throw InputError("capacity: p must exceed 1");
  const std::size_t n = mu.size();
  if (n == 0 || A.size() % n != 0 || A.size() / n != w.size()) {
    throw InputError("capacity: program dimensions do not match");
  }
  const double q = p / (p - 1.0);
  const std::size_t m_all = w.size();

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < m_all; ++i) {
    if (w[i] > 0.0) rows.push_back(i);
  }
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < n; ++j) {
    bool used = false;
    for (std::size_t i : rows) used = used || A[i * n + j] > 0.0;
    if (!used) continue;
    if (!(mu[j] > 0.0)) throw InputError("capacity: objective weight must be positive where the constraint acts");
    cols.push_back(j);
  }

  CapacityResult res;
  res.g_star.assign(n, 0.0);
  res.multipliers.assign(m_all, 0.0);
  if (rows.empty()) {
    res.converged = true;
    res.note = "no active constraint";
    return res;
  }
  for (std::size_t i : rows) {
    bool reach = false;
    for (std::size_t j : cols) reach = reach || A[i * n + j] > 0.0;
    if (!reach) {
      res.value = kInf;
      res.dual_bound = kInf;
      res.feasible = false;
      res.note = "infeasible: a constrained point sees no mass";
      return res;
    }
  }

  const std::size_t m = rows.size(), nc = cols.size();
  std::vector<double> a_c(m * nc), w_c(m), mu_c(nc);
  for (std::size_t i = 0; i < m; ++i) {
    w_c[i] = w[rows[i]];
    for (std::size_t j = 0; j < nc; ++j) a_c[i * nc + j] = A[rows[i] * n + cols[j]];
  }
  for (std::size_t j = 0; j < nc; ++j) mu_c[j] = mu[cols[j]];
  const Program prog{m, nc, a_c, w_c, mu_c, p, q};
  const double wmax = *std::max_element(w_c.begin(), w_c.end());

  std::vector<double> lambda(m, 1.0), c, g;
  prog.response(lambda, c, g);
  {
    const double sw = std::accumulate(w_c.begin(), w_c.end(), 0.0);
    double cg = 0.0;
    for (std::size_t j = 0; j < nc; ++j) cg += c[j] * g[j];
    const double t = std::pow(sw / cg, 1.0 / (q - 1.0));
    for (double& l : lambda) l = t;
    prog.response(lambda, c, g);
  }

  double value = kInf, dual = -kInf, kkt = kInf;
  std::vector<double> best_g;
  auto evaluate = [&] {
    const auto ag = prog.apply(g);
    double s = 1.0;
    for (std::size_t i = 0; i < m; ++i) s = std::max(s, w_c[i] / ag[i]);
    double v = 0.0;
    for (std::size_t j = 0; j < nc; ++j) v += mu_c[j] * std::pow(s * g[j], p);
    if (v < value) {
      value = v;
      best_g = g;
      for (double& x : best_g) x *= s;
    }
    dual = std::max(dual, prog.dual(lambda, c, g));
    kkt = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double gr = w_c[i] - ag[i];
      kkt = std::max(kkt, (lambda[i] > 0.0 ? std::abs(gr) : std::max(gr, 0.0)) / wmax);
    }
    return ag;
  };

  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    const auto ag = evaluate();
    if (value - dual <= tol * value) break;
    std::vector<double> grad(m);
    for (std::size_t i = 0; i < m; ++i) grad[i] = w_c[i] - ag[i];
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < m; ++i) {
      if (lambda[i] > 0.0 || grad[i] > 0.0) free.push_back(i);
    }
    if (free.empty()) break;
    const std::size_t f = free.size();
    std::vector<double> gd(nc);
    for (std::size_t j = 0; j < nc; ++j) {
      const double base = c[j] / (p * mu_c[j]);
      gd[j] = base > 0.0 ? (q - 1.0) / (p * mu_c[j]) * std::pow(base, q - 2.0) : 0.0;
    }
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(f, f);
    for (std::size_t r = 0; r < f; ++r) {
      for (std::size_t s = r; s < f; ++s) {
        double acc = 0.0;
        for (std::size_t j = 0; j < nc; ++j) acc += prog.a(free[r], j) * gd[j] * prog.a(free[s], j);
        S(r, s) = acc;
        S(s, r) = acc;
      }
    }
    S.diagonal().array() += 1e-14 * S.diagonal().maxCoeff() + 1e-300;
    Eigen::VectorXd rhs(f);
    for (std::size_t r = 0; r < f; ++r) rhs(r) = grad[free[r]];
    const Eigen::VectorXd d = S.ldlt().solve(rhs);

    const double d0 = prog.dual(lambda, c, g);
    double step = 1.0;
    bool moved = false;
    std::vector<double> trial(m), tc, tg;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      trial = lambda;
      for (std::size_t r = 0; r < f; ++r) trial[free[r]] = std::max(0.0, lambda[free[r]] + step * d(r));
      if (std::all_of(trial.begin(), trial.end(), [](double x) { return x == 0.0; })) continue;
      double slope = 0.0;
      for (std::size_t i = 0; i < m; ++i) slope += grad[i] * (trial[i] - lambda[i]);
      prog.response(trial, tc, tg);
      const double d1 = prog.dual(trial, tc, tg);
      if (d1 >= d0 + 1e-4 * slope && d1 >= d0) {
        moved = d1 > d0 || slope > 0.0;
        break;
      }
    }
    if (!moved) break;
    lambda = std::move(trial);
    c = std::move(tc);
    g = std::move(tg);
  }
  evaluate();

  res.value = value;
  res.dual_bound = std::min(dual, value);
  res.kkt_residual = kkt;
  res.iterations = it;
  res.converged = value - dual <= std::max(tol, 1e-9) * value;
  for (std::size_t j = 0; j < nc; ++j) res.g_star[cols[j]] = best_g[j];
  for (std::size_t i = 0; i < m; ++i) res.multipliers[rows[i]] = lambda[i];
  return res;
}

CapacityResult capacity(const KernelModel& kernel, const AtomicMeasure& sigma, double p,
                        std::span<const PointIndex> E, const CapacityOptions& opts) {
  require_same_size(kernel.space(), sigma, "capacity");
  if (E.empty()) throw InputError("capacity: E must be nonempty");
  const std::size_t n = kernel.size();
  for (PointIndex x : E) {
    if (x >= n) throw InputError("capacity: point index out of range");
  }
  if (opts.weight && opts.weight->size() != n) throw InputError("capacity: weight has the wrong length");
  if (opts.objective_density && opts.objective_density->size() != n) {
    throw InputError("capacity: objective density has the wrong length");
  }

  std::vector<PointIndex> rows;
  for (PointIndex x : E) {
    if (opts.mode == CapacityMode::sigma_ae && sigma[x] <= 0.0) continue;
    rows.push_back(x);
  }
  std::vector<double> w(rows.size()), mu(n), A(rows.size() * n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    w[i] = opts.weight ? (*opts.weight)[rows[i]] : 1.0;
    const auto kr = kernel.row(rows[i]);
    for (std::size_t j = 0; j < n; ++j) A[i * n + j] = kr[j] * sigma[j];
  }
  for (std::size_t j = 0; j < n; ++j) mu[j] = sigma[j] * (opts.objective_density ? (*opts.objective_density)[j] : 1.0);

  if (rows.empty()) {
    CapacityResult res;
    res.g_star.assign(n, 0.0);
    res.converged = true;
    res.note = "no constrained point";
    return res;
  }
  CapacityResult res = solve_power_program(A, w, mu, p, opts.tol, opts.max_iter);
  if (sigma.is_zero() && !res.feasible) res.note = "sigma vanishes: infeasible";
  return res;
}

BallUpper capacity_ball_upper(const KernelModel& kernel, const AtomicMeasure& sigma, double p, PointIndex x,
                              double a) {
  require_same_size(kernel.space(), sigma, "capacity_ball_upper");
  if (!(a > 0.0)) throw InputError("capacity_ball_upper: radius must be positive");
  if (x >= kernel.size()) throw InputError("capacity_ball_upper: point index out of range");
  const double q = ConjugatePair::from_p(p).q();
  const auto& space = kernel.space();
  BallUpper out;
  const auto members = ball(space, x, a);
  if (members.empty()) {
    out.vacuous = true;
    return out;
  }
  const ProfileTable table(kernel, sigma, q);
  out.N = table.N(x, a);
  if (!(out.N > 0.0)) throw InputError("capacity_ball_upper: N(x,a) must be positive");
  const std::size_t n = kernel.size();
  const double kappa = kernel.kappa();

  Field g(n);
  double la = 0.0;
  for (std::size_t y = 0; y < n; ++y) {
    const double r = std::max(space.rho(x, y), a);
    g[y] = std::pow(r, 1.0 - q);
    la += sigma[y] * g[y] / r;
  }
  out.la_over_n = la / out.N;
  const double scale = 2.0 * kappa / la;
  double objective = 0.0;
  for (std::size_t y = 0; y < n; ++y) {
    g[y] *= scale;
    objective += sigma[y] * std::pow(g[y], p);
  }
  out.feasible_value = objective;
  out.bound = std::pow(2.0 * kappa, p) * std::pow(out.N, -p / q);
  const Field kg = potential_of(kernel, sigma, g);
  out.min_on_ball = kInf;
  for (PointIndex y : members) out.min_on_ball = std::min(out.min_on_ball, kg[y]);
  out.g = std::move(g);
  return out;
}

std::vector<BallRatio> capacity_ball_bounds_check(const KernelModel& kernel, const AtomicMeasure& sigma,
                                                  double p,
                                                  std::span<const std::pair<PointIndex, double>> samples) {
  const double q = ConjugatePair::from_p(p).q();
  const ProfileTable table(kernel, sigma, q);
  std::vector<BallRatio> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t s) {
    BallRatio r;
    r.x = samples[s].first;
    r.a = samples[s].second;
    const auto members = ball(kernel.space(), r.x, r.a);
    r.atoms = members.size();
    r.N = table.N(r.x, r.a);
    if (members.empty() || !(r.N > 0.0)) {
      r.skipped = true;
      out[s] = r;
      return;
    }
    const auto cap = capacity(kernel, sigma, p, members);
    r.cap = cap.value;
    r.gap = cap.value - cap.dual_bound;
    r.ratio = cap.value * std::pow(r.N, p / q);
    r.bound = std::pow(2.0 * kernel.kappa(), p) * std::pow(r.N, -p / q);
    r.upper_ok = cap.value <= r.bound * (1.0 + 1e-9);
    out[s] = r;
  });
  return out;
}

std::string_view set_family_name(SetFamily f) {
  switch (f) {
    case SetFamily::balls: return "balls";
    case SetFamily::atoms: return "atoms";
    case SetFamily::balls_atoms: return "balls+atoms";
    case SetFamily::unions: return "unions";
  }
  return "balls";
}

std::vector<std::vector<PointIndex>> enumerate_sets(const QuasiMetricSpace& space, const FamilyOptions& opts) {
  const std::size_t n = space.size();
  std::set<std::vector<PointIndex>> balls;
  if (opts.family != SetFamily::atoms) {
    for (std::size_t x = 0; x < n; ++x) {
      for (double r : breakpoints(space, x)) {
        auto b = ball(space, x, r);
        std::sort(b.begin(), b.end());
        balls.insert(std::move(b));
      }
    }
  }
  std::vector<std::vector<PointIndex>> out;
  if (opts.family == SetFamily::unions) {
    const std::vector<std::vector<PointIndex>> pool(balls.begin(), balls.end());
    std::set<std::vector<PointIndex>> seen(balls.begin(), balls.end());
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t k = std::max<std::size_t>(1, opts.union_size);
    for (std::size_t t = 0; t < opts.max_sets * 4 && seen.size() < balls.size() + opts.max_sets; ++t) {
      std::vector<PointIndex> u;
      for (std::size_t i = 0; i < k; ++i) {
        const auto& b = pool[pick(rng)];
        u.insert(u.end(), b.begin(), b.end());
      }
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      if (seen.insert(u).second) out.push_back(std::move(u));
    }
    out.insert(out.end(), pool.begin(), pool.end());
    return out;
  }
  out.assign(balls.begin(), balls.end());
  if (opts.family == SetFamily::atoms || opts.family == SetFamily::balls_atoms) {
    for (std::size_t x = 0; x < n; ++x) {
      std::vector<PointIndex> one{x};
      if (!balls.count(one)) out.push_back(std::move(one));
    }
  }
  return out;
}

CapacityCondition capacity_condition_constant(const KernelModel& kernel, const AtomicMeasure& sigma, double p,
                                              const AtomicMeasure& omega, const FamilyOptions& opts) {
  require_same_size(kernel.space(), sigma, "capacity_condition_constant");
  require_same_size(kernel.space(), omega, "capacity_condition_constant");
  CapacityCondition out;
  if (omega.is_zero()) return out;
  auto sets = enumerate_sets(kernel.space(), opts);
  if (sets.size() > opts.max_sets) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(sets.begin(), sets.end(), rng);
    sets.resize(opts.max_sets);
    out.sampled = true;
  }
  out.sets = sets.size();
  std::vector<double> ratio(sets.size(), 0.0), caps(sets.size(), 0.0), masses(sets.size(), 0.0);
  parallel_for(sets.size(), [&](std::size_t s) {
    double mass = 0.0;
    for (PointIndex x : sets[s]) mass += omega[x];
    masses[s] = mass;
    if (mass <= 0.0) return;
    const auto cap = capacity(kernel, sigma, p, sets[s], opts.capacity);
    caps[s] = cap.value;
    ratio[s] = cap.value > 0.0 ? mass / cap.value : kInf;
  });
  for (std::size_t s = 0; s < sets.size(); ++s) {
    if (ratio[s] > out.value || (out.witness.empty() && masses[s] > 0.0)) {
      out.value = ratio[s];
      out.witness = sets[s];
      out.witness_cap = caps[s];
      out.witness_mass = masses[s];
    }
  }
  return out;
}

BallLowerCheck ball_lower_check(const KernelModel& kernel, const AtomicMeasure& sigma, double q) {
  require_same_size(kernel.space(), sigma, "ball_lower_check");
  BallLowerCheck out;
  if (sigma.is_zero()) {
    out.vacuous = true;
    out.skipped = true;
    out.note = "sigma is zero";
    return out;
  }
  const auto conds = structural_conditions(kernel, sigma, q);
  const auto& base = conds.at("M_vs_N");
  out.condition_constant = base.constant;
  if (base.vacuous || !std::isfinite(base.constant)) {
    out.skipped = true;
    out.note = "M(x,a) <= C a^{q-1} N(x,a) does not hold with a finite constant at any breakpoint";
    return out;
  }
  const auto& tail = conds.at("tail_integral");
  out.worst = tail.constant;
  out.x = tail.witness.x;
  out.a = tail.witness.a;
  out.note = "integral truncated at the largest breakpoint of each centre";
  return out;
}

}  // namespace qms
