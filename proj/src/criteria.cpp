#include "qms/criteria.hpp"

#include "qms/errors.hpp"
#include "qms/parallel.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace qms {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void keep_max(Witness& best, double v, PointIndex x, double a) {
  if (v > best.value) best = Witness{v, x, a};
}

/// Positive square root of a measure, used for the symmetric p = 2 operator.
std::vector<double> root_weights(const AtomicMeasure& mu) {
  std::vector<double> r(mu.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::sqrt(mu[i]);
  return r;
}

WeightedNormResult exact_two(const KernelModel& kernel, const AtomicMeasure& sigma, const AtomicMeasure& omega) {
  // lambda_max of B^T B with B_ij = omega_i^{1/2} K_ij sigma_j^{1/2}.
  const std::size_t n = kernel.size();
  const auto ws = root_weights(omega);
  const auto ss = root_weights(sigma);
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    if (ws[i] > 0.0) rows.push_back(i);
    if (ss[i] > 0.0) cols.push_back(i);
  }
  WeightedNormResult res;
  res.exact = true;
  if (rows.empty() || cols.empty()) return res;
  const std::size_t m = cols.size();
  // G = B^T B restricted to active columns.
  std::vector<double> g(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      double s = 0.0;
      for (std::size_t i : rows) s += ws[i] * ws[i] * kernel(i, cols[a]) * kernel(i, cols[b]);
      s *= ss[cols[a]] * ss[cols[b]];
      g[a * m + b] = s;
      g[b * m + a] = s;
    }
  }
  std::vector<double> v(m, 1.0), w(m);
  double lower = 0.0, upper = kInf;
  for (std::size_t it = 1; it <= 20000; ++it) {
    double vv = 0.0, vw = 0.0, cw = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < m; ++b) s += g[a * m + b] * v[b];
      w[a] = s;
    }
    for (std::size_t a = 0; a < m; ++a) {
      vv += v[a] * v[a];
      vw += v[a] * w[a];
      cw = std::max(cw, w[a] / v[a]);
    }
    lower = std::max(lower, vw / vv);
    upper = std::min(upper, cw);
    res.iterations = it;
    if (upper - lower <= 1e-13 * upper) break;
    double top = 0.0;
    for (double x : w) top = std::max(top, x);
    for (std::size_t a = 0; a < m; ++a) v[a] = w[a] / top;
  }
  res.value = lower;
  res.upper = upper;
  res.witness = "power iteration";
  return res;
}

}  // namespace

Witness pointwise_constant(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                           const AtomicMeasure& omega) {
  require_same_size(kernel.space(), sigma, "pointwise_constant");
  require_same_size(kernel.space(), omega, "pointwise_constant");
  if (omega.is_zero()) throw DegenerateInput("pointwise_constant: omega is zero");
  const Field kw = potential(kernel, omega);
  const Field lhs = apply_A(kernel, sigma, q, kw);
  Witness best;
  for (std::size_t x = 0; x < kernel.size(); ++x) {
    if (sigma[x] <= 0.0) continue;
    if (kw[x] <= 0.0) throw DegenerateInput("pointwise_constant: K omega vanishes at a sigma atom");
    keep_max(best, lhs[x] / kw[x], x, 0.0);
  }
  return best;
}

Witness infinitesimal_constant(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                               const AtomicMeasure& omega) {
  require_same_size(kernel.space(), sigma, "infinitesimal_constant");
  require_same_size(kernel.space(), omega, "infinitesimal_constant");
  const double s = ConjugatePair::from_q(q).p() / q;
  const auto& space = kernel.space();
  const std::size_t n = kernel.size();
  std::vector<Witness> per(n);
  parallel_for(n, [&](std::size_t x) {
    const auto nb = space.sorted_neighbors(x);
    double A = 0.0, B = 0.0, D = 0.0, C = 0.0;
    for (std::size_t j = 0; j < n; ++j) C += omega[j] / space.rho(x, j);
    Witness best;
    // t = 1/a; on a piece M = A - B t and L = C + D t.
    auto f = [&](double t) {
      const double m = std::max(0.0, A - B * t);
      return std::pow(m, s) * (C + D * t);
    };
    std::size_t k = 0;
    while (k < n) {
      const double b = space.rho(x, nb[k]);
      while (k < n && space.rho(x, nb[k]) == b) {
        const PointIndex y = nb[k];
        A += sigma[y] / b;
        B += sigma[y];
        D += omega[y];
        C -= omega[y] / b;
        ++k;
      }
      if (k == n) C = 0.0;
      const double t_hi = 1.0 / b;
      const double t_lo = k < n ? 1.0 / space.rho(x, nb[k]) : 0.0;
      keep_max(best, f(t_hi), x, b);
      if (D > 0.0 && B > 0.0) {
        const double t = (D * A - s * B * C) / (D * B * (1.0 + s));
        if (t > t_lo && t < t_hi) keep_max(best, f(t), x, 1.0 / t);
      }
    }
    per[x] = best;
  });
  Witness out;
  for (const auto& w : per) keep_max(out, w.value, w.x, w.a);
  return out;
}

Witness testing_constant(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                         const AtomicMeasure& omega) {
  require_same_size(kernel.space(), sigma, "testing_constant");
  require_same_size(kernel.space(), omega, "testing_constant");
  if (omega.is_zero()) throw DegenerateInput("testing_constant: omega is zero");
  const auto& space = kernel.space();
  const std::size_t n = kernel.size();
  std::vector<Witness> per(n);
  parallel_for(n, [&](std::size_t x) {
    const auto nb = space.sorted_neighbors(x);
    std::vector<double> v(n, 0.0);
    double mass = 0.0;
    Witness best;
    std::size_t k = 0;
    while (k < n) {
      const double b = space.rho(x, nb[k]);
      while (k < n && space.rho(x, nb[k]) == b) {
        const PointIndex z = nb[k++];
        if (omega[z] == 0.0) continue;
        mass += omega[z];
        const auto kz = kernel.row(z);
        for (std::size_t y = 0; y < n; ++y) v[y] += omega[z] * kz[y];
      }
      if (mass <= 0.0) continue;
      double integral = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const PointIndex y = nb[i];
        if (sigma[y] > 0.0) integral += sigma[y] * std::pow(v[y], q);
      }
      keep_max(best, integral / mass, x, b);
    }
    per[x] = best;
  });
  Witness out;
  for (const auto& w : per) keep_max(out, w.value, w.x, w.a);
  return out;
}

double weighted_ratio(const KernelModel& kernel, const AtomicMeasure& sigma, const AtomicMeasure& omega,
                      double p, const Field& g) {
  const Field kg = potential_of(kernel, sigma, g);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (omega[i] > 0.0) num += omega[i] * std::pow(kg[i], p);
    if (sigma[i] > 0.0) den += sigma[i] * std::pow(g[i], p);
  }
  return den > 0.0 ? num / den : 0.0;
}

WeightedNormResult weighted_norm_constant(const KernelModel& kernel, const AtomicMeasure& sigma,
                                          const AtomicMeasure& omega, double p) {
  require_same_size(kernel.space(), sigma, "weighted_norm_constant");
  require_same_size(kernel.space(), omega, "weighted_norm_constant");
  if (!(p > 1.0)) throw InputError("weighted_norm_constant: p must exceed 1");
  if (p == 2.0) return exact_two(kernel, sigma, omega);

  const double q = p / (p - 1.0);
  const auto& space = kernel.space();
  const std::size_t n = kernel.size();
  WeightedNormResult res;
  res.exact = false;
  res.upper = kInf;
  Field best_g;

  // Characteristic functions of all balls, built incrementally per centre.
  std::vector<WeightedNormResult> per(n);
  std::vector<Field> per_g(n);
  parallel_for(n, [&](std::size_t x) {
    const auto nb = space.sorted_neighbors(x);
    Field kg(n, 0.0);
    double mass = 0.0;
    std::size_t k = 0;
    WeightedNormResult r;
    double best_radius = 0.0;
    while (k < n) {
      const double b = space.rho(x, nb[k]);
      while (k < n && space.rho(x, nb[k]) == b) {
        const PointIndex z = nb[k++];
        if (sigma[z] == 0.0) continue;
        mass += sigma[z];
        const auto kz = kernel.row(z);
        for (std::size_t y = 0; y < n; ++y) kg[y] += sigma[z] * kz[y];
      }
      if (mass <= 0.0) continue;
      double num = 0.0;
      for (std::size_t y = 0; y < n; ++y) {
        if (omega[y] > 0.0) num += omega[y] * std::pow(kg[y], p);
      }
      if (num / mass > r.value) {
        r.value = num / mass;
        best_radius = b;
      }
    }
    if (r.value > 0.0) {
      Field g(n, 0.0);
      for (PointIndex y : ball(space, x, best_radius)) g[y] = 1.0;
      per_g[x] = std::move(g);
    }
    per[x] = r;
  });
  for (std::size_t x = 0; x < n; ++x) {
    if (per[x].value > res.value) {
      res.value = per[x].value;
      best_g = per_g[x];
      res.witness = "ball at " + space.id(x);
    }
  }

  // Truncated lower kernels L_a(x, .)^{q-1} at a few radii per centre.
  for (std::size_t x = 0; x < n; ++x) {
    const auto bps = breakpoints(space, x);
    const std::size_t stride = std::max<std::size_t>(1, bps.size() / 6);
    for (std::size_t i = 0; i < bps.size(); i += stride) {
      Field g(n);
      for (std::size_t y = 0; y < n; ++y) g[y] = std::pow(1.0 / std::max(space.rho(x, y), bps[i]), q - 1.0);
      const double r = weighted_ratio(kernel, sigma, omega, p, g);
      if (r > res.value) {
        res.value = r;
        best_g = std::move(g);
        res.witness = "truncated kernel at " + space.id(x);
      }
    }
  }

  // Nonlinear power iteration g <- [K((K g)^{p-1} omega)]^{q-1}.
  if (!best_g.empty()) {
    Field g = best_g;
    for (std::size_t it = 0; it < 500; ++it) {
      const Field kg = potential_of(kernel, sigma, g);
      Field t(n);
      for (std::size_t i = 0; i < n; ++i) t[i] = std::pow(kg[i], p - 1.0);
      Field next = potential_of(kernel, omega, t);
      double top = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        next[i] = std::pow(next[i], q - 1.0);
        top = std::max(top, next[i]);
      }
      if (top <= 0.0) break;
      for (double& v : next) v /= top;
      const double r = weighted_ratio(kernel, sigma, omega, p, next);
      res.iterations = it + 1;
      const bool improved = r > res.value * (1.0 + 1e-14);
      if (r > res.value) {
        res.value = r;
        res.witness = "nonlinear power iteration";
      }
      g = std::move(next);
      if (!improved && it > 5) break;
    }
  }
  return res;
}

double hardy_property_check(const KernelModel& kernel, const AtomicMeasure& sigma, const Field& g, double s) {
  if (!(s >= 1.0)) throw InputError("hardy_property_check: s must be >= 1");
  const Field kg = potential_of(kernel, sigma, g);
  Field h(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) h[i] = g[i] * std::pow(kg[i], s - 1.0);
  const Field kh = potential_of(kernel, sigma, h);
  const double c = s * std::pow(2.0 * kernel.kappa(), s - 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (kg[i] <= 0.0) continue;
    worst = std::max(worst, std::pow(kg[i], s) / (c * kh[i]));
  }
  return worst;
}

IteratedWeights iterated_weight_constants(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                                          const Field& f, std::size_t n_max) {
  const double p = ConjugatePair::from_q(q).p();
  IteratedWeights out;
  out.exact = p == 2.0;
  Field fn = f;
  double qn = 1.0;
  for (std::size_t k = 0; k <= n_max; ++k) {
    Field w(fn.size());
    bool finite = true;
    for (std::size_t i = 0; i < fn.size(); ++i) {
      w[i] = std::pow(fn[i], q) * sigma[i];
      if (!std::isfinite(w[i]) || w[i] > 1e300) finite = false;
    }
    if (!finite) {
      out.overflow = true;
      break;
    }
    const double c = weighted_norm_constant(kernel, sigma, AtomicMeasure(std::move(w)), p).value;
    out.constants.push_back(c);
    const double norm = std::pow(c, 1.0 / qn);
    out.normalized.push_back(norm);
    out.sup_normalized = std::max(out.sup_normalized, norm);
    fn = apply_A(kernel, sigma, q, fn);
    qn *= q;
  }
  return out;
}

double tail_integral(const ProfileTable& table, PointIndex x, double a, double upper) {
  const double q = table.q();
  const double p = q / (q - 1.0);
  const double s = p / q;
  const double c = 1.0 / q;
  const double b = s - c;
  const double m = table.M(x, a);
  if (m <= 0.0 || upper <= a) return 0.0;
  const std::size_t n = table.size();
  double total = 0.0;
  double lo = a;
  std::size_t k = table.count_within(x, lo);
  while (lo < upper) {
    const double hi = std::min(upper, k < n ? table.radius(x, k) : kInf);
    const double s0 = table.mass_prefix(x, k);
    const double t = table.power_suffix(x, k);
    double piece = 0.0;
    if (s0 > 0.0 && t > 0.0) {
      auto v = [&](double r) { return s0 / (s0 + t * std::pow(r, q)); };
      piece = std::pow(q, s - 1.0) * std::pow(t, c - s) * std::pow(s0, -c) *
              (boost::math::beta(c, b, v(lo)) - boost::math::beta(c, b, v(hi)));
    } else if (t > 0.0) {
      piece = std::pow(q, s) * std::pow(t, -s) * (1.0 / lo - 1.0 / hi);
    } else if (s0 > 0.0) {
      piece = std::pow(q, s) * std::pow(s0, -s) * (std::pow(hi, p - 1.0) - std::pow(lo, p - 1.0)) / (p - 1.0);
    }
    total += piece;
    lo = hi;
    while (k < n && table.radius(x, k) <= lo) ++k;
  }
  return std::pow(m, s) * total;
}

std::map<std::string, ConditionValue> structural_conditions(const KernelModel& kernel,
                                                            const AtomicMeasure& sigma, double q,
                                                            const StructuralOptions& opts) {
  const double p = ConjugatePair::from_q(q).p();
  const std::size_t n = kernel.size();
  const ProfileTable table(kernel, sigma, q);
  const char* keys[] = {"M_vs_N", "M_vs_ballN", "M_doubling", "M_neighbour",
                        "tail_integral", "ball_doubling", "ball_decay"};
  constexpr std::size_t K = 7;
  std::vector<std::array<Witness, K>> per(n);
  std::vector<std::array<bool, K>> seen(n);
  parallel_for(n, [&](std::size_t x) {
    std::array<Witness, K> w{};
    std::array<bool, K> hit{};
    const auto bps = table.breakpoints(x);
    const double top = bps.back();
    std::vector<double> masses(bps.size()), logs(bps.size());
    for (std::size_t i = 0; i < bps.size(); ++i) {
      masses[i] = table.ball(x, bps[i]);
      logs[i] = std::log(bps[i]);
    }
    auto put = [&](std::size_t key, double v, double a) {
      hit[key] = true;
      keep_max(w[key], v, x, a);
    };
    for (std::size_t i = 0; i < bps.size(); ++i) {
      const double a = bps[i];
      const double m = table.M(x, a);
      const double nn = table.N(x, a);
      const double mass = masses[i];
      if (m > 0.0) {
        put(0, m / (std::pow(a, q - 1.0) * nn), a);
        put(1, m / (std::pow(mass, 1.0 / p) * std::pow(nn, 1.0 / q)), a);
        put(2, table.M(x, 2.0 * a) / m, a);
        put(3, table.Mstar(x, a) / m, a);
        if (a < top) put(4, tail_integral(table, x, a, top), a);
      }
      if (mass > 0.0) {
        put(5, table.ball(x, 2.0 * a) / mass, a);
        for (std::size_t j = 0; j < i; ++j) {
          if (masses[j] <= 0.0) continue;
          put(6, masses[j] / mass * std::exp((1.0 + opts.delta) * (logs[i] - logs[j])), a);
        }
      }
    }
    per[x] = w;
    seen[x] = hit;
  });
  std::map<std::string, ConditionValue> out;
  const char* contexts[] = {
      "M(x,a) <= C a^{q-1} N(x,a)",
      "M(x,a) <= C |B_a(x)|^{1/p} N(x,a)^{1/q}",
      "M(x,2a) <= C M(x,a)",
      "M(y,a) <= C M(x,a) for rho(x,y) <= a",
      "M(x,a)^{p/q} int_a^R N(x,t)^{-p/q} t^{-2} dt, R = largest breakpoint at x",
      "|B_2R| <= C |B_R|",
      "|B_r| <= C (r/R)^{1+delta} |B_R|"};
  for (std::size_t k = 0; k < K; ++k) {
    ConditionValue cv;
    cv.context = contexts[k];
    bool any = false;
    for (std::size_t x = 0; x < n; ++x) {
      if (!seen[x][k]) continue;
      any = true;
      keep_max(cv.witness, per[x][k].value, per[x][k].x, per[x][k].a);
    }
    cv.constant = cv.witness.value;
    cv.vacuous = !any;
    if (k == 6) {
      std::ostringstream os;
      os << cv.context << ", delta = " << opts.delta;
      cv.context = os.str();
    }
    out[keys[k]] = cv;
  }
  return out;
}

Nondegeneracy nondegeneracy_check(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                                  PointIndex x, double a) {
  if (!(a > 0.0)) throw InputError("nondegeneracy_check: radius must be positive");
  const double p = ConjugatePair::from_q(q).p();
  const ProfileTable table(kernel, sigma, q);
  return Nondegeneracy{table.N(x, a), table.sup_scaled_mstar(x, a, q / p)};
}

PhiBall phi_ball(const KernelModel& kernel, const AtomicMeasure& sigma, double q, PointIndex x, double a,
                 double s) {
  if (!(a > 0.0)) throw InputError("phi_ball: radius must be positive");
  if (x >= kernel.size()) throw InputError("phi_ball: point index out of range");
  const double p = ConjugatePair::from_q(q).p();
  const ProfileTable table(kernel, sigma, q);
  const auto& space = kernel.space();
  const std::size_t n = kernel.size();
  const double kappa = kernel.kappa();

  PhiBall out;
  const double mass = table.ball(x, a);
  const double tail = table.sup_scaled_mstar(x, a, q / p);
  out.term_n = std::pow(mass, 1.0 / q) * std::pow(table.N(x, a), p / (q * q));
  out.term_mstar = std::pow(table.Mstar(x, a), p / q);
  out.term_tail = std::pow(mass, 1.0 / q) * std::pow(tail, p / (q * q));
  out.phi = out.term_n + out.term_mstar + out.term_tail;
  out.ball_lower_hint = std::pow(table.M(x, a) / (4.0 * kappa), p / q);

  out.phi_b.assign(n, 0.0);
  for (std::size_t j = 0;; ++j) {
    const double r = a * std::ldexp(1.0, -static_cast<int>(j));
    if (table.count_within(x, r) == 0) break;
    const double c = std::ldexp(1.0, static_cast<int>(j)) * table.ball(x, r) / (4.0 * kappa * a);
    out.radii.push_back(r);
    out.coefficients.push_back(c);
    for (std::size_t y = 0; y < n; ++y) {
      if (space.rho(x, y) <= r) out.phi_b[y] += c;
    }
  }

  Field chi(n, 0.0);
  for (PointIndex y : ball(space, x, a)) chi[y] = 1.0;
  const Field kchi = potential_of(kernel, sigma, chi);
  Field phis(n);
  for (std::size_t y = 0; y < n; ++y) phis[y] = std::pow(out.phi_b[y], s);
  const Field kphis = potential_of(kernel, sigma, phis);
  for (std::size_t y = 0; y < n; ++y) {
    const double v = out.phi_b[y];
    if (v <= 0.0) continue;
    out.covering_worst = std::max(out.covering_worst, kchi[y] > 0.0 ? v / kchi[y] : kInf);
    const double rhs = std::pow(v, s + 1.0) / (s + 1.0);
    out.power_worst = std::max(out.power_worst, kphis[y] > 0.0 ? rhs / kphis[y] : kInf);
  }
  return out;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::solvable_certified: return "solvable-certified";
    case Verdict::unsolvable_certified: return "unsolvable-certified";
    case Verdict::indeterminate: return "boundary/indeterminate";
    case Verdict::vacuous: return "vacuous";
  }
  return "boundary/indeterminate";
}

CriteriaReport verdict(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                       const AtomicMeasure& omega, const VerdictOptions& opts) {
  require_same_size(kernel.space(), sigma, "verdict");
  require_same_size(kernel.space(), omega, "verdict");
  if (!(opts.epsilon > 0.0)) throw InputError("verdict: epsilon must be positive");
  const ConjugatePair cp = ConjugatePair::from_q(q);
  CriteriaReport rep;
  rep.q = q;
  rep.p = cp.p();
  rep.epsilon = opts.epsilon;
  if (omega.is_zero()) {
    rep.verdict = Verdict::vacuous;
    rep.notes.push_back("omega is zero");
    return rep;
  }
  rep.pointwise = pointwise_constant(kernel, sigma, q, omega);
  rep.infinitesimal = infinitesimal_constant(kernel, sigma, q, omega);
  rep.testing = testing_constant(kernel, sigma, q, omega);
  rep.weighted = weighted_norm_constant(kernel, sigma, omega, cp.p());
  if (opts.structural) rep.structural = structural_conditions(kernel, sigma, q, opts.structural_opts);
  rep.constants_finite = std::isfinite(rep.pointwise.value) && std::isfinite(rep.infinitesimal.value) &&
                         std::isfinite(rep.testing.value) && std::isfinite(rep.weighted.value);

  const Field kw = potential(kernel, omega);
  Field f(kw.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = opts.epsilon * kw[i];
  const double scaled = rep.pointwise.value * std::pow(opts.epsilon, q - 1.0);
  rep.small_constant_certified = scaled <= cp.small_constant() * (1.0 + 1e-12);

  if (rep.small_constant_certified) {
    rep.verdict = Verdict::solvable_certified;
    try {
      rep.solve = guaranteed_solve_small(kernel, sigma, q, f, opts.solve);
      rep.bounds_verified = std::find(rep.solve.certificates.begin(), rep.solve.certificates.end(),
                                      "f <= u <= p f") != rep.solve.certificates.end();
    } catch (const HypothesisNotMet& e) {
      rep.solve = picard_solve(kernel, sigma, q, f, opts.solve);
      rep.notes.push_back("pointwise bound holds on supp sigma only; bounds checked on supp sigma");
      if (rep.solve.status == SolveStatus::converged) {
        bool ok = true;
        for (std::size_t i = 0; i < f.size(); ++i) {
          if (sigma[i] <= 0.0) continue;
          if (rep.solve.u[i] < f[i] * (1.0 - 1e-9) || rep.solve.u[i] > cp.p() * f[i] * (1.0 + 1e-9)) ok = false;
        }
        rep.bounds_verified = ok;
      }
    }
    if (rep.solve.status != SolveStatus::converged) {
      rep.notes.push_back("small-constant certificate holds; Picard cross-check did not converge within max_iter");
    }
  } else {
    rep.solve = picard_solve(kernel, sigma, q, f, opts.solve);
    if (rep.solve.status == SolveStatus::converged) {
      rep.verdict = Verdict::solvable_certified;
    } else if (rep.solve.status == SolveStatus::diverged && rep.solve.divergence_reason != "blowup") {
      rep.verdict = Verdict::unsolvable_certified;
    } else {
      rep.verdict = Verdict::indeterminate;
    }
  }
  if (rep.verdict == Verdict::solvable_certified && !rep.constants_finite) {
    rep.notes.push_back("inconsistency: solvable instance with an infinite constant");
  }

  if (opts.threshold) {
    const ZNormBracket zb = znorm(kernel, sigma, q, kw, opts.threshold_tol, opts.solve);
    rep.threshold_lower = zb.upper > 0.0 ? 1.0 / zb.upper : kInf;
    rep.threshold_upper = zb.lower > 0.0 ? 1.0 / zb.lower : kInf;
  }
  return rep;
}

CarlesonCheck poisson_carleson_check(const KernelModel& kernel, const AtomicMeasure& sigma,
                                     const AtomicMeasure& omega, double p) {
  if (kernel.family() != KernelFamily::poisson) throw InputError("carleson: kernel must be of the poisson family");
  require_same_size(kernel.space(), sigma, "carleson");
  require_same_size(kernel.space(), omega, "carleson");
  const auto& pts = kernel.space().points();
  const std::size_t n = pts.size();
  const std::size_t dim = pts.front().coords.size() - 1;
  const double cn = std::tgamma(0.5 * (dim + 1)) / std::pow(std::numbers::pi, 0.5 * (dim + 1));
  Field t_density(n), embed_density(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = pts[i].coords[dim];
    if (sigma[i] > 0.0 && t != 0.0) throw InputError("carleson: sigma must live on boundary atoms (t = 0)");
    t_density[i] = t;
    embed_density[i] = std::pow(cn * t, p);
  }
  CarlesonCheck out;
  const AtomicMeasure omega_t = omega.with_density(t_density);
  if (!omega_t.is_zero() && !sigma.is_zero()) {
    out.pointwise = pointwise_constant(kernel, omega_t, p, sigma).value;
  }
  out.embedding = weighted_norm_constant(kernel, sigma, omega.with_density(embed_density), p);
  return out;
}

}  // namespace qms
