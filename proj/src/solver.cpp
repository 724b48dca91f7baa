#include "qms/solver.hpp"

#include "qms/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qms {

namespace {

void require_nonnegative(const Field& f, std::size_t n, const char* what) {
  if (f.size() != n) throw InputError(std::string(what) + ": function does not match the space");
  for (double v : f) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InputError(std::string(what) + ": function must be finite and nonnegative");
    }
  }
}

double sup(const Field& f) {
  double s = 0.0;
  for (double v : f) s = std::max(s, v);
  return s;
}

Field apply_A_unchecked(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f) {
  const std::size_t n = kernel.size();
  std::vector<double> w(n);
  for (std::size_t j = 0; j < n; ++j) w[j] = sigma[j] == 0.0 ? 0.0 : std::pow(f[j], q) * sigma[j];
  Field out(n);
  for (std::size_t x = 0; x < n; ++x) {
    const auto k = kernel.row(x);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += k[j] * w[j];
    out[x] = s;
  }
  return out;
}

double fixed_point_residual(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f,
                            const Field& u) {
  const Field a = apply_A_unchecked(kernel, sigma, q, u);
  double r = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) r = std::max(r, std::abs(u[i] - a[i] - f[i]));
  return r;
}

/// Worst ratio lhs/(c rhs); infinite when lhs > 0 where rhs = 0.
double worst_ratio(const Field& lhs, const Field& rhs, double c) {
  double worst = 0.0;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    if (lhs[i] <= 0.0) continue;
    if (rhs[i] <= 0.0) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, lhs[i] / (c * rhs[i]));
  }
  return worst;
}

bool certify_between(const Field& lo, const Field& u, const Field& hi, double slack) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < lo[i] - slack || u[i] > hi[i] + slack) return false;
  }
  return true;
}

}  // namespace

std::string_view status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::diverged: return "diverged";
    case SolveStatus::indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

std::string_view method_name(ZNormMethod m) {
  switch (m) {
    case ZNormMethod::bisection: return "bisection";
    case ZNormMethod::iterated_limit: return "iterated-limit";
    case ZNormMethod::local: return "local";
  }
  return "bisection";
}

Field apply_A(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f) {
  require_same_size(kernel.space(), sigma, "apply_A");
  require_nonnegative(f, kernel.size(), "apply_A");
  if (!(q > 1.0)) throw InputError("apply_A: q must exceed 1");
  return apply_A_unchecked(kernel, sigma, q, f);
}

SolveReport picard_solve(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f,
                         const SolveOptions& opts) {
  const std::size_t n = kernel.size();
  require_same_size(kernel.space(), sigma, "picard_solve");
  require_nonnegative(f, n, "picard_solve");
  if (!(opts.tol > 0.0)) throw InputError("picard_solve: tol must be positive");
  if (opts.max_iter == 0) throw InputError("picard_solve: max_iter must be positive");
  const ConjugatePair cp = ConjugatePair::from_q(q);
  const double p = cp.p();
  const double sup_f = sup(f);
  const double blowup = opts.blowup.value_or(1e12 * (1.0 + sup_f));
  if (!(blowup > sup_f)) throw InputError("picard_solve: blowup must exceed sup f");

  // Per-atom scalar bounds: any solution has u(x) <= barrier and
  // c_x <= obstruction, where c_x collects every other contribution.
  std::vector<double> kw(n, 0.0), barrier(n, 0.0), obstruction(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    if (sigma[x] > 0.0) {
      kw[x] = kernel(x, x) * sigma[x];
      barrier[x] = std::pow(kw[x], 1.0 - p);
      obstruction[x] = barrier[x] / (p * std::pow(q, p - 1.0));
    }
  }

  SolveReport rep;
  Field u(n, 0.0);
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    const Field a = apply_A_unchecked(kernel, sigma, q, u);
    Field next(n);
    double inc = 0.0;
    double top = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = a[i] + f[i];
      if (!std::isfinite(next[i])) finite = false;
      if (next[i] < u[i] - 1e-14 * std::max(1.0, u[i])) rep.monotone = false;
      inc = std::max(inc, std::abs(next[i] - u[i]));
      top = std::max(top, next[i]);
    }
    rep.iterations = it;
    if (!finite || top > blowup) {
      rep.status = SolveStatus::diverged;
      rep.divergence_reason = "blowup";
      rep.u = std::move(next);
      rep.residual = std::numeric_limits<double>::infinity();
      return rep;
    }
    for (std::size_t x = 0; x < n; ++x) {
      if (kw[x] <= 0.0) continue;
      const double own = kw[x] * std::pow(u[x], q);
      const double c = std::max(0.0, next[x] - own);
      std::string why;
      if (next[x] > barrier[x] * (1.0 + 1e-12)) why = "barrier";
      else if (c > obstruction[x] * (1.0 + 1e-12)) why = "obstruction";
      if (!why.empty()) {
        rep.status = SolveStatus::diverged;
        rep.divergence_reason = why + " at " + kernel.space().id(x);
        rep.u = std::move(next);
        rep.residual = std::numeric_limits<double>::infinity();
        return rep;
      }
    }
    u = std::move(next);
    if (inc <= opts.tol * (1.0 + top)) {
      rep.status = SolveStatus::converged;
      break;
    }
  }
  rep.residual = fixed_point_residual(kernel, sigma, q, f, u);
  rep.u = std::move(u);
  if (rep.status == SolveStatus::converged) rep.certificates.push_back("minimal solution (iterates from 0)");
  return rep;
}

SolveReport guaranteed_solve_small(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                                   const Field& f, const SolveOptions& opts) {
  const ConjugatePair cp = ConjugatePair::from_q(q);
  const Field af = apply_A(kernel, sigma, q, f);
  const double ratio = worst_ratio(af, f, cp.small_constant());
  if (ratio > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "guaranteed_solve_small: hypothesis-not-met, worst A f / (c f) = " << ratio;
    throw HypothesisNotMet(os.str(), ratio);
  }
  SolveReport rep = picard_solve(kernel, sigma, q, f, opts);
  if (rep.status == SolveStatus::converged) {
    Field hi(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) hi[i] = cp.p() * f[i];
    const double slack = 1e-9 * std::max(1.0, sup(rep.u));
    rep.certificates.push_back(certify_between(f, rep.u, hi, slack) ? "f <= u <= p f"
                                                                    : "f <= u <= p f FAILED");
  }
  return rep;
}

SolveReport guaranteed_solve_iterated(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                                      const Field& f, const SolveOptions& opts) {
  const ConjugatePair cp = ConjugatePair::from_q(q);
  const double p = cp.p();
  const Field af = apply_A(kernel, sigma, q, f);
  const Field aaf = apply_A(kernel, sigma, q, af);
  const double c = std::pow(q, -q) * std::pow(p, q * (1.0 - q));
  const double ratio = worst_ratio(aaf, af, c);
  if (ratio > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "guaranteed_solve_iterated: hypothesis-not-met, worst A^2 f / (c A f) = " << ratio;
    throw HypothesisNotMet(os.str(), ratio);
  }
  SolveReport rep = picard_solve(kernel, sigma, q, f, opts);
  if (rep.status == SolveStatus::converged) {
    Field lo(f.size()), hi(f.size());
    const double pq = std::pow(p, q);
    for (std::size_t i = 0; i < f.size(); ++i) {
      lo[i] = f[i] + af[i];
      hi[i] = f[i] + pq * af[i];
    }
    const double slack = 1e-9 * std::max(1.0, sup(rep.u));
    rep.certificates.push_back(certify_between(lo, rep.u, hi, slack) ? "f + A f <= u <= f + p^q A f"
                                                                     : "f + A f <= u <= f + p^q A f FAILED");
  }
  return rep;
}

double subadditivity_check(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f,
                           const Field& g) {
  Field fg(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) fg[i] = f[i] + g[i];
  const Field a = apply_A(kernel, sigma, q, fg);
  const Field af = apply_A(kernel, sigma, q, f);
  const Field ag = apply_A(kernel, sigma, q, g);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double bound = std::pow(std::pow(af[i], 1.0 / q) + std::pow(ag[i], 1.0 / q), q);
    worst = std::max(worst, a[i] - bound);
  }
  return worst;
}

bool minimality_check(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f,
                      const SolveReport& report, const Field& v, double tol) {
  const Field av = apply_A(kernel, sigma, q, v);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] + tol < av[i] + f[i]) throw InputError("minimality_check: hint is not a supersolution");
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (report.u[i] > v[i] + tol) return false;
  }
  return true;
}

double local_norm(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f) {
  const Field af = apply_A(kernel, sigma, q, f);
  const double r = worst_ratio(af, f, 1.0);
  return std::isfinite(r) ? std::pow(r, 1.0 / (q - 1.0)) : r;
}

double iterated_limit(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f,
                      std::size_t steps) {
  const double m0 = sup(f);
  if (m0 <= 0.0) return 0.0;
  Field v(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) v[i] = f[i] / m0;
  double log_scale = std::log(m0);
  double qn = 1.0;
  for (std::size_t s = 0; s < steps; ++s) {
    Field w = apply_A_unchecked(kernel, sigma, q, v);
    const double m = sup(w);
    if (m <= 0.0) return 0.0;
    for (double& x : w) x /= m;
    v = std::move(w);
    log_scale = q * log_scale + std::log(m);
    qn *= q;
  }
  return std::exp(log_scale / qn);
}

ZNormBracket znorm(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f,
                   double tol, const SolveOptions& opts) {
  const std::size_t n = kernel.size();
  require_same_size(kernel.space(), sigma, "znorm");
  require_nonnegative(f, n, "znorm");
  if (sup(f) <= 0.0) throw InputError("znorm: f has empty support");
  if (!(tol > 0.0)) throw InputError("znorm: tol must be positive");
  const ConjugatePair cp = ConjugatePair::from_q(q);
  const double gauge = cp.gauge_factor();

  ZNormBracket br;
  br.local_norm = local_norm(kernel, sigma, q, f);
  br.iterated_steps = static_cast<std::size_t>(
      std::min(500.0, std::ceil(6.0 * std::log(10.0) / std::log(q))));
  br.iterated_limit = iterated_limit(kernel, sigma, q, f, br.iterated_steps);

  const Field af = apply_A_unchecked(kernel, sigma, q, f);
  if (sup(af) <= 0.0) {
    // A f = 0: u = lambda f solves for every scale.
    br.method = ZNormMethod::local;
    return br;
  }

  // Necessary condition at each atom: f(x)/lambda <= p^{-1} q^{1-p} (k w)^{1-p}.
  double certified_lower = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    if (sigma[x] > 0.0 && f[x] > 0.0) {
      const double kw = kernel(x, x) * sigma[x];
      const double limit = std::pow(kw, 1.0 - cp.p()) / gauge;
      certified_lower = std::max(certified_lower, f[x] / limit);
    }
  }

  auto solves = [&](double lambda) {
    Field g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = f[i] / lambda;
    ++br.solves;
    return picard_solve(kernel, sigma, q, g, opts).status;
  };

  double guess = br.iterated_limit > 0.0 ? br.iterated_limit * gauge : br.local_norm;
  if (!std::isfinite(guess) || guess <= 0.0) guess = 1.0;
  double hi = std::max(guess, certified_lower * 2.0);
  bool found = false;
  for (int k = 0; k < 200; ++k) {
    const SolveStatus s = solves(hi);
    if (s == SolveStatus::converged) {
      found = true;
      break;
    }
    if (s == SolveStatus::diverged) certified_lower = std::max(certified_lower, hi);
    hi *= 2.0;
  }
  if (!found) {
    br.method = ZNormMethod::iterated_limit;
    br.lower = std::max(certified_lower, br.iterated_limit);
    br.upper = gauge * std::max(br.iterated_limit, br.lower);
    return br;
  }
  double lo = certified_lower;
  if (lo <= 0.0) {
    lo = hi / 2.0;
    for (int k = 0; k < 200; ++k) {
      const SolveStatus s = solves(lo);
      if (s == SolveStatus::converged) {
        hi = lo;
        lo /= 2.0;
        continue;
      }
      if (s == SolveStatus::diverged) certified_lower = lo;
      else ++br.indeterminate;
      break;
    }
  }
  double search_lo = std::max(lo, certified_lower);
  while (hi - search_lo > tol * hi) {
    const double mid = std::sqrt(search_lo * hi);
    if (!(mid > search_lo && mid < hi)) break;
    const SolveStatus s = solves(mid);
    if (s == SolveStatus::converged) {
      hi = mid;
    } else {
      if (s == SolveStatus::diverged) certified_lower = mid;
      else ++br.indeterminate;
      search_lo = mid;
    }
  }
  br.method = ZNormMethod::bisection;
  br.upper = hi;
  br.lower = br.indeterminate == 0 ? search_lo : certified_lower;
  return br;
}

ZPrimeResult zprime_norm(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& g,
                         double tol, std::size_t max_iter) {
  const std::size_t n = kernel.size();
  require_same_size(kernel.space(), sigma, "zprime_norm");
  require_nonnegative(g, n, "zprime_norm");
  const ConjugatePair cp = ConjugatePair::from_q(q);
  const double p = cp.p();
  const double gauge = cp.gauge_factor();
  ZPrimeResult res;
  res.note = "constant placement between raw infimum and dual norm is unresolved; both scalings reported";

  double gmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sigma[i] > 0.0) gmax = std::max(gmax, g[i]);
  }
  if (gmax <= 0.0) {
    res.converged = true;
    res.h = g;
    return res;
  }

  auto objective = [&](const Field& h, Field* grad) {
    const Field th = potential_of(kernel, sigma, h);
    double val = 0.0;
    Field psi(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (sigma[j] <= 0.0) continue;
      const double ratio = h[j] / th[j];
      val += sigma[j] * h[j] * std::pow(ratio, p - 1.0);
      psi[j] = std::pow(ratio, p);
    }
    if (grad) {
      const Field kpsi = potential_of(kernel, sigma, psi);
      grad->assign(n, 0.0);
      for (std::size_t k = 0; k < n; ++k) {
        if (sigma[k] <= 0.0) continue;
        (*grad)[k] = sigma[k] * (p * std::pow(h[k] / th[k], p - 1.0) - (p - 1.0) * kpsi[k]);
      }
    }
    return val;
  };
  auto residual = [&](const Field& h, const Field& grad) {
    double r = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (sigma[k] <= 0.0) continue;
      r = std::max(r, std::abs(std::min(h[k] - g[k], grad[k])));
      scale = std::max(scale, std::abs(grad[k]));
    }
    return r / (1.0 + scale);
  };

  Field h = g;
  {
    const Field kg = potential_of(kernel, sigma, g);
    const double kmax = sup(kg);
    for (std::size_t i = 0; i < n; ++i) {
      if (sigma[i] > 0.0 && kmax > 0.0) h[i] = g[i] + 1e-6 * gmax * kg[i] / kmax;
    }
  }
  Field grad;
  double val = objective(h, &grad);
  double step = 1.0;
  {
    double gnorm = 0.0;
    for (double v : grad) gnorm = std::max(gnorm, std::abs(v));
    if (gnorm > 0.0) step = gmax / gnorm;
  }
  Field prev_h, prev_grad;
  for (std::size_t it = 0; it < max_iter; ++it) {
    res.iterations = it;
    res.stationarity = residual(h, grad);
    if (res.stationarity <= tol) {
      res.converged = true;
      break;
    }
    if (!prev_h.empty()) {
      double sy = 0.0, ss = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double s = h[k] - prev_h[k], y = grad[k] - prev_grad[k];
        sy += s * y;
        ss += s * s;
      }
      if (sy > 0.0) step = ss / sy;
    }
    Field cand(n);
    double cand_val = val;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      double decrease = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        cand[k] = sigma[k] > 0.0 ? std::max(g[k], h[k] - step * grad[k]) : g[k];
        decrease += grad[k] * (h[k] - cand[k]);
      }
      cand_val = objective(cand, nullptr);
      if (cand_val <= val - 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    prev_h = std::move(h);
    prev_grad = grad;
    h = std::move(cand);
    val = objective(h, &grad);
  }
  res.raw = val;
  res.scaled_up = val * gauge;
  res.scaled_down = val / gauge;
  res.h = h;

  double gg = 0.0;
  Field gs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    gg += g[i] * g[i] * sigma[i];
    if (sigma[i] > 0.0) gs[i] = g[i];
  }
  SolveOptions inner;
  inner.tol = 1e-13;
  inner.max_iter = 1'000'000;
  const ZNormBracket zb = znorm(kernel, sigma, q, gs, std::max(tol, 1e-10), inner);
  if (zb.upper > 0.0) res.support_along_g = gg / zb.upper;
  return res;
}

}  // namespace qms
