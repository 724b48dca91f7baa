#include "qms/kernel.hpp"

#include "qms/errors.hpp"
#include "qms/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace qms {

namespace {

std::vector<double> reciprocal_table(const QuasiMetricSpace& space) {
  const std::size_t n = space.size();
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = space.row(i);
    for (std::size_t j = 0; j < n; ++j) k[i * n + j] = 1.0 / r[j];
  }
  return k;
}

void require_radius(double a, const char* what) {
  if (!(a > 0.0) || std::isnan(a)) throw InputError(std::string(what) + ": radius must be positive");
}

}  // namespace

std::string_view family_name(KernelFamily family) {
  switch (family) {
    case KernelFamily::custom: return "custom";
    case KernelFamily::riesz: return "riesz";
    case KernelFamily::green1d: return "green1d";
    case KernelFamily::naim1d: return "naim1d";
    case KernelFamily::model_c11: return "modelC11";
    case KernelFamily::poisson: return "poisson";
  }
  return "custom";
}

KernelModel::KernelModel(QuasiMetricSpace space, KernelFamily family, std::string description)
    : space_(std::move(space)), family_(family), description_(std::move(description)) {
  k_ = reciprocal_table(space_);
}

KernelModel::KernelModel(QuasiMetricSpace space, std::vector<double> values, KernelFamily family,
                         std::string description)
    : space_(std::move(space)), family_(family), description_(std::move(description)), k_(std::move(values)) {
  const std::size_t n = space_.size();
  if (k_.size() != n * n) throw InputError("kernel: value table has wrong size");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double prod = k_[i * n + j] * space_.rho(i, j);
      if (std::abs(prod - 1.0) > 1e-12) throw InputError("kernel: values disagree with 1/rho");
    }
  }
}

Field potential(const KernelModel& kernel, const AtomicMeasure& mu) {
  require_same_size(kernel.space(), mu, "potential");
  const std::size_t n = kernel.size();
  Field out(n, 0.0);
  const auto& w = mu.weights();
  for (std::size_t x = 0; x < n; ++x) {
    const auto k = kernel.row(x);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += k[j] * w[j];
    out[x] = s;
  }
  return out;
}

Field potential_of(const KernelModel& kernel, const AtomicMeasure& sigma, std::span<const double> g) {
  require_same_size(kernel.space(), sigma, "potential");
  const std::size_t n = kernel.size();
  if (g.size() != n) throw InputError("potential: function does not match the space");
  std::vector<double> gw(n);
  for (std::size_t j = 0; j < n; ++j) gw[j] = g[j] * sigma[j];
  Field out(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    const auto k = kernel.row(x);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += k[j] * gw[j];
    out[x] = s;
  }
  return out;
}

Field potential_via_balls(const KernelModel& kernel, const AtomicMeasure& mu) {
  require_same_size(kernel.space(), mu, "potential_via_balls");
  const auto& space = kernel.space();
  const std::size_t n = space.size();
  Field out(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    const auto nb = space.sorted_neighbors(x);
    double mass = 0.0;
    double total = 0.0;
    std::size_t k = 0;
    while (k < n) {
      const double b = space.rho(x, nb[k]);
      while (k < n && space.rho(x, nb[k]) == b) mass += mu[nb[k++]];
      // |B_r| equals `mass` on [b, next)
      if (k < n) {
        const double next = space.rho(x, nb[k]);
        total += mass * (1.0 / b - 1.0 / next);
      } else {
        total += mass / b;
      }
    }
    out[x] = total;
  }
  return out;
}

Field DenseMatrix::apply(const AtomicMeasure& mu) const {
  if (mu.size() != cols_) throw InputError("matrix: measure has wrong size");
  Field out(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) s += data_[i * cols_ + j] * mu[j];
    out[i] = s;
  }
  return out;
}

KernelSplit split(const KernelModel& kernel, double a) {
  require_radius(a, "split");
  const std::size_t n = kernel.size();
  KernelSplit s{a, DenseMatrix(n, n), DenseMatrix(n, n)};
  const double cap = 1.0 / a;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double k = kernel(i, j);
      const double lo = std::min(k, cap);
      s.lower(i, j) = lo;
      s.upper(i, j) = k - lo;
    }
  }
  return s;
}

double lower_potential(const KernelModel& kernel, const AtomicMeasure& mu, PointIndex x, double a) {
  require_radius(a, "lower_potential");
  const auto r = kernel.space().row(x);
  double s = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) s += mu[j] / std::max(r[j], a);
  return s;
}

double upper_potential(const KernelModel& kernel, const AtomicMeasure& mu, PointIndex x, double a) {
  require_radius(a, "upper_potential");
  const auto r = kernel.space().row(x);
  double s = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) {
    if (r[j] <= a) s += mu[j] * (1.0 / r[j] - 1.0 / a);
  }
  return s;
}

ProfileTable::ProfileTable(const KernelModel& kernel, const AtomicMeasure& sigma, double q)
    : n_(kernel.size()), q_(q) {
  if (!(q > 1.0)) throw InputError("profile: q must exceed 1");
  require_same_size(kernel.space(), sigma, "profile");
  const auto& space = kernel.space();
  radii_.resize(n_ * n_);
  order_.resize(n_ * n_);
  s0_.assign(n_ * (n_ + 1), 0.0);
  s1_.assign(n_ * (n_ + 1), 0.0);
  tq_.assign(n_ * (n_ + 1), 0.0);
  for (std::size_t x = 0; x < n_; ++x) {
    const auto nb = space.sorted_neighbors(x);
    double* s0 = s0_.data() + x * (n_ + 1);
    double* s1 = s1_.data() + x * (n_ + 1);
    double* tq = tq_.data() + x * (n_ + 1);
    for (std::size_t k = 0; k < n_; ++k) {
      const PointIndex y = nb[k];
      const double r = space.rho(x, y);
      radii_[x * n_ + k] = r;
      order_[x * n_ + k] = y;
      s0[k + 1] = s0[k] + sigma[y];
      s1[k + 1] = s1[k] + sigma[y] / r;
    }
    for (std::size_t k = n_; k-- > 0;) {
      tq[k] = tq[k + 1] + sigma[nb[k]] * std::pow(radii_[x * n_ + k], -q);
    }
  }
}

std::size_t ProfileTable::count_within(PointIndex x, double a) const {
  const double* first = radii_.data() + x * n_;
  return static_cast<std::size_t>(std::upper_bound(first, first + n_, a) - first);
}

double ProfileTable::ball(PointIndex x, double a) const {
  require_radius(a, "profile");
  return mass_prefix(x, count_within(x, a));
}

double ProfileTable::M(PointIndex x, double a) const {
  require_radius(a, "profile");
  const std::size_t k = count_within(x, a);
  return std::max(0.0, inverse_prefix(x, k) - mass_prefix(x, k) / a);
}

double ProfileTable::N(PointIndex x, double a) const {
  require_radius(a, "profile");
  const std::size_t k = count_within(x, a);
  return (mass_prefix(x, k) * std::pow(a, -q_) + power_suffix(x, k)) / q_;
}

double ProfileTable::Mstar(PointIndex x, double a) const {
  double best = M(x, a);
  const std::size_t k = count_within(x, a);
  for (std::size_t i = 0; i < k; ++i) best = std::max(best, M(neighbor(x, i), a));
  return best;
}

std::vector<double> ProfileTable::breakpoints(PointIndex x) const {
  std::vector<double> out;
  for (std::size_t k = 0; k < n_; ++k) {
    const double r = radius(x, k);
    if (out.empty() || r != out.back()) out.push_back(r);
  }
  return out;
}

double ProfileTable::sup_scaled_m(PointIndex y, double r0, double s) const {
  // On each piece M = A - B/r, so r^{-s} M peaks at r = (s+1) B / (s A).
  double best = 0.0;
  auto value = [&](double r, std::size_t k) {
    const double m = std::max(0.0, inverse_prefix(y, k) - mass_prefix(y, k) / r);
    return std::pow(r, -s) * m;
  };
  std::size_t k = count_within(y, r0);
  double lo = r0;
  for (;;) {
    const double hi = k < n_ ? radius(y, k) : std::numeric_limits<double>::infinity();
    best = std::max(best, value(lo, k));
    const double A = inverse_prefix(y, k);
    const double B = mass_prefix(y, k);
    if (A > 0.0) {
      const double crit = (s + 1.0) * B / (s * A);
      if (crit > lo && crit < hi) best = std::max(best, value(crit, k));
    }
    if (k >= n_) break;
    lo = hi;
    while (k < n_ && radius(y, k) <= lo) ++k;
  }
  return best;
}

double ProfileTable::sup_scaled_mstar(PointIndex x, double a, double s) const {
  require_radius(a, "profile");
  double best = sup_scaled_m(x, a, s);
  for (std::size_t i = 0; i < n_; ++i) {
    const PointIndex y = neighbor(x, i);
    best = std::max(best, sup_scaled_m(y, std::max(a, radius(x, i)), s));
  }
  return best;
}

double LocalProfile::M(double a) const { return table_->M(x_, a); }
double LocalProfile::Mstar(double a) const { return table_->Mstar(x_, a); }
double LocalProfile::N(double a) const { return table_->N(x_, a); }
double LocalProfile::ball(double a) const { return table_->ball(x_, a); }

LocalProfile local_profile(const KernelModel& kernel, const AtomicMeasure& sigma, double q, PointIndex x) {
  if (x >= kernel.size()) throw InputError("local_profile: point index out of range");
  return LocalProfile(std::make_shared<const ProfileTable>(kernel, sigma, q), x);
}

HarnackResult harnack_check(const KernelModel& kernel, const AtomicMeasure& mu,
                            std::span<const std::pair<PointIndex, double>> samples) {
  require_same_size(kernel.space(), mu, "harnack_check");
  const double two_kappa = 2.0 * kernel.kappa();
  std::vector<HarnackResult> per(samples.size());
  parallel_for(samples.size(), [&](std::size_t s) {
    const auto [x, a] = samples[s];
    HarnackResult r;
    r.x = x;
    r.a = a;
    const double lx = lower_potential(kernel, mu, x, a);
    const auto b = ball(kernel.space(), x, a);
    if (lx <= 0.0 || b.empty()) {
      per[s] = r;
      return;
    }
    double hi = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    for (PointIndex y : b) {
      const double ly = lower_potential(kernel, mu, y, a);
      hi = std::max(hi, ly);
      lo = std::min(lo, ly);
    }
    r.worst_ratio = std::max(hi / (two_kappa * lx), lx / (two_kappa * lo));
    r.checked = 1;
    per[s] = r;
  });
  HarnackResult out;
  for (const auto& r : per) {
    out.checked += r.checked;
    if (r.checked && r.worst_ratio > out.worst_ratio) {
      out.worst_ratio = r.worst_ratio;
      out.x = r.x;
      out.a = r.a;
    }
  }
  return out;
}

HarnackResult harnack_check(const KernelModel& kernel, const AtomicMeasure& mu) {
  std::vector<std::pair<PointIndex, double>> samples;
  for (PointIndex x = 0; x < kernel.size(); ++x) {
    for (double a : breakpoints(kernel.space(), x)) samples.emplace_back(x, a);
  }
  return harnack_check(kernel, mu, samples);
}

double stability_check(const KernelModel& kernel, const AtomicMeasure& mu, PointIndex x) {
  const auto radii = breakpoints(kernel.space(), x);
  std::vector<double> l(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) l[i] = lower_potential(kernel, mu, x, radii[i]);
  double worst = 0.0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    for (std::size_t j = 0; j < radii.size(); ++j) {
      const double bound = std::max(1.0, radii[j] / radii[i]) * l[j];
      if (bound > 0.0) worst = std::max(worst, l[i] / bound);
    }
  }
  return worst;
}

AtomicMeasure NaimTransform::transform_sigma(const AtomicMeasure& sigma, double q) const {
  Field d(s1.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::pow(s1[i], -q) / s2[i];
  return sigma.with_density(d);
}

AtomicMeasure NaimTransform::transform_omega(const AtomicMeasure& omega) const {
  Field d(s2.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = 1.0 / s2[i];
  return omega.with_density(d);
}

std::pair<AtomicMeasure, AtomicMeasure> NaimTransform::weighted_norm_measures(
    const AtomicMeasure& sigma, const AtomicMeasure& omega, double p) const {
  const double q = p / (p - 1.0);
  Field ds(s2.size()), dw(s1.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ds[i] = std::pow(s2[i], 1.0 - q);
    dw[i] = std::pow(s1[i], -p);
  }
  return {sigma.with_density(ds), omega.with_density(dw)};
}

Field NaimTransform::to_transformed(const Field& u) const {
  Field out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = s1[i] * u[i];
  return out;
}

Field NaimTransform::from_transformed(const Field& u) const {
  Field out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] / s1[i];
  return out;
}

NaimTransform naim_transform(const KernelModel& base, Field s1, Field s2, SpaceOptions opts) {
  const std::size_t n = base.size();
  if (s1.size() != n || s2.size() != n) throw InputError("naim_transform: weights do not match the space");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(s1[i] > 0.0) || !(s2[i] > 0.0) || !std::isfinite(s1[i]) || !std::isfinite(s2[i])) {
      throw InputError("naim_transform: weights must be finite and positive");
    }
  }
  std::vector<double> k(n * n), rho(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) k[i * n + j] = s1[i] * base(i, j) * s2[j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = k[i * n + j], b = k[j * n + i];
      if (std::abs(a - b) > 1e-12 * std::max(a, b)) {
        throw InputError("naim_transform: s1 G s2 is not symmetric (s1/s2 must be constant)");
      }
      k[j * n + i] = a;
    }
  }
  for (std::size_t i = 0; i < n * n; ++i) rho[i] = 1.0 / k[i];
  QuasiMetricSpace space(base.space().points(), std::move(rho), opts);
  std::string desc = "transform of " + std::string(family_name(base.family()));
  if (!base.description().empty()) desc += " (" + base.description() + ")";
  KernelModel kernel(std::move(space), KernelFamily::custom, std::move(desc));
  return NaimTransform{std::move(kernel), std::move(s1), std::move(s2)};
}

}  // namespace qms
