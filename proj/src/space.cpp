#include "qms/space.hpp"

#include "qms/errors.hpp"
#include "qms/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace qms {

namespace {

std::string triple_text(const QuasiMetricSpace& s, const std::array<PointIndex, 3>& t) {
  std::ostringstream os;
  os << "(" << s.id(t[0]) << ", " << s.id(t[1]) << ", " << s.id(t[2]) << ")";
  return os.str();
}

struct RowBest {
  double ratio = -1.0;
  PointIndex y = 0;
  PointIndex z = 0;
};

}  // namespace

QuasiMetricSpace::QuasiMetricSpace(std::vector<Point> points, std::vector<double> rho,
                                   SpaceOptions opts)
    : points_(std::move(points)), rho_(std::move(rho)) {
  const std::size_t n = points_.size();
  if (n == 0) throw InputError("space: at least one point is required");
  if (rho_.size() != n * n) throw InputError("space: rho table has wrong size");
  for (std::size_t i = 0; i < n; ++i) {
    if (points_[i].id.empty()) throw InputError("space: empty point id");
    if (!index_.emplace(points_[i].id, i).second) {
      throw InputError("space: duplicate point id '" + points_[i].id + "'");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = rho_[i * n + j];
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw InputError("space: rho(" + points_[i].id + ", " + points_[j].id +
                         ") must be finite and positive");
      }
      if (j > i) {
        const double w = rho_[j * n + i];
        if (std::abs(v - w) > 1e-12 * std::max(v, w)) {
          throw InputError("space: rho is not symmetric at (" + points_[i].id + ", " +
                           points_[j].id + ")");
        }
      }
    }
  }

  order_.resize(n * n);
  for (std::size_t x = 0; x < n; ++x) {
    auto* first = order_.data() + x * n;
    std::iota(first, first + n, PointIndex{0});
    const double* r = rho_.data() + x * n;
    std::stable_sort(first, first + n, [r](PointIndex a, PointIndex b) { return r[a] < r[b]; });
  }

  scan_ = estimate_kappa(*this, opts.mode, opts.samples, opts.seed);
  if (opts.declared_kappa) {
    const double k = *opts.declared_kappa;
    if (!(k >= 1.0) || !std::isfinite(k)) throw InputError("space: declared kappa must be >= 1");
    if (scan_.value > k * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "space: quasi-metric violation, triple " << triple_text(*this, scan_.witness)
         << " has ratio " << scan_.value << " > declared kappa " << k;
      throw QuasiMetricViolation(os.str(), scan_.witness, scan_.value);
    }
    kappa_ = k;
    declared_ = true;
  } else {
    kappa_ = std::max(1.0, scan_.value);
  }
}

QuasiMetricSpace QuasiMetricSpace::from_upper_triangle(std::vector<Point> points,
                                                       std::span<const double> upper,
                                                       SpaceOptions opts) {
  const std::size_t n = points.size();
  if (upper.size() != n * (n + 1) / 2) {
    throw InputError("space: upper-triangular rho needs n(n+1)/2 entries, got " +
                     std::to_string(upper.size()));
  }
  std::vector<double> rho(n * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      rho[i * n + j] = upper[k];
      rho[j * n + i] = upper[k];
      ++k;
    }
  }
  return QuasiMetricSpace(std::move(points), std::move(rho), opts);
}

PointIndex QuasiMetricSpace::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw InputError("space: unknown point id '" + std::string(id) + "'");
  return it->second;
}

bool QuasiMetricSpace::contains(std::string_view id) const {
  return index_.count(std::string(id)) != 0;
}

AtomicMeasure::AtomicMeasure(std::vector<double> weights) : w_(std::move(weights)) {
  for (double v : w_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InputError("measure: weights must be finite and nonnegative");
    }
  }
}

AtomicMeasure AtomicMeasure::from_ids(const QuasiMetricSpace& space,
                                      const std::vector<std::pair<std::string, double>>& entries) {
  std::vector<double> w(space.size(), 0.0);
  for (const auto& [id, mass] : entries) w[space.index_of(id)] += mass;
  return AtomicMeasure(std::move(w));
}

double AtomicMeasure::total() const { return std::accumulate(w_.begin(), w_.end(), 0.0); }

bool AtomicMeasure::is_zero() const {
  return std::all_of(w_.begin(), w_.end(), [](double v) { return v == 0.0; });
}

AtomicMeasure AtomicMeasure::scaled(double lambda) const {
  std::vector<double> w = w_;
  for (double& v : w) v *= lambda;
  return AtomicMeasure(std::move(w));
}

AtomicMeasure AtomicMeasure::with_density(std::span<const double> density) const {
  if (density.size() != w_.size()) throw InputError("measure: density has wrong size");
  std::vector<double> w(w_.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = w_[i] * density[i];
  return AtomicMeasure(std::move(w));
}

AtomicMeasure AtomicMeasure::restricted(std::span<const PointIndex> support) const {
  std::vector<double> w(w_.size(), 0.0);
  for (PointIndex i : support) w[i] = w_[i];
  return AtomicMeasure(std::move(w));
}

ConjugatePair::ConjugatePair(double p, double q) : p_(p), q_(q) {
  if (!(p > 1.0) || !(q > 1.0) || !std::isfinite(p) || !std::isfinite(q)) {
    throw InputError("exponents: p and q must exceed 1");
  }
  if (std::abs(1.0 / p + 1.0 / q - 1.0) > 1e-12) {
    throw InputError("exponents: 1/p + 1/q must equal 1");
  }
}

ConjugatePair ConjugatePair::from_q(double q) {
  if (!(q > 1.0) || !std::isfinite(q)) throw InputError("exponents: q must exceed 1");
  ConjugatePair c;
  c.q_ = q;
  c.p_ = q / (q - 1.0);
  return c;
}

double ConjugatePair::small_constant() const { return std::pow(p_, 1.0 - q_) / q_; }

double ConjugatePair::gauge_factor() const { return p_ * std::pow(q_, p_ - 1.0); }

void require_same_size(const QuasiMetricSpace& space, const AtomicMeasure& mu, const char* what) {
  if (mu.size() != space.size()) {
    throw InputError(std::string(what) + ": measure does not match the space");
  }
}

double ball_measure(const QuasiMetricSpace& space, const AtomicMeasure& mu, PointIndex x, double r) {
  if (!(r > 0.0)) throw InputError("ball_measure: radius must be positive");
  if (x >= space.size()) throw InputError("ball_measure: point index out of range");
  require_same_size(space, mu, "ball_measure");
  double mass = 0.0;
  for (PointIndex y : space.sorted_neighbors(x)) {
    if (space.rho(x, y) > r) break;
    mass += mu[y];
  }
  return mass;
}

double ball_measure(const QuasiMetricSpace& space, const AtomicMeasure& mu, std::string_view x,
                    double r) {
  return ball_measure(space, mu, space.index_of(x), r);
}

std::vector<PointIndex> ball(const QuasiMetricSpace& space, PointIndex x, double r) {
  std::vector<PointIndex> out;
  for (PointIndex y : space.sorted_neighbors(x)) {
    if (space.rho(x, y) > r) break;
    out.push_back(y);
  }
  return out;
}

KappaEstimate estimate_kappa(const QuasiMetricSpace& space, KappaMode mode, std::size_t samples,
                             std::uint64_t seed) {
  const std::size_t n = space.size();
  KappaEstimate est;
  if (mode == KappaMode::sampled) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    est.value = -1.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const PointIndex x = pick(rng), y = pick(rng), z = pick(rng);
      const double ratio = space.rho(x, y) / (space.rho(x, z) + space.rho(z, y));
      if (ratio > est.value) {
        est.value = ratio;
        est.witness = {x, y, z};
      }
    }
    est.lower_bound_only = true;
    est.triples = samples;
    return est;
  }

  // For each pair the worst z minimises rho(x,z) + rho(z,y); rows are symmetric.
  std::vector<RowBest> best(n);
  parallel_for(n, [&](std::size_t x) {
    const auto rx = space.row(x);
    RowBest b;
    for (std::size_t y = x; y < n; ++y) {
      const auto ry = space.row(y);
      double lo = rx[0] + ry[0];
      PointIndex arg = 0;
      for (std::size_t z = 1; z < n; ++z) {
        const double s = rx[z] + ry[z];
        if (s < lo) {
          lo = s;
          arg = z;
        }
      }
      const double ratio = rx[y] / lo;
      if (ratio > b.ratio) {
        b.ratio = ratio;
        b.y = y;
        b.z = arg;
      }
    }
    best[x] = b;
  });
  est.value = -1.0;
  for (std::size_t x = 0; x < n; ++x) {
    if (best[x].ratio > est.value) {
      est.value = best[x].ratio;
      est.witness = {x, best[x].y, best[x].z};
    }
  }
  est.triples = n * n * n;
  return est;
}

std::vector<double> breakpoints(const QuasiMetricSpace& space, PointIndex x) {
  if (x >= space.size()) throw InputError("breakpoints: point index out of range");
  std::vector<double> out;
  out.reserve(space.size());
  for (PointIndex y : space.sorted_neighbors(x)) {
    const double r = space.rho(x, y);
    if (out.empty() || r != out.back()) out.push_back(r);
  }
  return out;
}

std::vector<double> breakpoints(const QuasiMetricSpace& space, std::string_view x) {
  return breakpoints(space, space.index_of(x));
}

}  // namespace qms
