#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qms {

using PointIndex = std::size_t;
using Field = std::vector<double>;

struct Point {
  std::string id;
  std::vector<double> coords;
  /// Distance to the domain boundary; used by the model C^{1,1} family.
  std::optional<double> boundary_distance;
};

enum class KappaMode { exact, sampled };

struct KappaEstimate {
  double value = 0.0;
  std::array<PointIndex, 3> witness{0, 0, 0};
  /// True when only a random subset of triples was scanned.
  bool lower_bound_only = false;
  std::size_t triples = 0;
};

struct SpaceOptions {
  /// If set, the scan must not exceed it; otherwise kappa is the scanned value.
  std::optional<double> declared_kappa;
  KappaMode mode = KappaMode::exact;
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 1;
};

/// Finite set of points with a symmetric positive quasi-distance table.
/// Immutable after construction.
class QuasiMetricSpace {
 public:
  QuasiMetricSpace(std::vector<Point> points, std::vector<double> rho, SpaceOptions opts = {});

  /// rho given as the row-major upper triangle including the diagonal.
  static QuasiMetricSpace from_upper_triangle(std::vector<Point> points,
                                              std::span<const double> upper,
                                              SpaceOptions opts = {});

  template <class F>
  static QuasiMetricSpace from_function(std::vector<Point> points, F&& rho_fn,
                                        SpaceOptions opts = {}) {
    const std::size_t n = points.size();
    std::vector<double> rho(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const double v = rho_fn(points[i], points[j], i, j);
        rho[i * n + j] = v;
        rho[j * n + i] = v;
      }
    }
    return QuasiMetricSpace(std::move(points), std::move(rho), opts);
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<Point>& points() const { return points_; }
  const std::string& id(PointIndex i) const { return points_[i].id; }
  PointIndex index_of(std::string_view id) const;
  bool contains(std::string_view id) const;

  double rho(PointIndex i, PointIndex j) const { return rho_[i * size() + j]; }
  std::span<const double> row(PointIndex i) const {
    return {rho_.data() + i * size(), size()};
  }

  /// Neighbours of x sorted by increasing rho (ties by index).
  std::span<const PointIndex> sorted_neighbors(PointIndex x) const {
    return {order_.data() + x * size(), size()};
  }

  double kappa() const { return kappa_; }
  const KappaEstimate& kappa_scan() const { return scan_; }
  bool kappa_declared() const { return declared_; }

 private:
  std::vector<Point> points_;
  std::vector<double> rho_;
  std::vector<PointIndex> order_;
  std::unordered_map<std::string, PointIndex> index_;
  double kappa_ = 1.0;
  bool declared_ = false;
  KappaEstimate scan_;
};

/// Nonnegative masses indexed like the points of a space.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  explicit AtomicMeasure(std::vector<double> weights);

  static AtomicMeasure zero(std::size_t n) { return AtomicMeasure(std::vector<double>(n, 0.0)); }
  static AtomicMeasure uniform(std::size_t n, double w) {
    return AtomicMeasure(std::vector<double>(n, w));
  }
  static AtomicMeasure from_ids(const QuasiMetricSpace& space,
                                const std::vector<std::pair<std::string, double>>& entries);

  std::size_t size() const { return w_.size(); }
  double operator[](PointIndex i) const { return w_[i]; }
  const std::vector<double>& weights() const { return w_; }
  double total() const;
  bool is_zero() const;
  AtomicMeasure scaled(double lambda) const;
  /// d(result) = density * d(this)
  AtomicMeasure with_density(std::span<const double> density) const;
  AtomicMeasure restricted(std::span<const PointIndex> support) const;

 private:
  std::vector<double> w_;
};

/// Hoelder conjugate exponents, 1/p + 1/q = 1.
class ConjugatePair {
 public:
  static ConjugatePair from_q(double q);
  static ConjugatePair from_p(double p) { return from_q(p / (p - 1.0)); }
  ConjugatePair(double p, double q);

  double p() const { return p_; }
  double q() const { return q_; }
  /// q^{-1} p^{1-q}: the largest c with A f <= c f still certifying f <= u <= p f.
  double small_constant() const;
  /// p q^{p-1}
  double gauge_factor() const;

 private:
  ConjugatePair() = default;
  double p_ = 2.0;
  double q_ = 2.0;
};

void require_same_size(const QuasiMetricSpace& space, const AtomicMeasure& mu, const char* what);

double ball_measure(const QuasiMetricSpace& space, const AtomicMeasure& mu, PointIndex x, double r);
double ball_measure(const QuasiMetricSpace& space, const AtomicMeasure& mu, std::string_view x,
                    double r);

/// Indices of the closed ball {y : rho(x,y) <= r}, sorted by distance.
std::vector<PointIndex> ball(const QuasiMetricSpace& space, PointIndex x, double r);

KappaEstimate estimate_kappa(const QuasiMetricSpace& space, KappaMode mode = KappaMode::exact,
                             std::size_t samples = 1'000'000, std::uint64_t seed = 1);

std::vector<double> breakpoints(const QuasiMetricSpace& space, PointIndex x);
std::vector<double> breakpoints(const QuasiMetricSpace& space, std::string_view x);

}  // namespace qms
