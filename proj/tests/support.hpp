#pragma once

#include "qms/kernel.hpp"
#include "qms/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace qms::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }
  bool coin(double p) { return uniform(0.0, 1.0) < p; }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

inline std::vector<Point> named_points(std::size_t n) {
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i].id = "p" + std::to_string(i);
  return pts;
}

inline std::vector<Point> random_points(Gen& g, std::size_t n, std::size_t dim) {
  auto pts = named_points(n);
  for (auto& p : pts) {
    p.coords.resize(dim);
    for (auto& c : p.coords) c = g.uniform(0.0, 1.0);
  }
  return pts;
}

/// rho = |x-y|^beta with a diagonal of (h/2)^beta, h the smallest separation.
inline KernelModel random_power_kernel(Gen& g, std::size_t n, std::size_t dim, double beta) {
  auto pts = random_points(g, n, dim);
  double h = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += std::pow(pts[i].coords[d] - pts[j].coords[d], 2);
      h = std::min(h, std::sqrt(s));
    }
  }
  auto rho = [&](const Point& a, const Point& b, std::size_t i, std::size_t j) {
    if (i == j) return std::pow(0.5 * h, beta);
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) s += std::pow(a.coords[d] - b.coords[d], 2);
    return std::pow(std::sqrt(s), beta);
  };
  return KernelModel(QuasiMetricSpace::from_function(std::move(pts), rho));
}

/// Symmetric table with entries in [1, 2]; every such table has kappa <= 1.
inline KernelModel random_table_kernel(Gen& g, std::size_t n) {
  std::vector<double> rho(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = g.uniform(1.0, 2.0);
      rho[i * n + j] = v;
      rho[j * n + i] = v;
    }
  }
  return KernelModel(QuasiMetricSpace(named_points(n), std::move(rho)));
}

inline KernelModel random_kernel(Gen& g, std::size_t n) {
  if (g.coin(0.3)) return random_table_kernel(g, n);
  return random_power_kernel(g, n, 1 + g.index(3), g.uniform(1.0, 2.0));
}

inline AtomicMeasure random_measure(Gen& g, std::size_t n, double zero_prob = 0.2) {
  std::vector<double> w(n);
  for (auto& x : w) x = g.coin(zero_prob) ? 0.0 : g.uniform(0.1, 1.0);
  if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) w[g.index(n)] = 1.0;
  return AtomicMeasure(std::move(w));
}

inline Field random_field(Gen& g, std::size_t n, double lo = 0.0, double hi = 1.0) {
  Field f(n);
  for (auto& x : f) x = g.uniform(lo, hi);
  return f;
}

/// One atom, K = k, sigma = w.
inline KernelModel fix1(double k = 1.0) {
  return KernelModel(QuasiMetricSpace(named_points(1), {1.0 / k}));
}

/// Two atoms, rho(x1,x2) = 0.5, rho(xi,xi) = 1.
inline KernelModel fix2() {
  std::vector<Point> pts{{"x1", {}, std::nullopt}, {"x2", {}, std::nullopt}};
  return KernelModel(QuasiMetricSpace(std::move(pts), {1.0, 0.5, 0.5, 1.0}));
}

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace qms::testing
