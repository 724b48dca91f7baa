#include "qms/kernel.hpp"

#include "qms/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace qms {

namespace {

double euclid(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void require_dims(const std::vector<Point>& pts, std::size_t d, const char* family) {
  for (const auto& p : pts) {
    if (p.coords.size() != d) {
      std::ostringstream os;
      os << family << ": point '" << p.id << "' needs " << d << " coordinates";
      throw InputError(os.str());
    }
    for (double c : p.coords) {
      if (!std::isfinite(c)) throw InputError(std::string(family) + ": non-finite coordinate");
    }
  }
}

/// Half the smallest positive separation among the first `d` coordinates.
double default_self_distance(const std::vector<Point>& pts, std::size_t d) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double e = euclid(std::span(pts[i].coords).first(d), std::span(pts[j].coords).first(d));
      if (e > 0.0) best = std::min(best, e);
    }
  }
  return std::isfinite(best) ? 0.5 * best : 1.0;
}

double self_distance(const std::optional<double>& given, const std::vector<Point>& pts, std::size_t d,
                     const char* family) {
  if (given) {
    if (!(*given > 0.0) || !std::isfinite(*given)) {
      throw InputError(std::string(family) + ": self_distance must be positive");
    }
    return *given;
  }
  return default_self_distance(pts, d);
}

void require_unit_interval(const std::vector<Point>& pts, const char* family) {
  require_dims(pts, 1, family);
  for (const auto& p : pts) {
    if (!(p.coords[0] > 0.0 && p.coords[0] < 1.0)) {
      throw InputError(std::string(family) + ": point '" + p.id + "' must lie in (0,1)");
    }
  }
}

[[noreturn]] void coincident(const char* family, const Point& a, const Point& b) {
  throw InputError(std::string(family) + ": points '" + a.id + "' and '" + b.id + "' coincide");
}

}  // namespace

double riesz_constant(int n, double alpha) {
  if (n < 1 || !(alpha > 0.0) || !(alpha < n)) throw InputError("riesz: need 0 < alpha < n");
  return std::pow(std::numbers::pi, -0.5 * n) * std::pow(2.0, -alpha) * std::tgamma(0.5 * (n - alpha)) /
         std::tgamma(0.5 * alpha);
}

double riesz_euclidean_radius(int n, double alpha, double r) {
  return std::pow(riesz_constant(n, alpha) * r, 1.0 / (n - alpha));
}

KernelModel make_riesz(std::vector<Point> points, const RieszParams& params, SpaceOptions opts) {
  const double c = riesz_constant(params.dim, params.alpha);
  const std::size_t d = static_cast<std::size_t>(params.dim);
  require_dims(points, d, "riesz");
  const double h = self_distance(params.self_distance, points, d, "riesz");
  const double e = params.dim - params.alpha;
  auto rho = [&](const Point& a, const Point& b, std::size_t i, std::size_t j) {
    double dist = euclid(a.coords, b.coords);
    if (i == j) dist = h;
    else if (dist == 0.0) coincident("riesz", a, b);
    return std::pow(dist, e) / c;
  };
  std::ostringstream os;
  os << "riesz n=" << params.dim << " alpha=" << params.alpha << " self_distance=" << h;
  return KernelModel(QuasiMetricSpace::from_function(std::move(points), rho, opts), KernelFamily::riesz,
                     os.str());
}

KernelModel make_poisson(std::vector<Point> points, const PoissonParams& params, SpaceOptions opts) {
  if (params.dim < 1) throw InputError("poisson: dimension must be >= 1");
  const std::size_t d = static_cast<std::size_t>(params.dim);
  require_dims(points, d + 1, "poisson");
  for (const auto& p : points) {
    if (p.coords[d] < 0.0) throw InputError("poisson: point '" + p.id + "' has t < 0");
  }
  const double h = self_distance(params.self_distance, points, d + 1, "poisson");
  const double e = 0.5 * (params.dim + 1);
  auto rho = [&](const Point& a, const Point& b, std::size_t i, std::size_t j) {
    double dx = euclid(std::span(a.coords).first(d), std::span(b.coords).first(d));
    const double t = a.coords[d] + b.coords[d];
    if (dx == 0.0 && t == 0.0) {
      if (i != j) coincident("poisson", a, b);
      dx = h;
    }
    return std::pow(dx * dx + t * t, e);
  };
  std::ostringstream os;
  os << "poisson n=" << params.dim;
  return KernelModel(QuasiMetricSpace::from_function(std::move(points), rho, opts), KernelFamily::poisson,
                     os.str());
}

KernelModel make_model_c11(std::vector<Point> points, const ModelC11Params& params, SpaceOptions opts) {
  if (params.dim < 3) throw InputError("modelC11: dimension must be >= 3");
  const std::size_t d = static_cast<std::size_t>(params.dim);
  require_dims(points, d, "modelC11");
  for (const auto& p : points) {
    if (!p.boundary_distance || !(*p.boundary_distance > 0.0)) {
      throw InputError("modelC11: point '" + p.id + "' needs a positive boundary distance");
    }
  }
  const double h = self_distance(params.self_distance, points, d, "modelC11");
  auto rho = [&](const Point& a, const Point& b, std::size_t i, std::size_t j) {
    double dist = euclid(a.coords, b.coords);
    if (i == j) dist = h;
    else if (dist == 0.0) coincident("modelC11", a, b);
    const double da = *a.boundary_distance, db = *b.boundary_distance;
    return std::pow(dist, params.dim - 2) * (dist * dist + da * da + db * db);
  };
  std::ostringstream os;
  os << "modelC11 n=" << params.dim;
  return KernelModel(QuasiMetricSpace::from_function(std::move(points), rho, opts), KernelFamily::model_c11,
                     os.str());
}

KernelModel make_green1d(std::vector<Point> points, SpaceOptions opts) {
  require_unit_interval(points, "green1d");
  const std::size_t n = points.size();
  std::vector<double> g(n * n), rho(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double x = points[i].coords[0], y = points[j].coords[0];
      g[i * n + j] = std::min(x * (1.0 - y), y * (1.0 - x));
      rho[i * n + j] = 1.0 / g[i * n + j];
    }
  }
  QuasiMetricSpace space(std::move(points), std::move(rho), opts);
  return KernelModel(std::move(space), KernelFamily::green1d, "green1d");
}

KernelModel make_naim1d(std::vector<Point> points, SpaceOptions opts) {
  require_unit_interval(points, "naim1d");
  auto rho = [](const Point& a, const Point& b, std::size_t, std::size_t) {
    const double x = a.coords[0], y = b.coords[0];
    return (1.0 - std::min(x, y)) * std::max(x, y);
  };
  return KernelModel(QuasiMetricSpace::from_function(std::move(points), rho, opts), KernelFamily::naim1d,
                     "naim1d");
}

KernelModel make_kernel(const KernelSpec& spec, std::vector<Point> points, SpaceOptions opts) {
  struct Visitor {
    std::vector<Point>& pts;
    SpaceOptions& o;
    KernelModel operator()(const RieszParams& p) { return make_riesz(std::move(pts), p, o); }
    KernelModel operator()(const PoissonParams& p) { return make_poisson(std::move(pts), p, o); }
    KernelModel operator()(const ModelC11Params& p) { return make_model_c11(std::move(pts), p, o); }
    KernelModel operator()(const Green1dParams&) { return make_green1d(std::move(pts), o); }
    KernelModel operator()(const Naim1dParams&) { return make_naim1d(std::move(pts), o); }
  };
  return std::visit(Visitor{points, opts}, spec);
}

}  // namespace qms
