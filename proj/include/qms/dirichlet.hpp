#pragma once

#include "qms/capacity.hpp"
#include "qms/kernel.hpp"
#include "qms/solver.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace qms {

/// min(x(1-y), y(1-x)) on (0,1)^2
double green1d(double x, double y);
/// (1 - min(x,y)) max(x,y) = x(1-x) y(1-y) / G(x,y)
double naim1d_rho(double x, double y);
/// |x-y|^{n-2} (|x-y|^2 + dx^2 + dy^2)
double model_c11_distance(std::span<const double> x, std::span<const double> y, double dx, double dy, int n);

struct TriangleScan {
  double worst_ratio = 0.0;
  std::size_t violations = 0;
  std::size_t triples = 0;
  std::array<double, 3> witness{0, 0, 0};
};

/// Random triples in (0,1); a violation is rho(x,y) > rho(x,z) + rho(z,y) + tol.
TriangleScan naim1d_triangle_scan(std::size_t triples, std::uint64_t seed, double tol = 1e-12);

struct ModelC11Scan {
  /// Best empirical C in d(x,y) <= C (d(x,z) + d(z,y)).
  double constant = 0.0;
  double bound = 0.0;
  std::size_t triples = 0;
  bool passed = false;
};

/// 2^{n-1} + 3 2^{n-3}
double model_c11_bound(int n);

/// Triples drawn uniformly from the unit ball, boundary distance 1 - |x|.
ModelC11Scan model_c11_check(int n, std::size_t triples, std::uint64_t seed);

struct ConstantDensity {
  double c = 1.0;
};
/// c x^{-a} (1-x)^{-b}
struct PowerDensity {
  double c = 1.0;
  double a = 0.0;
  double b = 0.0;
};
struct PointMasses {
  std::vector<std::pair<double, double>> atoms;
};
using DensitySpec = std::variant<ConstantDensity, PowerDensity, PointMasses>;

struct GridSpec {
  std::size_t cells = 512;
  /// Endpoint refinement exponent; 1 is uniform.
  double grading = 1.0;
};

struct IntervalSpec {
  GridSpec grid;
  DensitySpec sigma = ConstantDensity{0.0};
  DensitySpec omega = ConstantDensity{1.0};
  double q = 2.0;
  double epsilon = 1.0;
};

struct Interval1DProblem {
  Field nodes;
  /// Cell lengths.
  Field weights;
  AtomicMeasure sigma;
  AtomicMeasure omega;
  double q = 2.0;
  double epsilon = 1.0;
  /// int x(1-x) domega = infinity for the continuous input.
  bool green_potential_infinite = false;
  std::vector<std::string> notes;
};

/// Cell-centred midpoint grid; atoms snap to the nearest node.
Interval1DProblem make_interval_problem(const IntervalSpec& spec);

std::vector<Point> interval_points(const Field& nodes);

struct BVPReport {
  Field nodes;
  Field u;
  Field u_naim;
  SolveReport direct;
  SolveReport naim;
  double transform_gap = 0.0;
  double fd_residual = 0.0;
  /// min and max of G omega / (x(1-x)) over the nodes; zero when omega = 0.
  double green_band_lower = 0.0;
  double green_band_upper = 0.0;
  bool inconsistent = false;
  /// Pointwise constants on the Green and the transformed kernel.
  double pointwise_green = 0.0;
  double pointwise_naim = 0.0;
  bool pointwise_computed = false;
};

BVPReport solve_bvp_1d(const Interval1DProblem& problem, const SolveOptions& opts = {});

/// sup |u_h - u_{h/2}| with the coarse solution interpolated linearly.
double richardson_gap(const IntervalSpec& spec, const SolveOptions& opts = {});

struct BatteryOptions {
  std::size_t max_sets = 48;
  /// Longest interval (in nodes) used for capacities.
  std::size_t max_interval = 64;
  double threshold_tol = 1e-4;
  SolveOptions solve;
};

struct IntervalBattery {
  double pointwise = 0.0;
  CapacityCondition capacity;
  double testing = 0.0;
  double threshold_lower = 0.0;
  double threshold_upper = 0.0;
  bool green_potential_infinite = false;
  bool cross_flag = false;
  std::vector<std::string> notes;
};

IntervalBattery interval_battery(const Interval1DProblem& problem, const BatteryOptions& opts = {});

}  // namespace qms
