#pragma once

#include "qms/kernel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qms {

enum class CapacityMode {
  /// K g >= weight at every point of E.
  everywhere,
  /// Only at points of E carrying sigma mass.
  sigma_ae,
};

struct CapacityOptions {
  CapacityMode mode = CapacityMode::everywhere;
  /// Target K g >= weight(x) on E; default 1.
  std::optional<Field> weight;
  /// Objective sum sigma_j density_j g_j^p; default density 1.
  std::optional<Field> objective_density;
  double tol = 1e-12;
  std::size_t max_iter = 500;
};

struct CapacityResult {
  double value = 0.0;
  Field g_star;
  /// Dual objective at the final multipliers; never above value.
  double dual_bound = 0.0;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  bool feasible = true;
  bool converged = false;
  std::vector<double> multipliers;
  std::string note;
};

/// inf sum sigma g^p over g >= 0 with sum_j K(x,y_j) g_j sigma_j >= weight(x) on E.
CapacityResult capacity(const KernelModel& kernel, const AtomicMeasure& sigma, double p,
                        std::span<const PointIndex> E, const CapacityOptions& opts = {});

/// min sum mu_j g_j^p subject to A g >= w, g >= 0, with A row-major (rows x mu.size()).
CapacityResult solve_power_program(std::span<const double> A, std::span<const double> w,
                                   std::span<const double> mu, double p, double tol = 1e-12,
                                   std::size_t max_iter = 500);

struct BallUpper {
  bool vacuous = false;
  double N = 0.0;
  /// Objective of the explicit feasible g = 2 kappa L_a(x,.)^{q-1} / (q N).
  double feasible_value = 0.0;
  /// (2 kappa)^p N^{-p/q}
  double bound = 0.0;
  /// L_a g(x) / N(x,a) before normalisation.
  double la_over_n = 0.0;
  /// min over the ball of K g for the normalised g; at least 1.
  double min_on_ball = 0.0;
  Field g;
};

BallUpper capacity_ball_upper(const KernelModel& kernel, const AtomicMeasure& sigma, double p, PointIndex x,
                              double a);

struct BallRatio {
  PointIndex x = 0;
  double a = 0.0;
  std::size_t atoms = 0;
  double cap = 0.0;
  double N = 0.0;
  /// Cap B_a(x) N(x,a)^{p/q}
  double ratio = 0.0;
  double bound = 0.0;
  bool upper_ok = true;
  bool skipped = false;
  double gap = 0.0;
};

std::vector<BallRatio> capacity_ball_bounds_check(const KernelModel& kernel, const AtomicMeasure& sigma,
                                                  double p,
                                                  std::span<const std::pair<PointIndex, double>> samples);

enum class SetFamily { balls, atoms, balls_atoms, unions };

std::string_view set_family_name(SetFamily f);

struct FamilyOptions {
  SetFamily family = SetFamily::balls_atoms;
  /// Cap on the number of programs; larger families are subsampled with `seed`.
  std::size_t max_sets = 2000;
  /// Balls per union in the unions family.
  std::size_t union_size = 3;
  std::uint64_t seed = 1;
  CapacityOptions capacity;
};

struct CapacityCondition {
  /// Lower bound for sup |E|_omega / Cap E over all sets.
  double value = 0.0;
  std::vector<PointIndex> witness;
  double witness_cap = 0.0;
  double witness_mass = 0.0;
  std::size_t sets = 0;
  bool sampled = false;
};

/// Sets of the family. Balls are deduplicated by membership.
std::vector<std::vector<PointIndex>> enumerate_sets(const QuasiMetricSpace& space, const FamilyOptions& opts);

CapacityCondition capacity_condition_constant(const KernelModel& kernel, const AtomicMeasure& sigma, double p,
                                              const AtomicMeasure& omega, const FamilyOptions& opts = {});

struct BallLowerCheck {
  bool skipped = false;
  bool vacuous = false;
  double worst = 0.0;
  PointIndex x = 0;
  double a = 0.0;
  /// M(x,a)/(a^{q-1} N(x,a)) at breakpoints.
  double condition_constant = 0.0;
  /// The untruncated integral is infinite for every finite atomic sigma.
  bool tail_diverges = true;
  std::string note;
};

BallLowerCheck ball_lower_check(const KernelModel& kernel, const AtomicMeasure& sigma, double q);

}  // namespace qms
