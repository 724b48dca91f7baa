#pragma once

#include "qms/space.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace qms {

enum class KernelFamily { custom, riesz, green1d, naim1d, model_c11, poisson };

std::string_view family_name(KernelFamily family);

/// K = 1/rho on the atoms of a quasi-metric space, cached densely.
class KernelModel {
 public:
  KernelModel(QuasiMetricSpace space, KernelFamily family = KernelFamily::custom,
              std::string description = {});
  /// Kernel values supplied directly; rho of `space` must equal 1/values.
  KernelModel(QuasiMetricSpace space, std::vector<double> values, KernelFamily family,
              std::string description);

  const QuasiMetricSpace& space() const { return space_; }
  std::size_t size() const { return space_.size(); }
  KernelFamily family() const { return family_; }
  const std::string& description() const { return description_; }
  double kappa() const { return space_.kappa(); }

  double operator()(PointIndex x, PointIndex y) const { return k_[x * size() + y]; }
  std::span<const double> row(PointIndex x) const { return {k_.data() + x * size(), size()}; }

 private:
  QuasiMetricSpace space_;
  KernelFamily family_;
  std::string description_;
  std::vector<double> k_;
};

struct RieszParams {
  int dim = 3;
  double alpha = 2.0;
  /// Euclidean separation used on the diagonal, where |x-y| = 0.
  std::optional<double> self_distance;
};

struct PoissonParams {
  /// Boundary dimension n; points carry (x_1..x_n, t) with t >= 0.
  int dim = 1;
  std::optional<double> self_distance;
};

struct ModelC11Params {
  int dim = 3;
  std::optional<double> self_distance;
};

struct Green1dParams {};
struct Naim1dParams {};

using KernelSpec = std::variant<RieszParams, PoissonParams, ModelC11Params, Green1dParams, Naim1dParams>;

/// C(n, alpha) = pi^{-n/2} 2^{-alpha} Gamma((n-alpha)/2) / Gamma(alpha/2)
double riesz_constant(int n, double alpha);
/// Euclidean radius of the quasi-metric ball of radius r for the Riesz family.
double riesz_euclidean_radius(int n, double alpha, double r);

KernelModel make_riesz(std::vector<Point> points, const RieszParams& params, SpaceOptions opts = {});
KernelModel make_poisson(std::vector<Point> points, const PoissonParams& params, SpaceOptions opts = {});
KernelModel make_model_c11(std::vector<Point> points, const ModelC11Params& params,
                           SpaceOptions opts = {});
KernelModel make_green1d(std::vector<Point> points, SpaceOptions opts = {});
KernelModel make_naim1d(std::vector<Point> points, SpaceOptions opts = {});
KernelModel make_kernel(const KernelSpec& spec, std::vector<Point> points, SpaceOptions opts = {});

/// x -> sum_j K(x, y_j) mu_j
Field potential(const KernelModel& kernel, const AtomicMeasure& mu);
/// Same quantity as the integral over r of |B_r(x)|_mu / r^2, summed piecewise.
Field potential_via_balls(const KernelModel& kernel, const AtomicMeasure& mu);
/// K(g dsigma)
Field potential_of(const KernelModel& kernel, const AtomicMeasure& sigma, std::span<const double> g);

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  Field apply(const AtomicMeasure& mu) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct KernelSplit {
  double radius = 0.0;
  DenseMatrix lower;  ///< min(K, 1/a)
  DenseMatrix upper;  ///< K - min(K, 1/a)
};

KernelSplit split(const KernelModel& kernel, double a);

/// L_a mu(x) = sum_j mu_j / max(rho_j, a)
double lower_potential(const KernelModel& kernel, const AtomicMeasure& mu, PointIndex x, double a);
/// U_a mu(x) = sum_{rho_j <= a} mu_j (1/rho_j - 1/a)
double upper_potential(const KernelModel& kernel, const AtomicMeasure& mu, PointIndex x, double a);

/// Prefix sums over each centre's sorted distances, giving M, N, M* and
/// ball masses in closed form for one (sigma, q).
class ProfileTable {
 public:
  ProfileTable(const KernelModel& kernel, const AtomicMeasure& sigma, double q);

  std::size_t size() const { return n_; }
  double q() const { return q_; }

  /// Number of atoms y with rho(x,y) <= a.
  std::size_t count_within(PointIndex x, double a) const;
  double radius(PointIndex x, std::size_t k) const { return radii_[x * n_ + k]; }
  PointIndex neighbor(PointIndex x, std::size_t k) const { return order_[x * n_ + k]; }
  /// Sums over the first k neighbours of sigma, sigma/rho, and over the rest of sigma rho^{-q}.
  double mass_prefix(PointIndex x, std::size_t k) const { return s0_[x * (n_ + 1) + k]; }
  double inverse_prefix(PointIndex x, std::size_t k) const { return s1_[x * (n_ + 1) + k]; }
  double power_suffix(PointIndex x, std::size_t k) const { return tq_[x * (n_ + 1) + k]; }

  double ball(PointIndex x, double a) const;
  double M(PointIndex x, double a) const;
  double N(PointIndex x, double a) const;
  double Mstar(PointIndex x, double a) const;
  std::vector<double> breakpoints(PointIndex x) const;
  /// sup over r >= a of r^{-s} M*(x, r), using closed-form critical points per piece.
  double sup_scaled_mstar(PointIndex x, double a, double s) const;

 private:
  double sup_scaled_m(PointIndex y, double r0, double s) const;

  std::size_t n_;
  double q_;
  std::vector<double> radii_;
  std::vector<PointIndex> order_;
  std::vector<double> s0_, s1_, tq_;
};

/// M(x,.), M*(x,.), N(x,.) at one centre.
class LocalProfile {
 public:
  LocalProfile(std::shared_ptr<const ProfileTable> table, PointIndex x) : table_(std::move(table)), x_(x) {}
  PointIndex x() const { return x_; }
  double M(double a) const;
  double Mstar(double a) const;
  double N(double a) const;
  double ball(double a) const;
  const ProfileTable& table() const { return *table_; }

 private:
  std::shared_ptr<const ProfileTable> table_;
  PointIndex x_;
};

LocalProfile local_profile(const KernelModel& kernel, const AtomicMeasure& sigma, double q, PointIndex x);

struct HarnackResult {
  double worst_ratio = 0.0;
  PointIndex x = 0;
  double a = 0.0;
  std::size_t checked = 0;
};

/// Worst of sup_B L_a w / (2 kappa L_a w(x)) and L_a w(x) / (2 kappa inf_B L_a w).
HarnackResult harnack_check(const KernelModel& kernel, const AtomicMeasure& mu,
                            std::span<const std::pair<PointIndex, double>> samples);
/// Every centre at every breakpoint radius.
HarnackResult harnack_check(const KernelModel& kernel, const AtomicMeasure& mu);

/// Worst L_a w(x) / (max(1, b/a) L_b w(x)) over breakpoint pairs at x.
double stability_check(const KernelModel& kernel, const AtomicMeasure& mu, PointIndex x);

/// K = s1 G s2 together with the matching measure maps.
struct NaimTransform {
  KernelModel kernel;
  Field s1;
  Field s2;

  /// s2^{-1} s1^{-q} sigma, so that u = G(u^q sigma) + f maps to u~ = K(u~^q sigma~) + s1 f.
  AtomicMeasure transform_sigma(const AtomicMeasure& sigma, double q) const;
  /// s2^{-1} omega, so that K(omega~) = s1 G(omega).
  AtomicMeasure transform_omega(const AtomicMeasure& omega) const;
  /// (s2^{1-q} sigma, s1^{-p} omega)
  std::pair<AtomicMeasure, AtomicMeasure> weighted_norm_measures(const AtomicMeasure& sigma,
                                                                 const AtomicMeasure& omega,
                                                                 double p) const;
  Field to_transformed(const Field& u) const;
  Field from_transformed(const Field& u) const;
};

NaimTransform naim_transform(const KernelModel& base, Field s1, Field s2, SpaceOptions opts = {});

}  // namespace qms
