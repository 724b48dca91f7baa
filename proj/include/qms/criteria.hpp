#pragma once

#include "qms/kernel.hpp"
#include "qms/solver.hpp"

#include <map>
#include <string>
#include <vector>

namespace qms {

/// A supremum together with the (centre, radius) where it was attained.
struct Witness {
  double value = 0.0;
  PointIndex x = 0;
  double a = 0.0;
};

/// sup over supp sigma of K((K omega)^q sigma) / K omega
Witness pointwise_constant(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                           const AtomicMeasure& omega);

/// sup over x, a > 0 of M(x,a)^{p/q} L_a omega(x)
Witness infinitesimal_constant(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                               const AtomicMeasure& omega);

/// sup over balls B of int_B (K omega_B)^q dsigma / |B|_omega
Witness testing_constant(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                         const AtomicMeasure& omega);

struct WeightedNormResult {
  double value = 0.0;
  /// True for p = 2, where value is the squared operator norm.
  bool exact = false;
  /// Collatz-Wielandt upper bound when exact (value <= upper).
  double upper = 0.0;
  std::string witness;
  std::size_t iterations = 0;
};

/// Best C with int (K g sigma)^p domega <= C int g^p dsigma.
WeightedNormResult weighted_norm_constant(const KernelModel& kernel, const AtomicMeasure& sigma,
                                          const AtomicMeasure& omega, double p);

/// Rayleigh ratio int (K g sigma)^p domega / int g^p dsigma for one g.
double weighted_ratio(const KernelModel& kernel, const AtomicMeasure& sigma, const AtomicMeasure& omega,
                      double p, const Field& g);

/// max_x (K g)^s / (s (2 kappa)^{s-1} K(g (K g)^{s-1}))
double hardy_property_check(const KernelModel& kernel, const AtomicMeasure& sigma, const Field& g, double s);

struct IteratedWeights {
  std::vector<double> constants;
  std::vector<double> normalized;  ///< C_n^{1/q^n}
  double sup_normalized = 0.0;
  bool overflow = false;
  bool exact = false;
};

IteratedWeights iterated_weight_constants(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                                          const Field& f, std::size_t n_max);

struct ConditionValue {
  double constant = 0.0;
  Witness witness;
  std::string context;
  bool vacuous = false;
};

struct StructuralOptions {
  /// Decay exponent in |B_r| <= C (r/R)^{1+delta} |B_R|.
  double delta = 0.5;
};

/// Radii range over the breakpoints of each centre. Keys:
/// "M_vs_N" (M <= C a^{q-1} N), "M_vs_ballN" (M <= C |B|^{1/p} N^{1/q}),
/// "M_doubling" (M(x,2a) <= C M(x,a)), "M_neighbour" (M(y,a) <= C M(x,a)),
/// "tail_integral", "ball_doubling", "ball_decay".
std::map<std::string, ConditionValue> structural_conditions(const KernelModel& kernel,
                                                            const AtomicMeasure& sigma, double q,
                                                            const StructuralOptions& opts = {});

/// M(x,a)^{p/q} times the integral of N(x,t)^{-p/q} / t^2 over [a, R], R the
/// largest breakpoint at x. Pieces are integrated through the incomplete beta function.
double tail_integral(const ProfileTable& table, PointIndex x, double a, double upper);

struct Nondegeneracy {
  double N = 0.0;
  double sup_scaled_mstar = 0.0;
};

/// (N(x,a), sup_{r>=a} r^{-q/p} M*(x,r))
Nondegeneracy nondegeneracy_check(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                                  PointIndex x, double a);

struct PhiBall {
  double phi = 0.0;
  double term_n = 0.0;
  double term_mstar = 0.0;
  double term_tail = 0.0;
  std::vector<double> radii;         ///< a 2^{-j}
  std::vector<double> coefficients;  ///< c_j
  Field phi_b;
  /// max phi_B / K chi_B (<= 1 expected)
  double covering_worst = 0.0;
  /// max phi_B^{s+1} / ((s+1) K phi_B^s) (<= 1 expected)
  double power_worst = 0.0;
  /// (M(x,a) / 4 kappa)^{p/q}
  double ball_lower_hint = 0.0;
};

PhiBall phi_ball(const KernelModel& kernel, const AtomicMeasure& sigma, double q, PointIndex x, double a,
                 double s = 1.0);

enum class Verdict { solvable_certified, unsolvable_certified, indeterminate, vacuous };

std::string_view verdict_name(Verdict v);

struct VerdictOptions {
  double epsilon = 1.0;
  SolveOptions solve;
  double threshold_tol = 1e-4;
  bool structural = true;
  bool threshold = true;
  StructuralOptions structural_opts;
};

struct CriteriaReport {
  double q = 2.0;
  double p = 2.0;
  double epsilon = 1.0;
  Witness pointwise;
  Witness infinitesimal;
  Witness testing;
  WeightedNormResult weighted;
  std::map<std::string, ConditionValue> structural;
  Verdict verdict = Verdict::indeterminate;
  bool small_constant_certified = false;
  /// K omega <= u <= p K omega checked on the certified solve.
  bool bounds_verified = false;
  SolveReport solve;
  /// Bracket for sup{eps : eps K omega admits a solution}.
  double threshold_lower = 0.0;
  double threshold_upper = 0.0;
  bool constants_finite = true;
  std::vector<std::string> notes;
};

CriteriaReport verdict(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                       const AtomicMeasure& omega, const VerdictOptions& opts = {});

struct CarlesonCheck {
  /// sup K((K sigma)^p omega_t) / K sigma with omega_t = t omega
  double pointwise = 0.0;
  /// Embedding constant of f -> P(f sigma) from L^p(sigma) to L^p(omega).
  WeightedNormResult embedding;
};

/// Poisson family only; boundary atoms are those with t = 0.
CarlesonCheck poisson_carleson_check(const KernelModel& kernel, const AtomicMeasure& sigma,
                                     const AtomicMeasure& omega, double p);

}  // namespace qms
