#pragma once

#include "qms/kernel.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace qms {

enum class SolveStatus { converged, diverged, indeterminate };

std::string_view status_name(SolveStatus s);

struct SolveOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  /// Divergence threshold on sup u_n; default 1e12 (1 + sup f).
  std::optional<double> blowup;
};

struct SolveReport {
  SolveStatus status = SolveStatus::indeterminate;
  Field u;
  std::size_t iterations = 0;
  /// sup |u - (K u^q sigma + f)|
  double residual = 0.0;
  std::vector<std::string> certificates;
  /// Iterates never decreased (beyond rounding).
  bool monotone = true;
  std::string divergence_reason;
};

/// K(f^q sigma)
Field apply_A(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f);

/// u_0 = 0, u_n = A u_{n-1} + f.
///
/// Divergence is declared when sup u_n passes the blowup level, or when a
/// single atom x with sigma_x > 0 proves that no solution exists: any
/// solution satisfies u(x) >= k w u(x)^q + c_x with k w = K(x,x) sigma_x and
/// c_x built from u_n, which is impossible once u_n(x) > (k w)^{1-p} or
/// c_x > p^{-1} q^{1-p} (k w)^{1-p}.
SolveReport picard_solve(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f,
                         const SolveOptions& opts = {});

/// Requires A f <= q^{-1} p^{1-q} f and certifies f <= u <= p f.
SolveReport guaranteed_solve_small(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                                   const Field& f, const SolveOptions& opts = {});

/// Requires A^2 f <= q^{-q} p^{q(1-q)} A f and certifies f + A f <= u <= f + p^q A f.
SolveReport guaranteed_solve_iterated(const KernelModel& kernel, const AtomicMeasure& sigma, double q,
                                      const Field& f, const SolveOptions& opts = {});

/// max_x A(f+g) - ((A f)^{1/q} + (A g)^{1/q})^q
double subadditivity_check(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f,
                           const Field& g);

/// True when u_n <= v + tol for the converged solution and v is a supersolution.
bool minimality_check(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f,
                      const SolveReport& report, const Field& v, double tol);

enum class ZNormMethod { bisection, iterated_limit, local };

std::string_view method_name(ZNormMethod m);

struct ZNormBracket {
  double lower = 0.0;
  double upper = 0.0;
  ZNormMethod method = ZNormMethod::bisection;
  /// (sup over supp f of A f / f)^{1/(q-1)}; infinite if A f > 0 off supp f.
  double local_norm = 0.0;
  /// sup (A^n f)^{1/q^n} at the last computed n.
  double iterated_limit = 0.0;
  std::size_t iterated_steps = 0;
  std::size_t solves = 0;
  std::size_t indeterminate = 0;
};

ZNormBracket znorm(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f,
                   double tol = 1e-6, const SolveOptions& opts = {});

/// sup (A^n f)^{1/q^n} computed in log scale to avoid overflow.
double iterated_limit(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f,
                      std::size_t steps);

double local_norm(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& f);

struct ZPrimeResult {
  /// inf over h >= g of sum sigma h^p / (K h sigma)^{p-1}
  double raw = 0.0;
  /// raw * p q^{p-1}
  double scaled_up = 0.0;
  /// raw / (p q^{p-1})
  double scaled_down = 0.0;
  /// <g, g>_sigma / ||g||_Z: the pairing of g with the boundary point of S along g.
  double support_along_g = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double stationarity = 0.0;
  Field h;
  std::string note;
};

ZPrimeResult zprime_norm(const KernelModel& kernel, const AtomicMeasure& sigma, double q, const Field& g,
                         double tol = 1e-10, std::size_t max_iter = 20000);

}  // namespace qms
