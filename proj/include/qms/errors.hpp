#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace qms {

/// Malformed or out-of-range input. Maps to exit code 1 in the CLI.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input that is well formed but makes a requested quantity undefined.
class DegenerateInput : public InputError {
 public:
  using InputError::InputError;
};

/// A triple (x, y, z) with rho(x,y) > kappa * (rho(x,z) + rho(z,y)).
class QuasiMetricViolation : public std::runtime_error {
 public:
  QuasiMetricViolation(const std::string& msg, std::array<std::size_t, 3> witness, double ratio)
      : std::runtime_error(msg), witness_(witness), ratio_(ratio) {}
  const std::array<std::size_t, 3>& witness() const { return witness_; }
  double ratio() const { return ratio_; }

 private:
  std::array<std::size_t, 3> witness_;
  double ratio_;
};

/// Precondition of a certified fast path failed.
class HypothesisNotMet : public std::runtime_error {
 public:
  HypothesisNotMet(const std::string& msg, double worst_ratio)
      : std::runtime_error(msg), worst_ratio_(worst_ratio) {}
  double worst_ratio() const { return worst_ratio_; }

 private:
  double worst_ratio_;
};

}  // namespace qms
