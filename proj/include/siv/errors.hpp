#pragma once

#include <stdexcept>
#include <string>

namespace siv {

/// Malformed caller input: bad dimensions, out-of-range indices, bad flags.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double last_estimate = 0.0)
      : std::runtime_error(what), last_estimate_(last_estimate) {}

  double last_estimate() const { return last_estimate_; }

 private:
  double last_estimate_;
};

/// The mean-field integrator left the probability simplex.
class IntegrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The vigilant block is singular, so the disease-free equilibrium is undefined.
class EquilibriumUndefined : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The EM fit could not proceed (degenerate data).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A semi-Markov override that would race a non-exponential clock against
/// exponential ones.
class UnsupportedConfiguration : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace siv
