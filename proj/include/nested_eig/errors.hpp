#pragma once

#include <stdexcept>
#include <string>

#include "nested_eig/types.hpp"

namespace nested_eig {

// The forward map returned a non-finite value. Carries the offending inputs.
class ForwardMapError : public std::runtime_error {
 public:
  ForwardMapError(const std::string& what, Vec theta, Vec phi)
      : std::runtime_error(what), theta_(std::move(theta)), phi_(std::move(phi)) {}

  const Vec& theta() const { return theta_; }
  const Vec& phi() const { return phi_; }

 private:
  Vec theta_;
  Vec phi_;
};

// A MAP solve did not converge, or its precision could not be made SPD.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The sample-allocation problem has no admissible solution.
class AllocationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An estimator or pilot could not produce a usable result.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nested_eig
