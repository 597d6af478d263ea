#pragma once

#include <stdexcept>
#include <string>

namespace trimcp {

// Invalid run configuration or CLI input. Maps to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Trimming removes all mass: mu_keep is zero or indistinguishable from zero.
class DegenerateRetention : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A retained component law is required but its retention probability is zero.
class MissingComponent : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Rejection sampling hit its attempt cap before producing the requested draws.
class SamplingBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace trimcp
