#pragma once

#include <stdexcept>
#include <string>

namespace arrival {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or violated precondition on user input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input outside the mathematical domain of a formula (e.g. log singularity).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Quadrature failure, singular linear system, failed self-check.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace arrival
