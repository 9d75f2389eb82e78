#pragma once

#include <stdexcept>
#include <string>

namespace recal {

// Invalid user configuration: bad hyperparameters, counts, model names.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Caller broke an operation precondition (length mismatch, bad index).
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// A weighted estimator ended up with no positive weight.
class DegenerateError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// An optimisation or estimator fit did not produce a usable result.
class FitFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Regression design had too few positively weighted rows.
class InsufficientDataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace recal
