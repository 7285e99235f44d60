#pragma once

#include <stdexcept>
#include <string>

namespace midsg {

// Bad arguments, configs, or inputs that violate a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Filesystem and codec failures. The message names the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or failed numerical preconditions (e.g. an indefinite
// covariance handed to the matrix square root).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the trainer when a loss term turns non-finite.
class TrainingAborted : public NumericalError {
 public:
  TrainingAborted(std::string term, long step)
      : NumericalError("non-finite loss term '" + term + "' at step " +
                       std::to_string(step)),
        term_(std::move(term)),
        step_(step) {}

  const std::string& term() const noexcept { return term_; }
  long step() const noexcept { return step_; }

 private:
  std::string term_;
  long step_;
};

}  // namespace midsg
