#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace entrate {

// Base of everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed expressions, configs, files, mismatched dimensions.
class InputError : public Error {
 public:
  using Error::Error;
};

// A computation could not produce a finite, trustworthy result.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : InputError(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownIdentifierError : public InputError {
 public:
  explicit UnknownIdentifierError(std::string name)
      : InputError("unknown identifier '" + name + "'"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class ArityError : public InputError {
 public:
  using InputError::InputError;
};

class DimensionMismatchError : public InputError {
 public:
  using InputError::InputError;
};

class InsufficientLengthError : public InputError {
 public:
  InsufficientLengthError(std::size_t required, std::size_t available)
      : InputError("trajectory too short: need " + std::to_string(required) + " points, have " +
                   std::to_string(available)),
        required_(required),
        available_(available) {}
  std::size_t required() const noexcept { return required_; }
  std::size_t available() const noexcept { return available_; }

 private:
  std::size_t required_;
  std::size_t available_;
};

// Division by zero (or a non-real power) while evaluating an expression.
class DomainError : public NumericError {
 public:
  explicit DomainError(std::string subexpression)
      : NumericError("domain error evaluating '" + subexpression + "'"),
        subexpression_(std::move(subexpression)) {}
  const std::string& subexpression() const noexcept { return subexpression_; }

 private:
  std::string subexpression_;
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(std::size_t step, double magnitude)
      : NumericError("trajectory diverged at step " + std::to_string(step) +
                     " (|x|_inf = " + std::to_string(magnitude) + ")"),
        step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class SingularMatrixError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SizeGuardError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace entrate
