#pragma once

#include <stdexcept>
#include <string>

namespace mars {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The configuration document could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates an invariant. `field()` names the offending key.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// The geometry admits no virtual quadrotor (e.g. every rotor on one side of an axis).
class DegenerateConfig : public Error {
 public:
  using Error::Error;
};

class TooManyUnits : public Error {
 public:
  using Error::Error;
};

/// The containment program has no feasible point. `component()` is the wrench row
/// (0 thrust, 1 roll, 2 pitch) whose equality could not be met.
class InfeasibleAbstraction : public Error {
 public:
  InfeasibleAbstraction(int component, const std::string& what)
      : Error(what), component_(component) {}

  int component() const noexcept { return component_; }

 private:
  int component_;
};

class CoincidentPoint : public Error {
 public:
  using Error::Error;
};

class NonFiniteState : public Error {
 public:
  using Error::Error;
};

/// A commanded wrench lies outside the feasible polytope of the assembly.
class InfeasibleWrench : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its iteration cap.
class MaxIterations : public Error {
 public:
  using Error::Error;
};

class TargetUnreachable : public Error {
 public:
  using Error::Error;
};

}  // namespace mars
