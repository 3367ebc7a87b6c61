#pragma once

#include <stdexcept>
#include <string>

namespace phshape {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix that must be inverted is (numerically) singular.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// The matching ODE cannot be continued past `coordinate`.
class DomainBoundaryError : public Error {
 public:
  DomainBoundaryError(const std::string& what, double coordinate)
      : Error(what), coordinate_(coordinate) {}
  double coordinate() const { return coordinate_; }

 private:
  double coordinate_;
};

/// Evaluation requested outside the tabulated domain.
class OutOfDomainError : public Error {
 public:
  OutOfDomainError(const std::string& what, double coordinate)
      : Error(what), coordinate_(coordinate) {}
  double coordinate() const { return coordinate_; }

 private:
  double coordinate_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PackageError : public Error {
 public:
  using Error::Error;
};

}  // namespace phshape
