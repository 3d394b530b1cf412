#pragma once

#include <stdexcept>
#include <string>

namespace fnlearn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failures map to CLI exit code 4.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class JitterExhausted : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateCurve : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularSystem : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConstantInput : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class MissingClass : public Error {
 public:
  using Error::Error;
};

class MissingSource : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const std::string& path)
      : Error("missing artifact: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace fnlearn
