/*
 * errors.hpp
 *
 * Exception types thrown by the moelab library.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace moelab {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid model or hardware configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("configuration error: " + msg) {}
};

/// Dimension mismatch between tensors, weights and configuration.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error("shape error: " + msg) {}
};

/// Non-finite value produced or consumed by the numeric core.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error("numeric error: " + msg) {}
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& msg) : Error("domain error: " + msg) {}
};

class DegenerateFitError : public Error {
 public:
  explicit DegenerateFitError(const std::string& msg) : Error("degenerate fit: " + msg) {}
};

class NonInvertibleError : public Error {
 public:
  explicit NonInvertibleError(const std::string& msg) : Error("non-invertible: " + msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("I/O error: " + msg) {}
};

}  // namespace moelab
