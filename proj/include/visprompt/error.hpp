#pragma once

#include <stdexcept>
#include <string>

namespace visprompt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File IO and container parsing failures. Messages carry the path and,
/// where it applies, the byte offset of the problem.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A parameter outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Mismatched image / tensor dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration (unknown keys, bad values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace visprompt
