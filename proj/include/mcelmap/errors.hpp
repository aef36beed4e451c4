#pragma once

#include <stdexcept>
#include <string>

namespace mcelmap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too few points or nodes for the requested construction.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Operands disagree on dimensionality or shape.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or record.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// The constrained quadratic has no unique minimizer, or produced non-finite values.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Parameters outside their legal range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mcelmap
