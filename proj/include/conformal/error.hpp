#pragma once

#include <stdexcept>
#include <string>

namespace conformal {

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A network description is malformed or unsupported.
class SpecError : public Error {
 public:
  using Error::Error;
};

}  // namespace conformal
