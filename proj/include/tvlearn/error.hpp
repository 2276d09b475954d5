#pragma once

#include <stdexcept>
#include <string>

namespace tvlearn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Caller violated a documented precondition (negative weight, size mismatch, ...).
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// A function was evaluated outside its domain (e.g. log of a nonpositive value).
class DomainError : public Error {
public:
  using Error::Error;
};

/// Zero or non-finite pivot during a banded LU factorization.
class SingularMatrixError : public Error {
public:
  SingularMatrixError(const std::string& what, std::size_t column)
      : Error(what), column_(column) {}
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t column_;
};

/// Malformed or unsupported file, unreadable path.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace tvlearn
