#pragma once

#include <stdexcept>
#include <string>

namespace drorecode {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (out-of-range rank, negative t, size mismatch...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration, samples file or policy file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// The first-order LP solver stopped before reaching the requested tolerance.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::string diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace drorecode
