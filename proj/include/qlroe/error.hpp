#ifndef QLROE_ERROR_HPP
#define QLROE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace qlroe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad shapes, violated preconditions, parse failures.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A guaranteed numerical inequality was observed to fail.
class BoundViolation : public Error {
 public:
  BoundViolation(std::string inequality, const std::string& detail)
      : Error(inequality + ": " + detail), inequality_(std::move(inequality)) {}

  const std::string& inequality() const noexcept { return inequality_; }

 private:
  std::string inequality_;
};

}  // namespace qlroe

#endif  // QLROE_ERROR_HPP
