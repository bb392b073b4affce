#ifndef QUAYDECK_ERROR_HPP_
#define QUAYDECK_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace quaydeck {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (generator counts, PPO hyper-parameters, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file or message could not be parsed. `field()` names the offending key.
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& what)
      : Error("parse error at '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An action that is not legal in the current state (e.g. dispatch to an empty QC).
class InvalidAction : public Error {
 public:
  using Error::Error;
};

/// Unknown artifact, session or node id.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf appeared where only finite values are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The simulator reached a state its own bookkeeping says is impossible.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace quaydeck

#endif  // QUAYDECK_ERROR_HPP_
