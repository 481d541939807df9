#pragma once

#include <stdexcept>
#include <string>

namespace stiefsteer {

// Base of every error raised by the library. Callers that only care about
// "something went wrong in the solver stack" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatch or d < N.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Backend failure or non-finite output from a factorization.
class NumericError : public Error {
 public:
  using Error::Error;
};

class NotSymmetric : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

// H = 0 where a positive spectral norm is required.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// (H+V)^T (H+V) is not positive definite, i.e. the objective is +inf.
class SingularPoint : public Error {
 public:
  using Error::Error;
};

// d < rank(H) + N: no feasible full-rank start exists.
class InsufficientDimension : public Error {
 public:
  InsufficientDimension(long d, long rank, long paths)
      : Error("insufficient dimension: d=" + std::to_string(d) +
              " < rank(H) + N = " + std::to_string(rank) + " + " +
              std::to_string(paths)),
        d_(d),
        rank_(rank),
        paths_(paths) {}

  long dim() const { return d_; }
  long rank() const { return rank_; }
  long paths() const { return paths_; }

 private:
  long d_;
  long rank_;
  long paths_;
};

// Invalid configuration value; field() names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Malformed text input (matrix files, config documents, protocol lines).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Steering-session ordering or path-membership violation.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace stiefsteer
