#pragma once

#include <stdexcept>
#include <string>

namespace rsoftmax {

// Base of every exception raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite or empty logits.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Out-of-domain scalar parameter (t <= 0, r outside [0,1], q outside [0,1]).
class InvalidParameterError : public Error {
 public:
  using Error::Error;
};

class InvalidWeightsError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Label vector without positives, count outside its range.
class InvalidTargetError : public Error {
 public:
  using Error::Error;
};

// Backward called with a cache that no longer matches the parameters.
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CorruptFileError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(a) +
                     " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail
}  // namespace rsoftmax
