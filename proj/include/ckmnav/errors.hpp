#pragma once

#include <stdexcept>
#include <string>

namespace ckmnav {

// Base for every error raised by the library. Callers that only need to know
// "something in ckmnav failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Kriging system is numerically singular (duplicate or co-located samples).
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

// Exact shortest-path modes refuse graphs with a negative-weight cycle.
class NegativeCycleError : public Error {
 public:
  using Error::Error;
};

// Not enough unmeasured grids inside the corridor to build a measurement set.
class InsufficientCandidatesError : public Error {
 public:
  using Error::Error;
};

// Malformed or incomplete configuration / data file.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace ckmnav
