#pragma once

#include <stdexcept>
#include <string>

namespace maips {

// Base class for every error raised by the library. Callers that only care
// about "something numerical went wrong" catch this.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

// Cholesky failed even at the largest jitter of the escalation schedule.
class NotPositiveDefinite : public Error {
public:
  using Error::Error;
};

// Symmetric matrix has an eigenvalue below the clamping tolerance.
class NotPsd : public Error {
public:
  using Error::Error;
};

class AllWeightsZero : public Error {
public:
  using Error::Error;
};

class NoGradient : public Error {
public:
  using Error::Error;
};

class UnsupportedMode : public Error {
public:
  using Error::Error;
};

class ZeroVariance : public Error {
public:
  using Error::Error;
};

class Reducible : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace maips
