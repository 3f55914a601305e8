#pragma once

#include <stdexcept>
#include <string>

namespace gridshaper {

/// Base class for domain errors. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid input files, inconsistent parameters, or a base network that
/// cannot be operated even without flexible loads.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A state-of-charge update left the physical envelope.
class EnvelopeViolation : public Error {
public:
  using Error::Error;
};

/// The exact power-flow sweep did not converge.
class DivergenceError : public Error {
public:
  using Error::Error;
};

/// A load reaches its plug-out step inside the horizon without having
/// reached its desired state of charge; the constant-rate tail is undefined.
class DegenerateTailError : public Error {
public:
  using Error::Error;
};

/// The receding-horizon problem became infeasible although every request
/// went through the admission gate.
class ProtocolViolation : public Error {
public:
  using Error::Error;
};

}  // namespace gridshaper
