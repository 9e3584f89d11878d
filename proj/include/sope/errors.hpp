#pragma once

#include <stdexcept>
#include <string>

namespace sope {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (unknown keys, bad ranges, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Blocks cannot be laid out in the container with the sampled gaps.
class InfeasibleLayout : public Error {
 public:
  using Error::Error;
};

// Simulation state left the configured magnitude bounds.
class NumericalBlowup : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class CheckpointMismatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sope
