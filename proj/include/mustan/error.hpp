#pragma once

#include <stdexcept>
#include <string>

namespace mustan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes incompatible with an operation or block.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid model, loss, or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing files, unreadable images, malformed dataset layouts.
class DataError : public Error {
 public:
  using Error::Error;
};

// Ground-truth pixel value outside the accepted label alphabet.
class DecodeError : public DataError {
 public:
  using DataError::DataError;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Raised by the optimization loop on non-finite loss or failed writes.
class TrainingAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace mustan
