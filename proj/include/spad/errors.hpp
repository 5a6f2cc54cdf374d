#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spad {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or parameter shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument, config key or config combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Manifest, image or dataset problems.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, corrupted or incompatible checkpoint archive.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient evaluated to NaN or infinity.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became non-finite during training.
class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t step, const std::string& what)
      : Error("training diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace spad
