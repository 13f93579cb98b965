#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gsocc {

// Base class for every error raised by the library. The CLI maps any Error
// that escapes a subcommand to exit code 2 (data error).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quaternion norm below 1e-12.
class DegenerateRotationError : public Error {
 public:
  using Error::Error;
};

// Non-positive (or non-finite) Gaussian scale.
class InvalidScaleError : public Error {
 public:
  using Error::Error;
};

// A size or count does not fit the index type used to address it.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, std::uint64_t requested)
      : Error(what + " (requested " + std::to_string(requested) + ")"), requested_(requested) {}

  std::uint64_t requested() const noexcept { return requested_; }

 private:
  std::uint64_t requested_;
};

// Grids (or a grid and a scene) disagree on dims, extents or class count.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A metric or loss has no defined value, e.g. no non-empty class present.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed SGAU/SVOX file. offset() is the byte position of the fault.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Fitting produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int iteration)
      : Error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace gsocc
