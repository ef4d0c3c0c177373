#pragma once

#include <stdexcept>
#include <string>

namespace aime {

/// Rejected input: shapes or dimensions incompatible with the operation.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Rejected input: value outside the operation's domain (e.g. non-positive stddev).
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure with diagnostics (non-finite intermediate, non-PSD covariance, ...).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, long step = -1)
      : std::runtime_error(step >= 0 ? what + " (step " + std::to_string(step) + ")" : what),
        step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// Training loop aborted because the objective became non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, int epoch, int step)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step) + ")"),
        epoch_(epoch),
        step_(step) {}
  int epoch() const { return epoch_; }
  int step() const { return step_; }

 private:
  int epoch_;
  int step_;
};

/// A component contracted to stay frozen was mutated.
class FrozenViolation : public std::logic_error {
 public:
  explicit FrozenViolation(const std::string& what) : std::logic_error(what) {}
};

/// Dataset storage failures carry a distinct code per failure mode.
enum class DataErrorCode {
  bad_manifest,
  version_mismatch,
  truncated_payload,
  hash_mismatch,
  io_failure,
};

class DatasetIoError : public std::runtime_error {
 public:
  DatasetIoError(DataErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  DataErrorCode code() const { return code_; }

 private:
  DataErrorCode code_;
};

}  // namespace aime
