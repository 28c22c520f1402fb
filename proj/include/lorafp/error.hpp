#pragma once

#include <stdexcept>
#include <string>

namespace lorafp {

/// Invalid configuration value (LoRa parameters, profiles, CLI config).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tensor / matrix / signal length disagreement.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Signal content that an operation cannot handle (zero samples, NaN, no energy).
class SignalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoPacketError : public std::runtime_error {
 public:
  NoPacketError(double confidence, double floor)
      : std::runtime_error("no packet detected: peak correlation " + std::to_string(confidence) + " below floor " +
                           std::to_string(floor)),
        confidence_(confidence) {}
  double confidence() const noexcept { return confidence_; }

 private:
  double confidence_;
};

/// Dataset content problems (too few classes, empty class, bad selection).
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-disk container/checkpoint does not match the expected layout.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, int batch)
      : std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

class DatabaseIntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lorafp
