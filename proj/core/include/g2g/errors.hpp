#pragma once

#include <stdexcept>
#include <string>

namespace g2g {

// Error classes map 1:1 onto CLI exit codes (see tools/main.cpp).

struct InvalidArgument : std::runtime_error {
  explicit InvalidArgument(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidLabel : std::runtime_error {
  explicit InvalidLabel(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or interface mismatch between a network spec and the data fed to it.
struct ContractViolation : std::runtime_error {
  explicit ContractViolation(const std::string& msg) : std::runtime_error(msg) {}
};

// Input pairing problems in the dataset builder; carries the offending file.
struct PairingError : std::runtime_error {
  explicit PairingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

struct UndefinedMetric : std::runtime_error {
  explicit UndefinedMetric(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or another unrecoverable condition inside the training loop.
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace g2g
