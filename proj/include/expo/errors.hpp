#pragma once

#include <stdexcept>
#include <string>

namespace expo {

// Argument outside the mathematical domain of an operation (negative time,
// action outside [-2, 2], crop outside the panorama, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Degenerate CRF system (constant images, single exposure).
class RankDeficiencyError : public CalibrationError {
 public:
  using CalibrationError::CalibrationError;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AmbiguousMotionError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

// API used out of order: stepping a finished episode, sampling an
// under-filled buffer.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EndOfSequence : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace expo
