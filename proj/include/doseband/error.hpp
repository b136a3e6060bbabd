#pragma once

#include <stdexcept>
#include <string>

namespace doseband {

// Bad arguments, malformed files, dimension mismatches.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite intermediates in integrals and bound objectives.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, int epoch)
      : NumericError(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// A width or spread that should be positive is zero.
class DegenerateError : public NumericError {
 public:
  explicit DegenerateError(const std::string& what) : NumericError(what) {}
};

// The reference density vanishes where the nominal one has mass.
class SupportError : public NumericError {
 public:
  explicit SupportError(const std::string& what) : NumericError(what) {}
};

}  // namespace doseband
