#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ntkmmd {

/// Violated precondition on caller-supplied values (shapes, ranges, sizes).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed external data (CSV cells, JSON manifests, file access).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter became non-finite during training.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(std::size_t step, const std::string& context = {})
      : NumericalError("training diverged at step " + std::to_string(step) +
                       (context.empty() ? std::string{} : " (" + context + ")")),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace ntkmmd
