#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lso {

/// A molecule token string broke one of the grammar rules.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A size or range precondition was not met (too small a dataset, too large
/// an enumeration, ...).
class GuardError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Linear algebra or floating point failure (singular system, NaN, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown key, malformed value or bad flag in user supplied configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The ODE solver could not honour its tolerances. Carries the time reached
/// and the state at that time.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t, std::vector<double> state)
      : std::runtime_error(what), t_(t), state_(std::move(state)) {}

  double time() const noexcept { return t_; }
  const std::vector<double>& state() const noexcept { return state_; }

 private:
  double t_;
  std::vector<double> state_;
};

}  // namespace lso
