#pragma once

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace wfe {

/// Shortest round-trip text for a double.
/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  for (int digits = 15; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// Compact text for messages.
inline std::string format_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

/// Two states or a state and an operator family do not fit together.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parameter lies outside its documented range.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Integration or sampling produced something unusable (divergent stage
/// solver, non-finite amplitudes). Carries the simulation time at failure.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, double time)
      : std::runtime_error(what + " (t = " + format_short(time) + ")"), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// The discrete [X, P] = i residual on the supplied state is too large for a
/// commutator verdict to mean anything.
class CalibrationFailure : public std::runtime_error {
 public:
  CalibrationFailure(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace wfe
