#ifndef KAMTORI_ERROR_HPP
#define KAMTORI_ERROR_HPP

#include <stdexcept>
#include <string>

namespace kamtori {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands or inputs disagree on (n, l, m) or matrix shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A linear system or matrix that must be invertible is not.
class SingularError : public Error {
 public:
  SingularError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// A parameter point violates the Diophantine condition at the current order.
class SieveError : public Error {
 public:
  using Error::Error;
};

/// The iteration schedule left its domain of definition (s <= 0, eps >= 1, ...).
class ScheduleError : public Error {
 public:
  using Error::Error;
};

/// A KAM step produced a perturbation that is not smaller than its input.
class ContractionError : public Error {
 public:
  using Error::Error;
};

/// A trajectory left the region where the series are trusted.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kamtori

#endif  // KAMTORI_ERROR_HPP
