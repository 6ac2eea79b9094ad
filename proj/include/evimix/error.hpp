#ifndef EVIMIX_ERROR_HPP
#define EVIMIX_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evimix {

enum class ErrorKind {
  InvalidThreshold,
  NoExceedances,
  OutOfSupport,
  InvalidParameter,
  MissingCoordinates,
  NotPositiveDefinite,
  RaggedPanel,
  DegenerateQuantile,
  RepairFailed,
  DimensionMismatch,
  InnerDiverged,
  ParseError,
  DomainError,
  DuplicateKey,
  UsageError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto exit statuses without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when one or more areas have no threshold exceedances. Carries the
/// offending area identifiers (or indices rendered as strings).
class NoExceedancesError : public Error {
 public:
  explicit NoExceedancesError(std::vector<std::string> areas);

  const std::vector<std::string>& areas() const noexcept { return areas_; }

 private:
  std::vector<std::string> areas_;
};

/// Raised by the conditional-mode solver; keeps the last Newton iterate.
class InnerDivergedError : public Error {
 public:
  InnerDivergedError(const std::string& message, std::vector<double> last_v,
                     double grad_inf_norm)
      : Error(ErrorKind::InnerDiverged, message),
        last_v_(std::move(last_v)),
        grad_inf_norm_(grad_inf_norm) {}

  const std::vector<double>& last_iterate() const noexcept { return last_v_; }
  double gradient_norm() const noexcept { return grad_inf_norm_; }

 private:
  std::vector<double> last_v_;
  double grad_inf_norm_;
};

/// Raised by parsers; line is 1-based (0 when the error is not tied to a line).
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(ErrorKind::ParseError,
              path + (line ? ":" + std::to_string(line) : std::string()) +
                  ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace evimix

#endif  // EVIMIX_ERROR_HPP
