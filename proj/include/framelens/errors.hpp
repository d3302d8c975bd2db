#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace framelens {

/// Base for every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Frame id unknown, from the wrong typology, or a label vector of the wrong length.
class SchemaMismatchError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Agreement is undefined because the expected disagreement is zero.
class UndefinedAgreementError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class DegenerateOutcomeError : public Error {
 public:
  using Error::Error;
};

class SeparationError : public Error {
 public:
  SeparationError(const std::string& column, const std::string& what)
      : Error(what), column_(column) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class RankError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  explicit NonConvergenceError(const std::string& what, std::vector<double> last_iterate = {})
      : Error(what), last_iterate_(std::move(last_iterate)) {}
  const std::vector<double>& last_iterate() const { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

}  // namespace framelens
