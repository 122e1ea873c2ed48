#pragma once

#include <stdexcept>
#include <string>

namespace dnadet {

/// Base class for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or missing configuration key, malformed config text.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Manifest parse or validation failure.
class ManifestError : public Error {
 public:
  using Error::Error;
};

/// Missing or unreadable/unwritable file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A figure input does not match the schema of its kind; names the field.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& field, const std::string& what)
      : Error("field '" + field + "': " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(long long iteration, const std::string& what)
      : Error("training diverged at iteration " + std::to_string(iteration) +
              ": " + what),
        iteration_(iteration) {}

  long long iteration() const noexcept { return iteration_; }

 private:
  long long iteration_;
};

}  // namespace dnadet
