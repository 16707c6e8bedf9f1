#pragma once

#include <stdexcept>
#include <string>

namespace funmix {

// Base for every error raised by the library. The CLI maps the subclasses
// onto exit codes (usage 2, data/schema 3, numerical 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, schema violations, invalid knots,
// out-of-domain points, inconsistent dimensions.
class DataError : public Error {
 public:
  using Error::Error;
};

// Factorization failures, degenerate summaries, singular constraints.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Configuration problems. Carries the offending key path and, when the
// source format tracks it, the line number.
class ConfigError : public DataError {
 public:
  ConfigError(const std::string& what, std::string path = {}, int line = 0)
      : DataError(format(what, path, line)), message_(what), path_(std::move(path)), line_(line) {}

  const std::string& path() const noexcept { return path_; }
  int line() const noexcept { return line_; }
  // The message without the location prefix.
  const std::string& message() const noexcept { return message_; }
  ConfigError at_line(int l) const { return ConfigError(message_, path_, l); }

 private:
  static std::string format(const std::string& what, const std::string& path, int line) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!path.empty()) out += "'" + path + "': ";
    return out + what;
  }

  std::string message_;
  std::string path_;
  int line_ = 0;
};

}  // namespace funmix
