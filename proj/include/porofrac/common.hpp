#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace porofrac {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidGeometryError : public Error {
public:
  using Error::Error;
};

class UnsupportedConfigError : public Error {
public:
  using Error::Error;
};

class InterfaceMismatchError : public Error {
public:
  using Error::Error;
};

/// A constitutive evaluation hit an inadmissible state (e.g. det F <= 0).
class InadmissibleStateError : public Error {
public:
  using Error::Error;
};

class SolverError : public Error {
public:
  using Error::Error;
};

class NonconvergenceError : public Error {
public:
  using Error::Error;
};

/// Violation of an operation precondition (caller bug, not user input).
class ContractError : public Error {
public:
  using Error::Error;
};

/// Configuration problems; carries the full list of issues found.
class ConfigError : public Error {
public:
  explicit ConfigError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "configuration invalid:";
    for (const auto& m : v) {
      s += "\n  - " + m;
    }
    return s;
  }
  std::vector<std::string> issues_;
};

inline void log_warn(const std::string& msg) {
  std::fprintf(stderr, "[porofrac] warning: %s\n", msg.c_str());
}

inline void log_info(const std::string& msg) {
  std::fprintf(stderr, "[porofrac] %s\n", msg.c_str());
}

}  // namespace porofrac
