#pragma once

#include <stdexcept>
#include <string>

namespace bvcqr {

// Error categories double as the CLI exit-code contract.
enum class ErrorKind {
  Usage = 1,      // bad flags, unknown ids, invalid configuration
  Data = 2,       // malformed or non-conformable input data
  Numerical = 3,  // non-finite densities, failed factorizations, unreliable fits
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_usage(const std::string& what);
[[noreturn]] void throw_data(const std::string& what);
[[noreturn]] void throw_numerical(const std::string& what);

}  // namespace bvcqr
