#pragma once

#include <stdexcept>
#include <string>

namespace convkit {

// Values double as CLI exit codes.
enum class ErrorKind : int {
  usage = 1,       // bad arguments, unreadable or unwritable files
  validation = 2,  // malformed manifests, shape mismatches, plan errors
  numeric = 3,     // non-finite data, SVD failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& what) {
  throw Error(ErrorKind::usage, what);
}
[[noreturn]] inline void fail_validation(const std::string& what) {
  throw Error(ErrorKind::validation, what);
}
[[noreturn]] inline void fail_numeric(const std::string& what) {
  throw Error(ErrorKind::numeric, what);
}

}  // namespace convkit
