#pragma once

#include <stdexcept>
#include <string>

namespace aggdiff {

enum class ErrorCode {
  invalid_argument = 1,
  domain = 2,
  extrapolation = 3,
  insufficient_resolution = 4,
  grid_mismatch = 5,
  mass_mismatch = 6,
  domain_too_small = 7,
  memory_cap = 8,
  config = 9,
  io = 10,
  numeric = 11,
};

// All failures in the core raise Error; the C layer turns the code into a
// status value and keeps the message for aggdiff_last_error().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace aggdiff
