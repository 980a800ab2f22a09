#pragma once

#include <stdexcept>
#include <string>

namespace mcsim {

// Every failure mode the library reports.  Tests and the CLI switch on the
// code; the message carries the offending field/line for humans.
enum class Err {
  NonPowerOfTwo,
  InconsistentBlockSize,
  EmptyAffinity,
  InvalidConfig,
  SyntaxError,
  CrossesBlockBoundary,
  FrequencyOutOfRange,
  AddressOutOfRange,
  NoAccesses,
  MissingBaseline,
  InvalidDuration,
  ProgramTooLarge,
  UnknownThread,
  DeadlockDetected,
  UnschedulableThread,
};

const char* err_name(Err e);

class SimError : public std::runtime_error {
 public:
  SimError(Err code, const std::string& msg)
      : std::runtime_error(std::string(err_name(code)) + ": " + msg), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& msg) { throw SimError(code, msg); }

}  // namespace mcsim
