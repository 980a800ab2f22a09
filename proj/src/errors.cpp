#include "mcsim/errors.hpp"

namespace mcsim {

const char* err_name(Err e) {
  switch (e) {
    case Err::NonPowerOfTwo: return "NonPowerOfTwo";
    case Err::InconsistentBlockSize: return "InconsistentBlockSize";
    case Err::EmptyAffinity: return "EmptyAffinity";
    case Err::InvalidConfig: return "InvalidConfig";
    case Err::SyntaxError: return "SyntaxError";
    case Err::CrossesBlockBoundary: return "CrossesBlockBoundary";
    case Err::FrequencyOutOfRange: return "FrequencyOutOfRange";
    case Err::AddressOutOfRange: return "AddressOutOfRange";
    case Err::NoAccesses: return "NoAccesses";
    case Err::MissingBaseline: return "MissingBaseline";
    case Err::InvalidDuration: return "InvalidDuration";
    case Err::ProgramTooLarge: return "ProgramTooLarge";
    case Err::UnknownThread: return "UnknownThread";
    case Err::DeadlockDetected: return "DeadlockDetected";
    case Err::UnschedulableThread: return "UnschedulableThread";
  }
  return "Unknown";
}

}  // namespace mcsim
