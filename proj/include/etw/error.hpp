#pragma once

#include <stdexcept>
#include <string>

namespace etw {

// Error categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
    Range = 1,
    Resolution,
    Argument,
    Io,
    Parse,
    Checksum,
    UnknownOpcode,
    LengthOverrun,
    BadPayload,
    Encode,
    State,
    Uncalibrated,
    CalibrationFailed,
    Lockout,
    Design,
    DegenerateVariance,
    TooFewDifferences,
    EmptyMask,
    DimensionMismatch,
    UndefinedLoad,
    UnknownChannel,
    Busy,
    Aborted,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace etw
