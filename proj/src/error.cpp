#include "etw/error.hpp"

namespace etw {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::Range: return "range";
    case ErrorCode::Resolution: return "resolution";
    case ErrorCode::Argument: return "argument";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Checksum: return "checksum";
    case ErrorCode::UnknownOpcode: return "unknown-opcode";
    case ErrorCode::LengthOverrun: return "length-overrun";
    case ErrorCode::BadPayload: return "bad-payload";
    case ErrorCode::Encode: return "encode";
    case ErrorCode::State: return "state";
    case ErrorCode::Uncalibrated: return "uncalibrated";
    case ErrorCode::CalibrationFailed: return "calibration-failed";
    case ErrorCode::Lockout: return "lockout";
    case ErrorCode::Design: return "design";
    case ErrorCode::DegenerateVariance: return "degenerate-variance";
    case ErrorCode::TooFewDifferences: return "too-few-differences";
    case ErrorCode::EmptyMask: return "empty-mask";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::UndefinedLoad: return "undefined-load";
    case ErrorCode::UnknownChannel: return "unknown-channel";
    case ErrorCode::Busy: return "busy";
    case ErrorCode::Aborted: return "aborted";
    }
    return "unknown";
}

}  // namespace etw
