#pragma once

// Host <-> device framing.
//
//   +------+--------+--------+-----------------+-----+
//   | 0xAA | opcode | length | payload (0..64) | crc |
//   +------+--------+--------+-----------------+-----+
//
// crc is CRC-8/SMBUS (poly 0x07, init 0x00, no reflection, no xorout) over
// opcode, length and payload. Multi-byte integers are little-endian.
//
//   opcode  command          payload
//   0x01    SET_CHANNEL      u8 channel (1..15)
//   0x02    SET_INTENSITY    u16 intensity_uA (0..4000)
//   0x03    STIM_ONCE        -
//   0x04    STIM_TRAIN       u16 count (>=1), u16 gap_ms
//   0x05    STOP             -
//   0x06    QUERY_STATUS     -
//   0x07    RESET_LOCKOUT    -
//   0x08    ARM              -
//   0x09    DISARM           -
//   0x0A    VIBRATE          u16 duration_ms, u16 frequency_hz
//   0x81    STATUS           u8 state, u32 resistance_dOhm, u16 intensity_uA
//   0x82    ACK              u8 opcode
//   0x83    NAK              u8 opcode, u8 reason

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "etw/error.hpp"

namespace etw::proto {

inline constexpr std::uint8_t kStartOfFrame = 0xAA;
inline constexpr std::size_t kMaxPayload = 64;
inline constexpr std::uint16_t kMaxIntensityUa = 4000;

enum class Opcode : std::uint8_t {
    SetChannel = 0x01,
    SetIntensity = 0x02,
    StimOnce = 0x03,
    StimTrain = 0x04,
    Stop = 0x05,
    QueryStatus = 0x06,
    ResetLockout = 0x07,
    Arm = 0x08,
    Disarm = 0x09,
    Vibrate = 0x0A,
    Status = 0x81,
    Ack = 0x82,
    Nak = 0x83,
};

// Device state codes carried by STATUS.
enum class DeviceState : std::uint8_t {
    Disarmed = 0,
    Armed = 1,
    Stimulating = 2,
    FaultOpenCircuit = 3,
    FaultShort = 4,
    Lockout = 5,
};

enum class NakReason : std::uint8_t {
    NotArmed = 1,
    OverLimit = 2,
    NonPositive = 3,
    NoChannel = 4,
    Busy = 5,
    LockedOut = 6,
    BadArgument = 7,
};

struct SetChannel { std::uint8_t channel; friend bool operator==(const SetChannel&, const SetChannel&) = default; };
struct SetIntensity { std::uint16_t microamps; friend bool operator==(const SetIntensity&, const SetIntensity&) = default; };
struct StimOnce { friend bool operator==(const StimOnce&, const StimOnce&) = default; };
struct StimTrain { std::uint16_t count; std::uint16_t gap_ms; friend bool operator==(const StimTrain&, const StimTrain&) = default; };
struct Stop { friend bool operator==(const Stop&, const Stop&) = default; };
struct QueryStatus { friend bool operator==(const QueryStatus&, const QueryStatus&) = default; };
struct ResetLockout { friend bool operator==(const ResetLockout&, const ResetLockout&) = default; };
struct Arm { friend bool operator==(const Arm&, const Arm&) = default; };
struct Disarm { friend bool operator==(const Disarm&, const Disarm&) = default; };
struct Vibrate { std::uint16_t duration_ms; std::uint16_t frequency_hz; friend bool operator==(const Vibrate&, const Vibrate&) = default; };
struct Status { DeviceState state; std::uint32_t resistance_dohm; std::uint16_t intensity_ua; friend bool operator==(const Status&, const Status&) = default; };
struct Ack { Opcode opcode; friend bool operator==(const Ack&, const Ack&) = default; };
struct Nak { Opcode opcode; NakReason reason; friend bool operator==(const Nak&, const Nak&) = default; };

using Command = std::variant<SetChannel, SetIntensity, StimOnce, StimTrain, Stop, QueryStatus,
                             ResetLockout, Arm, Disarm, Vibrate, Status, Ack, Nak>;

Opcode opcode_of(const Command& c);
std::string describe(const Command& c);

std::uint8_t crc8(std::span<const std::uint8_t> bytes);

// Throws Encode for values outside the command's declared domain.
std::vector<std::uint8_t> encode(const Command& c);

struct DecodeError {
    ErrorCode code;  // Checksum, UnknownOpcode, LengthOverrun, BadPayload
    std::uint8_t opcode;
    friend bool operator==(const DecodeError&, const DecodeError&) = default;
};

using DecodeResult = std::variant<Command, DecodeError>;

// Decodes exactly one complete frame. Throws with the matching ErrorCode.
Command decode(std::span<const std::uint8_t> frame);

// Incremental decoder. Bytes before a start-of-frame are dropped; a frame that
// fails its checksum or announces an oversize length gives up only its start
// byte, so a valid frame hidden behind garbage is still found.
class StreamDecoder {
public:
    void feed(std::span<const std::uint8_t> bytes);
    std::optional<DecodeResult> next();
    std::vector<DecodeResult> drain();
    std::size_t buffered() const noexcept { return buffer_.size(); }

private:
    void parse();

    std::deque<std::uint8_t> buffer_;
    std::deque<DecodeResult> ready_;
};

// Hex replay files: one frame per line as space-separated hex bytes; '#' starts a comment.
std::string to_hex_line(std::span<const std::uint8_t> frame);
std::vector<std::vector<std::uint8_t>> read_hex_replay(const std::string& text);

}  // namespace etw::proto
