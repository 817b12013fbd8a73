#pragma once

// Random value generators shared by the property tests and the acceptance suite.

#include "etw/protocol.hpp"
#include "etw/rng.hpp"

namespace etw::testing {

inline proto::Opcode random_known_opcode(Rng& rng) {
    static constexpr std::uint8_t ops[] = {0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07,
                                           0x08, 0x09, 0x0A, 0x81, 0x82, 0x83};
    return static_cast<proto::Opcode>(ops[rng.uniform_int(0, 12)]);
}

inline proto::Command random_command(Rng& rng) {
    using namespace proto;
    auto u16 = [&](std::int64_t lo, std::int64_t hi) { return static_cast<std::uint16_t>(rng.uniform_int(lo, hi)); };
    switch (rng.uniform_int(0, 12)) {
    case 0: return SetChannel{static_cast<std::uint8_t>(rng.uniform_int(1, 15))};
    case 1: return SetIntensity{u16(0, 4000)};
    case 2: return StimOnce{};
    case 3: return StimTrain{u16(1, 65535), u16(0, 65535)};
    case 4: return Stop{};
    case 5: return QueryStatus{};
    case 6: return ResetLockout{};
    case 7: return Arm{};
    case 8: return Disarm{};
    case 9: return Vibrate{u16(0, 65535), u16(0, 65535)};
    case 10:
        return Status{static_cast<DeviceState>(rng.uniform_int(0, 5)),
                      static_cast<std::uint32_t>(rng.next_u64() & 0xFFFFFFFFu), u16(0, 4000)};
    case 11: return Ack{random_known_opcode(rng)};
    default: return Nak{random_known_opcode(rng), static_cast<NakReason>(rng.uniform_int(1, 7))};
    }
}

}  // namespace etw::testing
