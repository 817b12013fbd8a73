#include "etw/protocol.hpp"

#include <cstdio>
#include <sstream>

namespace etw::proto {
namespace {

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(std::span<const std::uint8_t> p, std::size_t at) {
    return static_cast<std::uint16_t>(p[at] | (p[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> p, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[at + i];
    return v;
}

bool known_opcode(std::uint8_t op) {
    return (op >= 0x01 && op <= 0x0A) || (op >= 0x81 && op <= 0x83);
}

const char* opcode_name(Opcode op) {
    switch (op) {
    case Opcode::SetChannel: return "SET_CHANNEL";
    case Opcode::SetIntensity: return "SET_INTENSITY";
    case Opcode::StimOnce: return "STIM_ONCE";
    case Opcode::StimTrain: return "STIM_TRAIN";
    case Opcode::Stop: return "STOP";
    case Opcode::QueryStatus: return "QUERY_STATUS";
    case Opcode::ResetLockout: return "RESET_LOCKOUT";
    case Opcode::Arm: return "ARM";
    case Opcode::Disarm: return "DISARM";
    case Opcode::Vibrate: return "VIBRATE";
    case Opcode::Status: return "STATUS";
    case Opcode::Ack: return "ACK";
    case Opcode::Nak: return "NAK";
    }
    return "?";
}

[[noreturn]] void bad_payload(std::uint8_t op, const char* why) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "opcode 0x%02X: %s", op, why);
    fail(ErrorCode::BadPayload, buf);
}

void expect_len(std::uint8_t op, std::span<const std::uint8_t> payload, std::size_t n) {
    if (payload.size() != n) bad_payload(op, "payload length does not match opcode");
}

Command decode_payload(std::uint8_t op, std::span<const std::uint8_t> p) {
    switch (static_cast<Opcode>(op)) {
    case Opcode::SetChannel:
        expect_len(op, p, 1);
        if (p[0] < 1 || p[0] > 15) bad_payload(op, "channel outside 1..15");
        return SetChannel{p[0]};
    case Opcode::SetIntensity: {
        expect_len(op, p, 2);
        const auto ua = get_u16(p, 0);
        if (ua > kMaxIntensityUa) bad_payload(op, "intensity above 4000 uA");
        return SetIntensity{ua};
    }
    case Opcode::StimOnce: expect_len(op, p, 0); return StimOnce{};
    case Opcode::StimTrain: {
        expect_len(op, p, 4);
        const auto count = get_u16(p, 0);
        if (count == 0) bad_payload(op, "train count must be >= 1");
        return StimTrain{count, get_u16(p, 2)};
    }
    case Opcode::Stop: expect_len(op, p, 0); return Stop{};
    case Opcode::QueryStatus: expect_len(op, p, 0); return QueryStatus{};
    case Opcode::ResetLockout: expect_len(op, p, 0); return ResetLockout{};
    case Opcode::Arm: expect_len(op, p, 0); return Arm{};
    case Opcode::Disarm: expect_len(op, p, 0); return Disarm{};
    case Opcode::Vibrate: expect_len(op, p, 4); return Vibrate{get_u16(p, 0), get_u16(p, 2)};
    case Opcode::Status:
        expect_len(op, p, 7);
        if (p[0] > static_cast<std::uint8_t>(DeviceState::Lockout)) bad_payload(op, "unknown device state");
        return Status{static_cast<DeviceState>(p[0]), get_u32(p, 1), get_u16(p, 5)};
    case Opcode::Ack:
        expect_len(op, p, 1);
        if (!known_opcode(p[0])) bad_payload(op, "ACK of unknown opcode");
        return Ack{static_cast<Opcode>(p[0])};
    case Opcode::Nak:
        expect_len(op, p, 2);
        if (!known_opcode(p[0])) bad_payload(op, "NAK of unknown opcode");
        if (p[1] < 1 || p[1] > static_cast<std::uint8_t>(NakReason::BadArgument)) bad_payload(op, "unknown NAK reason");
        return Nak{static_cast<Opcode>(p[0]), static_cast<NakReason>(p[1])};
    }
    char buf[48];
    std::snprintf(buf, sizeof(buf), "unknown opcode 0x%02X", op);
    fail(ErrorCode::UnknownOpcode, buf);
}

}  // namespace

Opcode opcode_of(const Command& c) {
    return std::visit(overloaded{
        [](const SetChannel&) { return Opcode::SetChannel; },
        [](const SetIntensity&) { return Opcode::SetIntensity; },
        [](const StimOnce&) { return Opcode::StimOnce; },
        [](const StimTrain&) { return Opcode::StimTrain; },
        [](const Stop&) { return Opcode::Stop; },
        [](const QueryStatus&) { return Opcode::QueryStatus; },
        [](const ResetLockout&) { return Opcode::ResetLockout; },
        [](const Arm&) { return Opcode::Arm; },
        [](const Disarm&) { return Opcode::Disarm; },
        [](const Vibrate&) { return Opcode::Vibrate; },
        [](const Status&) { return Opcode::Status; },
        [](const Ack&) { return Opcode::Ack; },
        [](const Nak&) { return Opcode::Nak; },
    }, c);
}

std::string describe(const Command& c) {
    std::ostringstream os;
    os << opcode_name(opcode_of(c));
    std::visit(overloaded{
        [&](const SetChannel& x) { os << "(ch" << int(x.channel) << ')'; },
        [&](const SetIntensity& x) { os << '(' << x.microamps << " uA)"; },
        [&](const StimTrain& x) { os << '(' << x.count << ", " << x.gap_ms << " ms)"; },
        [&](const Vibrate& x) { os << '(' << x.duration_ms << " ms, " << x.frequency_hz << " Hz)"; },
        [&](const Status& x) {
            os << "(state=" << int(x.state) << ", " << x.resistance_dohm << " dOhm, " << x.intensity_ua << " uA)";
        },
        [&](const Ack& x) { os << '(' << opcode_name(x.opcode) << ')'; },
        [&](const Nak& x) { os << '(' << opcode_name(x.opcode) << ", reason=" << int(x.reason) << ')'; },
        [](const auto&) {},
    }, c);
    return os.str();
}

std::uint8_t crc8(std::span<const std::uint8_t> bytes) {
    std::uint8_t crc = 0x00;
    for (std::uint8_t b : bytes) {
        crc ^= b;
        for (int i = 0; i < 8; ++i)
            crc = (crc & 0x80) ? static_cast<std::uint8_t>((crc << 1) ^ 0x07) : static_cast<std::uint8_t>(crc << 1);
    }
    return crc;
}

std::vector<std::uint8_t> encode(const Command& c) {
    std::vector<std::uint8_t> payload;
    std::visit(overloaded{
        [&](const SetChannel& x) {
            if (x.channel < 1 || x.channel > 15) fail(ErrorCode::Encode, "SET_CHANNEL channel outside 1..15");
            payload.push_back(x.channel);
        },
        [&](const SetIntensity& x) {
            if (x.microamps > kMaxIntensityUa) fail(ErrorCode::Encode, "SET_INTENSITY above 4000 uA");
            put_u16(payload, x.microamps);
        },
        [&](const StimTrain& x) {
            if (x.count == 0) fail(ErrorCode::Encode, "STIM_TRAIN count must be >= 1");
            put_u16(payload, x.count);
            put_u16(payload, x.gap_ms);
        },
        [&](const Vibrate& x) {
            put_u16(payload, x.duration_ms);
            put_u16(payload, x.frequency_hz);
        },
        [&](const Status& x) {
            payload.push_back(static_cast<std::uint8_t>(x.state));
            put_u32(payload, x.resistance_dohm);
            put_u16(payload, x.intensity_ua);
        },
        [&](const Ack& x) { payload.push_back(static_cast<std::uint8_t>(x.opcode)); },
        [&](const Nak& x) {
            payload.push_back(static_cast<std::uint8_t>(x.opcode));
            payload.push_back(static_cast<std::uint8_t>(x.reason));
        },
        [](const auto&) {},
    }, c);
    if (payload.size() > kMaxPayload) fail(ErrorCode::Encode, "payload exceeds 64 bytes");

    std::vector<std::uint8_t> frame;
    frame.reserve(payload.size() + 4);
    frame.push_back(kStartOfFrame);
    frame.push_back(static_cast<std::uint8_t>(opcode_of(c)));
    frame.push_back(static_cast<std::uint8_t>(payload.size()));
    frame.insert(frame.end(), payload.begin(), payload.end());
    frame.push_back(crc8(std::span(frame).subspan(1)));
    return frame;
}

Command decode(std::span<const std::uint8_t> frame) {
    if (frame.size() < 4 || frame[0] != kStartOfFrame) fail(ErrorCode::Parse, "not a frame");
    const std::size_t len = frame[2];
    if (len > kMaxPayload) fail(ErrorCode::LengthOverrun, "frame length above 64");
    if (frame.size() != len + 4) fail(ErrorCode::LengthOverrun, "frame length does not match byte count");
    if (crc8(frame.subspan(1, len + 2)) != frame[len + 3]) fail(ErrorCode::Checksum, "frame checksum mismatch");
    return decode_payload(frame[1], frame.subspan(3, len));
}

void StreamDecoder::feed(std::span<const std::uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
    parse();
}

void StreamDecoder::parse() {
    for (;;) {
        while (!buffer_.empty() && buffer_.front() != kStartOfFrame) buffer_.pop_front();
        if (buffer_.size() < 3) return;
        const std::uint8_t op = buffer_[1];
        const std::size_t len = buffer_[2];
        if (len > kMaxPayload) {
            ready_.push_back(DecodeError{ErrorCode::LengthOverrun, op});
            buffer_.pop_front();
            continue;
        }
        if (buffer_.size() < len + 4) return;
        std::vector<std::uint8_t> frame(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(len + 4));
        if (crc8(std::span(frame).subspan(1, len + 2)) != frame[len + 3]) {
            ready_.push_back(DecodeError{ErrorCode::Checksum, op});
            buffer_.pop_front();
            continue;
        }
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(len + 4));
        try {
            ready_.push_back(decode_payload(op, std::span(frame).subspan(3, len)));
        } catch (const Error& e) {
            ready_.push_back(DecodeError{e.code(), op});
        }
    }
}

std::optional<DecodeResult> StreamDecoder::next() {
    if (ready_.empty()) return std::nullopt;
    DecodeResult r = std::move(ready_.front());
    ready_.pop_front();
    return r;
}

std::vector<DecodeResult> StreamDecoder::drain() {
    std::vector<DecodeResult> out(ready_.begin(), ready_.end());
    ready_.clear();
    return out;
}

std::string to_hex_line(std::span<const std::uint8_t> frame) {
    std::string out;
    char buf[4];
    for (std::size_t i = 0; i < frame.size(); ++i) {
        std::snprintf(buf, sizeof(buf), i ? " %02X" : "%02X", frame[i]);
        out += buf;
    }
    return out;
}

std::vector<std::vector<std::uint8_t>> read_hex_replay(const std::string& text) {
    std::vector<std::vector<std::uint8_t>> frames;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream tokens(line);
        std::string tok;
        std::vector<std::uint8_t> frame;
        while (tokens >> tok) {
            unsigned v = 0;
            char extra = 0;
            if (tok.size() > 2 || std::sscanf(tok.c_str(), "%2x%c", &v, &extra) != 1)
                fail(ErrorCode::Parse, "replay line " + std::to_string(line_no) + ": bad hex byte '" + tok + "'");
            frame.push_back(static_cast<std::uint8_t>(v));
        }
        if (!frame.empty()) frames.push_back(std::move(frame));
    }
    return frames;
}

}  // namespace etw::proto
