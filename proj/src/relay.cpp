#include "etw/relay.hpp"

#include <cstdio>
#include <sstream>

#include "etw/error.hpp"

namespace etw::relay {

ElectrodeId ElectrodeId::base(int index) {
    if (index < 1 || index > kBaseCount) fail(ErrorCode::Argument, "base electrode index must be 1..4");
    return {Kind::Base, index};
}

ElectrodeId ElectrodeId::channel(int index) {
    if (index < 1 || index > kChannelCount) fail(ErrorCode::Argument, "channel index must be 1..15");
    return {Kind::Channel, index};
}

std::string ElectrodeId::name() const {
    return (is_channel() ? "ch" : "base") + std::to_string(index_);
}

namespace {

int first_bit(int node, Rail rail) { return 4 * node + (rail == Rail::High ? 0 : 2); }

std::string node_name(int node) { return node == 0 ? "base" : "ch" + std::to_string(node); }

}  // namespace

bool RelayFrame::closed(int node, Rail rail) const noexcept {
    const int b = first_bit(node, rail);
    return bit(b) || bit(b + 1);
}

const std::array<RelayLocation, 32>& layout() {
    static const std::array<RelayLocation, 32> table = [] {
        std::array<RelayLocation, 32> t{};
        for (int node = 0; node < kNodeCount; ++node) {
            t[2 * node] = {node, Rail::High, first_bit(node, Rail::High)};
            t[2 * node + 1] = {node, Rail::Low, first_bit(node, Rail::Low)};
        }
        return t;
    }();
    return table;
}

std::string layout_csv() {
    std::ostringstream os;
    os << "# relay layout v" << kLayoutVersion << "\n";
    os << "node,name,rail,bit_a,bit_b,register\n";
    for (const auto& r : layout()) {
        os << r.node << ',' << node_name(r.node) << ',' << (r.rail == Rail::High ? "high" : "low") << ','
           << r.first_bit << ',' << r.first_bit + 1 << ',' << r.first_bit / 8 << '\n';
    }
    return os.str();
}

RelayFrame close_relay(RelayFrame frame, int node, Rail rail) {
    if (node < 0 || node >= kNodeCount) fail(ErrorCode::Argument, "relay node out of range");
    frame.bits |= std::uint64_t{3} << first_bit(node, rail);
    return frame;
}

RelayFrame idle() { return {}; }

RelayFrame route(ElectrodeId channel, Phase phase) {
    if (!channel.is_channel()) fail(ErrorCode::Argument, "route() needs a channel electrode, got " + channel.name());
    if (phase == Phase::Idle) fail(ErrorCode::Argument, "route() needs the stim or priming phase");
    const bool stim = phase == Phase::Stim;
    RelayFrame f;
    f = close_relay(f, channel.node(), stim ? Rail::Low : Rail::High);
    f = close_relay(f, 0, stim ? Rail::High : Rail::Low);
    return f;
}

RelayFrame frame_for(const RoutingState& state) {
    if (state.phase == Phase::Idle || !state.channel) return idle();
    return route(*state.channel, state.phase);
}

Validation validate(RelayFrame frame) {
    Validation v;
    for (const auto& r : layout()) {
        if (frame.bit(r.first_bit) != frame.bit(r.first_bit + 1)) v.nodes.push_back(r.first_bit);
    }
    if (!v.nodes.empty()) {
        v.kind = Validation::Kind::PairMismatch;
        return v;
    }
    for (int node = 0; node < kNodeCount; ++node) {
        if (frame.closed(node, Rail::High) && frame.closed(node, Rail::Low)) v.nodes.push_back(node);
    }
    if (!v.nodes.empty()) {
        v.kind = Validation::Kind::ShortCircuit;
        return v;
    }
    for (int node = 1; node < kNodeCount; ++node) {
        if (frame.closed(node, Rail::High) || frame.closed(node, Rail::Low)) v.nodes.push_back(node);
    }
    if (v.nodes.size() > 1) {
        v.kind = Validation::Kind::Ambiguous;
        return v;
    }
    v.nodes.clear();
    return v;
}

std::string Validation::describe() const {
    std::ostringstream os;
    switch (kind) {
    case Kind::Ok: return "ok";
    case Kind::ShortCircuit: os << "short circuit:"; break;
    case Kind::Ambiguous: os << "ambiguous channels:"; break;
    case Kind::PairMismatch: os << "unequal relay bit pair at bits:"; break;
    }
    for (int n : nodes) os << ' ' << (kind == Kind::PairMismatch ? std::to_string(n) : node_name(n));
    return os.str();
}

Bitstream to_bitstream(RelayFrame frame) {
    const auto v = validate(frame);
    if (!v.ok()) fail(ErrorCode::Argument, "refusing to serialize invalid relay frame (" + v.describe() + ")");
    Bitstream s{};
    for (int i = 0; i < 64; ++i) s[i] = frame.bit(63 - i) ? 1 : 0;
    return s;
}

RelayFrame from_bitstream(const Bitstream& stream) {
    RelayFrame f;
    for (int i = 0; i < 64; ++i) {
        if (stream[i] > 1) fail(ErrorCode::Parse, "bitstream entries must be 0 or 1");
        if (stream[i]) f.bits |= std::uint64_t{1} << (63 - i);
    }
    return f;
}

std::vector<RelayFrame> transition(const RoutingState& from, const RoutingState& to) {
    const RelayFrame a = frame_for(from);
    const RelayFrame b = frame_for(to);
    if (a == b) return {};
    if (a == idle()) return {b};
    if (b == idle()) return {idle()};
    return {idle(), b};
}

bool break_before_make(RelayFrame start, const std::vector<RelayFrame>& sequence) {
    RelayFrame prev = start;
    for (const auto& next : sequence) {
        if (prev != idle() && next != idle() && prev != next) return false;
        prev = next;
    }
    return true;
}

std::string to_hex(RelayFrame frame) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llX", static_cast<unsigned long long>(frame.bits));
    return buf;
}

RelayFrame from_hex(const std::string& text) {
    std::string digits = text;
    if (digits.rfind("0x", 0) == 0 || digits.rfind("0X", 0) == 0) digits = digits.substr(2);
    std::string clean;
    for (char c : digits)
        if (c != '_') clean.push_back(c);
    if (clean.empty() || clean.size() > 16) fail(ErrorCode::Parse, "relay frame hex must have 1..16 digits");
    RelayFrame f;
    for (char c : clean) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else fail(ErrorCode::Parse, "bad hex digit in relay frame");
        f.bits = (f.bits << 4) | static_cast<std::uint64_t>(d);
    }
    return f;
}

}  // namespace etw::relay
