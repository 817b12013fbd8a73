#pragma once

// Relay switch matrix for the stimulation channels.
//
// Eight daisy-chained 8-bit shift registers drive 32 photorelays. Each of the
// 16 electrode nodes (node 0 = the four tied base electrodes, nodes 1..15 =
// ch1..ch15) has a high-rail relay and a low-rail relay. Every relay is driven
// by two adjacent register outputs that must always agree.
//
// Layout v1 (bit 0 = Q0 of the register nearest the controller):
//
//   node n, high rail  -> bits 4n, 4n+1
//   node n, low rail   -> bits 4n+2, 4n+3
//   register r holds nodes 2r and 2r+1
//
//   node   high bits   low bits    register
//   base   0,1         2,3         0
//   ch1    4,5         6,7         0
//   ch2    8,9         10,11       1
//   ...
//   ch15   60,61       62,63       7
//
// The stimulation phase puts the channel on the low rail (cathodic) and the
// base node on the high rail; the priming phase swaps the rails.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace etw::relay {

inline constexpr int kLayoutVersion = 1;
inline constexpr int kNodeCount = 16;
inline constexpr int kChannelCount = 15;
inline constexpr int kBaseCount = 4;
inline constexpr int kFirstDefaultChannel = 5;  // ch1-ch4 are unused by default

class ElectrodeId {
public:
    enum class Kind { Base, Channel };

    static ElectrodeId base(int index);     // 1..4
    static ElectrodeId channel(int index);  // 1..15

    Kind kind() const noexcept { return kind_; }
    int index() const noexcept { return index_; }
    bool is_channel() const noexcept { return kind_ == Kind::Channel; }
    // Node in the relay layout: 0 for any base electrode, 1..15 for channels.
    int node() const noexcept { return is_channel() ? index_ : 0; }
    bool unused_by_default() const noexcept { return is_channel() && index_ < kFirstDefaultChannel; }
    std::string name() const;

    friend bool operator==(const ElectrodeId&, const ElectrodeId&) = default;

private:
    ElectrodeId(Kind k, int i) : kind_(k), index_(i) {}
    Kind kind_;
    int index_;
};

enum class Phase { Idle, Priming, Stim };
enum class Rail { High, Low };

struct RelayFrame {
    std::uint64_t bits = 0;

    bool bit(int i) const noexcept { return (bits >> i) & 1u; }
    bool closed(int node, Rail rail) const noexcept;
    friend bool operator==(const RelayFrame&, const RelayFrame&) = default;
};

struct RelayLocation {
    int node;
    Rail rail;
    int first_bit;  // the pair is (first_bit, first_bit + 1)
};

// All 32 relays in layout order.
const std::array<RelayLocation, 32>& layout();

// Layout rendered as CSV (node,name,rail,bit_a,bit_b,register), matching data/relay_layout_v1.csv.
std::string layout_csv();

RelayFrame close_relay(RelayFrame frame, int node, Rail rail);

struct RoutingState {
    std::optional<ElectrodeId> channel;
    Phase phase = Phase::Idle;

    static RoutingState idle() { return {}; }
    friend bool operator==(const RoutingState&, const RoutingState&) = default;
};

RelayFrame idle();

// Throws Argument if `channel` is a base electrode or `phase` is Idle.
RelayFrame route(ElectrodeId channel, Phase phase);
RelayFrame frame_for(const RoutingState& state);

struct Validation {
    enum class Kind { Ok, ShortCircuit, Ambiguous, PairMismatch };
    Kind kind = Kind::Ok;
    std::vector<int> nodes;  // offending nodes (or relay first bits for PairMismatch)

    bool ok() const noexcept { return kind == Kind::Ok; }
    std::string describe() const;
};

Validation validate(RelayFrame frame);

// Bit sequence in shift order. The first bit shifted travels to the far end of
// the chain, so stream[0] is bit 63 and stream[63] is bit 0.
using Bitstream = std::array<std::uint8_t, 64>;
Bitstream to_bitstream(RelayFrame frame);  // throws Argument on invalid frames
RelayFrame from_bitstream(const Bitstream& stream);

// Frames to apply, in order, to move between two routing states. Any change of
// an active connection goes through idle() first.
std::vector<RelayFrame> transition(const RoutingState& from, const RoutingState& to);

// True when no node moves directly from one closed rail set to a different one
// between consecutive frames (starting from `start`).
bool break_before_make(RelayFrame start, const std::vector<RelayFrame>& sequence);

// "0x" + 16 upper-case hex digits.
std::string to_hex(RelayFrame frame);
RelayFrame from_hex(const std::string& text);

}  // namespace etw::relay
