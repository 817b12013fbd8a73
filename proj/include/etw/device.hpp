#pragma once

// Simulated wristband. Consumes wire-protocol frames, plays waveforms through
// the relay matrix into a resistive electrode-skin load, feeds load
// measurements to the safety interlock and keeps a per-channel charge ledger.
// Time is simulated: nothing happens between calls to step().

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etw/protocol.hpp"
#include "etw/relay.hpp"
#include "etw/rng.hpp"
#include "etw/safety.hpp"
#include "etw/stim.hpp"

namespace etw::device {

struct DeviceConfig {
    safety::SafetyLimits limits;
    double sample_rate_hz = stim::kDefaultSampleRateHz;
    double measurement_period_ms = 1.0;
    double skin_resistance_kohm = 72.3;
    double resistance_noise_kohm = 0.0;
    double probe_current_ma = 0.1;  // impedance probe used while in Fault
    std::uint64_t seed = 0;
};

struct SkinLoadModel {
    std::array<double, relay::kChannelCount + 1> resistance_kohm{};  // index = channel, [0] unused
    double noise_kohm = 0.0;
};

// Vibrotactile baseline: a resonant actuator on the dorsal wrist.
struct VibroEvent {
    static constexpr double kDefaultDurationMs = 25.0;
    static constexpr double kResonantFrequencyHz = 80.0;

    double start_ms = 0.0;
    double duration_ms = kDefaultDurationMs;
    double frequency_hz = kResonantFrequencyHz;
    std::string locus = "wrist";
};

// nullopt for a zero (or negative) duration.
std::optional<VibroEvent> vibrotactile_baseline(double duration_ms = VibroEvent::kDefaultDurationMs,
                                                double start_ms = 0.0);

struct PlayedStimulus {
    double start_ms;
    int channel;
    double amplitude_ma;
    double net_charge_uc;  // charge actually delivered
    bool completed;
};

struct FrameChange {
    double t_ms;
    relay::RelayFrame frame;
};

struct DeviceStatus {
    safety::SafetyState state;
    std::optional<double> resistance_kohm;
    double last_current_ma = 0.0;
    int channel = 0;  // 0 = none selected
    std::uint16_t intensity_ua = 0;
    bool playing = false;
};

class Device {
public:
    explicit Device(DeviceConfig config = {});

    // Byte-level link: feeds the stream decoder and returns the encoded replies.
    std::vector<std::uint8_t> receive(std::span<const std::uint8_t> bytes);
    // One decoded command in, one reply out (ACK, NAK or STATUS).
    proto::Command handle(const proto::Command& command);

    // Advances the simulated clock. Measurements emitted on the fixed cadence
    // are appended to `sink` when given.
    void step(double dt_ms, std::vector<safety::LoadMeasurement>* sink = nullptr);
    // Steps until nothing is scheduled (or max_ms elapses); returns elapsed ms.
    double run_until_idle(double max_ms = 600000.0, std::vector<safety::LoadMeasurement>* sink = nullptr);

    double now_ms() const noexcept;
    bool playing() const noexcept { return !queue_.empty() || active_.has_value(); }

    DeviceStatus status() const;
    proto::Status status_frame() const;
    safety::SafetyState safety_state() const noexcept { return interlock_.state(); }
    relay::RelayFrame relay_frame() const noexcept { return frame_; }
    const std::vector<FrameChange>& frame_log() const noexcept { return frame_log_; }
    const std::vector<PlayedStimulus>& played() const noexcept { return played_; }
    const std::vector<VibroEvent>& vibrations() const noexcept { return vibrations_; }
    std::size_t decode_errors() const noexcept { return decode_errors_; }

    // Exact ledger: completed waveforms contribute their stim::net_charge,
    // a waveform still playing contributes the charge of its played prefix.
    double accumulated_charge(int channel) const;

    // Hardware-in-the-loop hooks.
    // Queues an arbitrary waveform (e.g. a monophasic baseline) on `channel`.
    // Goes through the same Armed-only gate as STIM_ONCE; returns false when refused.
    bool play(int channel, stim::WaveformSamples waveform);
    void set_resistance(int channel, double kohm);
    safety::SafetyState inject_measurement(const safety::LoadMeasurement& m);

private:
    struct Scheduled {
        std::int64_t start_tick;
        int channel;
        double amplitude_ma;
        stim::WaveformSamples waveform;
    };
    struct Active {
        Scheduled item;
        std::size_t position = 0;
        relay::Phase phase = relay::Phase::Idle;
    };

    proto::Command start_stimulation(proto::Opcode op, int count, double gap_ms);
    void apply_routing(const relay::RoutingState& target);
    void abort_playback();
    void finish_active(bool completed);
    void tick(std::vector<safety::LoadMeasurement>* sink);
    double resistance_sample(int channel);

    DeviceConfig config_;
    safety::Interlock interlock_;
    SkinLoadModel load_;
    Rng rng_;
    proto::StreamDecoder decoder_;
    std::size_t decode_errors_ = 0;

    std::int64_t tick_ = 0;
    std::int64_t ticks_per_measurement_;
    int channel_ = 0;
    std::uint16_t intensity_ua_ = 0;

    std::deque<Scheduled> queue_;
    std::optional<Active> active_;
    relay::RoutingState routing_;
    relay::RelayFrame frame_;
    std::vector<FrameChange> frame_log_;

    std::array<double, relay::kChannelCount + 1> charge_ledger_{};
    std::vector<PlayedStimulus> played_;
    std::vector<VibroEvent> vibrations_;
};

}  // namespace etw::device
