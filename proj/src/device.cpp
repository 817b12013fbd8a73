#include "etw/device.hpp"

#include <algorithm>
#include <cmath>

#include "etw/error.hpp"

namespace etw::device {

using proto::NakReason;
using proto::Opcode;
using safety::StateKind;

std::optional<VibroEvent> vibrotactile_baseline(double duration_ms, double start_ms) {
    if (!(duration_ms > 0.0)) return std::nullopt;
    VibroEvent e;
    e.start_ms = start_ms;
    e.duration_ms = duration_ms;
    return e;
}

Device::Device(DeviceConfig config)
    : config_(config), interlock_(config.limits), rng_(config.seed) {
    stim::check_sample_rate(config_.sample_rate_hz);
    ticks_per_measurement_ =
        static_cast<std::int64_t>(stim::samples_for(config_.measurement_period_ms, config_.sample_rate_hz));
    if (ticks_per_measurement_ < 1) fail(ErrorCode::Argument, "measurement period shorter than one sample");
    load_.resistance_kohm.fill(config_.skin_resistance_kohm);
    load_.noise_kohm = config_.resistance_noise_kohm;
    frame_log_.push_back({0.0, frame_});
}

double Device::now_ms() const noexcept { return static_cast<double>(tick_) * 1000.0 / config_.sample_rate_hz; }

std::vector<std::uint8_t> Device::receive(std::span<const std::uint8_t> bytes) {
    decoder_.feed(bytes);
    std::vector<std::uint8_t> out;
    while (auto r = decoder_.next()) {
        if (const auto* cmd = std::get_if<proto::Command>(&*r)) {
            const auto reply = proto::encode(handle(*cmd));
            out.insert(out.end(), reply.begin(), reply.end());
        } else {
            ++decode_errors_;
        }
    }
    return out;
}

proto::Command Device::handle(const proto::Command& command) {
    const Opcode op = proto::opcode_of(command);
    const auto nak = [op](NakReason r) -> proto::Command { return proto::Nak{op, r}; };
    const proto::Command ack = proto::Ack{op};
    const auto state = interlock_.state().kind;

    if (const auto* c = std::get_if<proto::SetChannel>(&command)) {
        if (state == StateKind::Stimulating) return nak(NakReason::Busy);
        channel_ = c->channel;
        return ack;
    }
    if (const auto* c = std::get_if<proto::SetIntensity>(&command)) {
        if (state == StateKind::Stimulating) return nak(NakReason::Busy);
        const auto check = safety::check_command(c->microamps / 1000.0, interlock_.limits());
        if (check.kind == safety::CommandCheck::Kind::NonPositive) return nak(NakReason::NonPositive);
        if (check.kind == safety::CommandCheck::Kind::OverSoftwareLimit) return nak(NakReason::OverLimit);
        intensity_ua_ = c->microamps;
        return ack;
    }
    if (std::holds_alternative<proto::StimOnce>(command)) return start_stimulation(op, 1, 0.0);
    if (const auto* c = std::get_if<proto::StimTrain>(&command)) return start_stimulation(op, c->count, c->gap_ms);
    if (std::holds_alternative<proto::Stop>(command)) {
        abort_playback();
        return ack;
    }
    if (std::holds_alternative<proto::QueryStatus>(command)) return status_frame();
    if (std::holds_alternative<proto::ResetLockout>(command)) {
        if (!interlock_.reset()) return nak(NakReason::BadArgument);
        apply_routing(relay::RoutingState::idle());
        return ack;
    }
    if (std::holds_alternative<proto::Arm>(command)) {
        if (state == StateKind::Lockout) return nak(NakReason::LockedOut);
        if (state == StateKind::Disarmed) interlock_.arm();
        return interlock_.state().kind == StateKind::Armed ? ack : nak(NakReason::BadArgument);
    }
    if (std::holds_alternative<proto::Disarm>(command)) {
        if (state == StateKind::Stimulating) abort_playback();
        interlock_.disarm();
        return interlock_.state().kind == StateKind::Disarmed ? ack : nak(NakReason::LockedOut);
    }
    if (const auto* c = std::get_if<proto::Vibrate>(&command)) {
        if (state == StateKind::Lockout) return nak(NakReason::LockedOut);
        if (auto e = vibrotactile_baseline(c->duration_ms, now_ms())) {
            e->frequency_hz = c->frequency_hz;
            vibrations_.push_back(*e);
        }
        return ack;
    }
    // STATUS / ACK / NAK are device-to-host only.
    return nak(NakReason::BadArgument);
}

proto::Command Device::start_stimulation(Opcode op, int count, double gap_ms) {
    const auto state = interlock_.state().kind;
    if (state == StateKind::Lockout) return proto::Nak{op, NakReason::LockedOut};
    if (state == StateKind::Stimulating) return proto::Nak{op, NakReason::Busy};
    if (state != StateKind::Armed) return proto::Nak{op, NakReason::NotArmed};
    if (channel_ == 0) return proto::Nak{op, NakReason::NoChannel};
    const double amplitude = intensity_ua_ / 1000.0;
    const auto check = safety::check_command(amplitude, interlock_.limits());
    if (!check.ok())
        return proto::Nak{op, check.kind == safety::CommandCheck::Kind::NonPositive ? NakReason::NonPositive
                                                                                    : NakReason::OverLimit};

    const stim::StimulusTrain train(stim::PulseSpec::balanced(amplitude), count, gap_ms);
    const auto schedule = stim::build_train(train, config_.sample_rate_hz);
    interlock_.begin_stimulation();
    for (const auto& entry : schedule) {
        const auto offset = static_cast<std::int64_t>(std::llround(entry.start_ms * config_.sample_rate_hz / 1000.0));
        queue_.push_back({tick_ + offset, channel_, amplitude, entry.waveform});
    }
    return proto::Ack{op};
}

bool Device::play(int channel, stim::WaveformSamples waveform) {
    if (channel < 1 || channel > relay::kChannelCount)
        fail(ErrorCode::UnknownChannel, "channel must be 1..15");
    if (waveform.sample_rate() != config_.sample_rate_hz)
        fail(ErrorCode::Argument, "waveform sample rate differs from the device rate");
    if (!interlock_.begin_stimulation()) return false;
    const double amplitude = waveform.peak_abs();
    queue_.push_back({tick_, channel, amplitude, std::move(waveform)});
    return true;
}

void Device::apply_routing(const relay::RoutingState& target) {
    for (const auto& f : relay::transition(routing_, target)) {
        frame_ = f;
        frame_log_.push_back({now_ms(), f});
    }
    routing_ = target;
}

void Device::finish_active(bool completed) {
    if (!active_) return;
    const auto& item = active_->item;
    const double charge =
        completed ? stim::net_charge(item.waveform)
                  : stim::net_charge(item.waveform.samples().first(active_->position), item.waveform.sample_rate());
    charge_ledger_[item.channel] += charge;
    played_.push_back({static_cast<double>(item.start_tick) * 1000.0 / config_.sample_rate_hz, item.channel,
                       item.amplitude_ma, charge, completed});
    active_.reset();
}

void Device::abort_playback() {
    finish_active(false);
    queue_.clear();
    apply_routing(relay::RoutingState::idle());
    interlock_.end_stimulation();
}

double Device::resistance_sample(int channel) {
    const double r = load_.resistance_kohm[static_cast<std::size_t>(channel)];
    if (load_.noise_kohm <= 0.0) return r;
    return std::max(0.001, r + rng_.normal(0.0, load_.noise_kohm));
}

void Device::tick(std::vector<safety::LoadMeasurement>* sink) {
    if (!active_ && !queue_.empty() && queue_.front().start_tick <= tick_) {
        active_ = Active{std::move(queue_.front())};
        queue_.pop_front();
    }

    double current = 0.0;
    int channel = channel_;
    if (active_) {
        const auto samples = active_->item.waveform.samples();
        const double sample = samples[active_->position];
        channel = active_->item.channel;
        const relay::Phase phase = sample < 0.0   ? relay::Phase::Stim
                                   : sample > 0.0 ? relay::Phase::Priming
                                                  : relay::Phase::Idle;
        const relay::RoutingState target =
            phase == relay::Phase::Idle ? relay::RoutingState::idle()
                                        : relay::RoutingState{relay::ElectrodeId::channel(channel), phase};
        if (!(target == routing_)) apply_routing(target);
        const double cap = interlock_.limits().hardware_cap;
        current = std::clamp(sample, -cap, cap);
        if (++active_->position == samples.size()) {
            finish_active(true);
            apply_routing(relay::RoutingState::idle());
        }
    }

    if (tick_ % ticks_per_measurement_ == 0) {
        safety::LoadMeasurement m;
        m.timestamp = now_ms();
        const int load_channel = channel >= 1 ? channel : 1;
        if (current != 0.0) {
            m.current = std::abs(current);
            m.voltage = m.current * resistance_sample(load_channel);
        } else if (interlock_.state().kind == StateKind::Fault) {
            m.current = config_.probe_current_ma;
            m.voltage = m.current * resistance_sample(load_channel);
        }
        const auto after = interlock_.observe(m);
        if ((after.kind == StateKind::Fault || after.kind == StateKind::Lockout) && playing()) abort_playback();
        if (sink) sink->push_back(m);
    }

    ++tick_;
    if (!playing()) interlock_.end_stimulation();
}

void Device::step(double dt_ms, std::vector<safety::LoadMeasurement>* sink) {
    if (!(dt_ms > 0.0)) fail(ErrorCode::Argument, "step needs dt > 0");
    const auto ticks = static_cast<std::int64_t>(std::llround(dt_ms * config_.sample_rate_hz / 1000.0));
    for (std::int64_t i = 0; i < ticks; ++i) tick(sink);
}

double Device::run_until_idle(double max_ms, std::vector<safety::LoadMeasurement>* sink) {
    const double start = now_ms();
    while (playing() && now_ms() - start < max_ms) step(1.0, sink);
    return now_ms() - start;
}

double Device::accumulated_charge(int channel) const {
    if (channel < 1 || channel > relay::kChannelCount) fail(ErrorCode::UnknownChannel, "channel must be 1..15");
    double q = charge_ledger_[static_cast<std::size_t>(channel)];
    if (active_ && active_->item.channel == channel)
        q += stim::net_charge(active_->item.waveform.samples().first(active_->position),
                              active_->item.waveform.sample_rate());
    return q;
}

void Device::set_resistance(int channel, double kohm) {
    if (channel < 1 || channel > relay::kChannelCount) fail(ErrorCode::UnknownChannel, "channel must be 1..15");
    if (!(kohm > 0.0)) fail(ErrorCode::Argument, "resistance must be positive");
    load_.resistance_kohm[static_cast<std::size_t>(channel)] = kohm;
}

safety::SafetyState Device::inject_measurement(const safety::LoadMeasurement& m) {
    const auto after = interlock_.observe(m);
    if ((after.kind == StateKind::Fault || after.kind == StateKind::Lockout) && playing()) abort_playback();
    return after;
}

DeviceStatus Device::status() const {
    return {interlock_.state(), interlock_.last_resistance(), interlock_.last_current(), channel_, intensity_ua_,
            playing()};
}

proto::Status Device::status_frame() const {
    using proto::DeviceState;
    const auto s = interlock_.state();
    DeviceState code = DeviceState::Disarmed;
    switch (s.kind) {
    case StateKind::Disarmed: code = DeviceState::Disarmed; break;
    case StateKind::Armed: code = DeviceState::Armed; break;
    case StateKind::Stimulating: code = DeviceState::Stimulating; break;
    case StateKind::Fault:
        code = s.reason == safety::FaultReason::Short ? DeviceState::FaultShort : DeviceState::FaultOpenCircuit;
        break;
    case StateKind::Lockout: code = DeviceState::Lockout; break;
    }
    const auto r = interlock_.last_resistance();
    const double dohm = r ? std::clamp(*r * 10000.0, 0.0, 4294967295.0) : 0.0;
    return {code, static_cast<std::uint32_t>(std::llround(dohm)), intensity_ua_};
}

}  // namespace etw::device
