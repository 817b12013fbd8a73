#include <doctest.h>

#include "etw/device.hpp"
#include "etw/error.hpp"

using namespace etw;
using namespace etw::device;
using proto::Command;

namespace {

Device armed_device(int channel = 5, std::uint16_t ua = 1000, DeviceConfig cfg = {}) {
    Device d(cfg);
    REQUIRE(d.handle(proto::SetChannel{static_cast<std::uint8_t>(channel)}) == Command{proto::Ack{proto::Opcode::SetChannel}});
    REQUIRE(d.handle(proto::SetIntensity{ua}) == Command{proto::Ack{proto::Opcode::SetIntensity}});
    REQUIRE(d.handle(proto::Arm{}) == Command{proto::Ack{proto::Opcode::Arm}});
    return d;
}

std::vector<std::uint8_t> frames(std::initializer_list<Command> cmds) {
    std::vector<std::uint8_t> out;
    for (const auto& c : cmds) {
        const auto f = proto::encode(c);
        out.insert(out.end(), f.begin(), f.end());
    }
    return out;
}

}  // namespace

TEST_CASE("a balanced stimulus leaves no net charge") {
    auto d = armed_device();
    CHECK(d.handle(proto::StimOnce{}) == Command{proto::Ack{proto::Opcode::StimOnce}});
    CHECK(d.safety_state().kind == safety::StateKind::Stimulating);
    d.run_until_idle();
    REQUIRE(d.played().size() == 1);
    CHECK(d.played()[0].completed);
    CHECK(d.accumulated_charge(5) == 0.0);
    CHECK(d.safety_state() == safety::SafetyState::armed());
}

TEST_CASE("monophasic baseline accumulates -5 uC per pulse") {
    auto d = armed_device();
    REQUIRE(d.play(5, stim::synth_monophasic(1.0, 5.0)));
    d.run_until_idle();
    CHECK(d.accumulated_charge(5) == -5.0);
    REQUIRE(d.play(5, stim::synth_monophasic(1.0, 5.0)));
    d.step(2.0);
    // partial prefix: 20 samples of -1 mA
    CHECK(d.accumulated_charge(5) == -7.0);
    d.run_until_idle();
    CHECK(d.accumulated_charge(5) == -10.0);
}

TEST_CASE("default load reports 72.3 kOhm") {
    auto d = armed_device();
    std::vector<safety::LoadMeasurement> ms;
    d.handle(proto::StimOnce{});
    d.run_until_idle(600000.0, &ms);
    REQUIRE(d.status().resistance_kohm.has_value());
    CHECK(*d.status().resistance_kohm == doctest::Approx(72.3));
    const auto st = d.status_frame();
    CHECK(st.resistance_dohm == 723000);
    CHECK(st.intensity_ua == 1000);
    bool saw_current = false;
    for (const auto& m : ms)
        if (m.current > 0) {
            saw_current = true;
            CHECK(m.voltage / m.current == doctest::Approx(72.3));
        }
    CHECK(saw_current);
}

TEST_CASE("stimulation commands are refused unless armed") {
    Device d;
    d.handle(proto::SetChannel{5});
    d.handle(proto::SetIntensity{650});
    CHECK(d.handle(proto::StimOnce{}) == Command{proto::Nak{proto::Opcode::StimOnce, proto::NakReason::NotArmed}});
    CHECK_FALSE(d.play(5, stim::synth_monophasic(1.0, 5.0)));
    CHECK(d.played().empty());

    Device nochan;
    nochan.handle(proto::Arm{});
    CHECK(nochan.handle(proto::StimTrain{3, 10}) ==
          Command{proto::Nak{proto::Opcode::StimTrain, proto::NakReason::NoChannel}});

    auto over = armed_device();
    CHECK(over.handle(proto::SetIntensity{4000}) == Command{proto::Ack{proto::Opcode::SetIntensity}});
    CHECK(over.handle(proto::SetIntensity{0}) ==
          Command{proto::Nak{proto::Opcode::SetIntensity, proto::NakReason::NonPositive}});
}

TEST_CASE("over-current measurement latches lockout and aborts playback") {
    auto d = armed_device();
    d.handle(proto::StimTrain{10, 1000});
    d.step(100.0);
    CHECK(d.playing());
    CHECK(d.inject_measurement({72.0, 5.0, d.now_ms()}) == safety::SafetyState::lockout());
    CHECK_FALSE(d.playing());
    CHECK(d.relay_frame() == relay::idle());
    CHECK(d.handle(proto::StimOnce{}) == Command{proto::Nak{proto::Opcode::StimOnce, proto::NakReason::LockedOut}});
    CHECK(d.handle(proto::Arm{}) == Command{proto::Nak{proto::Opcode::Arm, proto::NakReason::LockedOut}});
    CHECK(d.status_frame().state == proto::DeviceState::Lockout);
    CHECK(d.handle(proto::ResetLockout{}) == Command{proto::Ack{proto::Opcode::ResetLockout}});
    CHECK(d.safety_state() == safety::SafetyState::disarmed());
}

TEST_CASE("open circuit faults, stops playback and recovers") {
    auto d = armed_device();
    d.set_resistance(5, 800.0);
    d.handle(proto::StimOnce{});
    d.step(10.0);
    CHECK(d.safety_state().kind == safety::StateKind::Fault);
    CHECK_FALSE(d.playing());
    REQUIRE(d.played().size() == 1);
    CHECK_FALSE(d.played()[0].completed);
    d.set_resistance(5, 72.3);
    d.step(2.0);
    CHECK(d.safety_state() == safety::SafetyState::armed());
}

TEST_CASE("relay log never switches between two routes without idle") {
    auto d = armed_device(8, 2000);
    d.handle(proto::StimTrain{3, 20});
    d.run_until_idle();
    const auto& log = d.frame_log();
    REQUIRE(log.size() > 3);
    std::vector<relay::RelayFrame> seq;
    for (std::size_t i = 1; i < log.size(); ++i) seq.push_back(log[i].frame);
    CHECK(relay::break_before_make(log[0].frame, seq));
    for (const auto& c : log) CHECK(relay::validate(c.frame).ok());
    CHECK(log.back().frame == relay::idle());
    CHECK(d.played().size() == 3);
    CHECK(d.played()[1].start_ms == 65.0);
    CHECK(d.accumulated_charge(8) == 0.0);
}

TEST_CASE("byte link replies with frames and counts decode errors") {
    Device d;
    auto in = frames({proto::SetChannel{5}, proto::QueryStatus{}});
    in.insert(in.begin() + 2, 0x00);  // corrupt the first frame's length byte
    const auto out = d.receive(in);
    proto::StreamDecoder dec;
    dec.feed(out);
    const auto replies = dec.drain();
    REQUIRE(replies.size() == 1);
    CHECK(std::holds_alternative<proto::Status>(std::get<Command>(replies[0])));
    CHECK(d.decode_errors() == 1);
    CHECK(d.status().channel == 0);
}

TEST_CASE("simulation is deterministic for a given seed") {
    auto run = [] {
        DeviceConfig cfg;
        cfg.resistance_noise_kohm = 3.0;
        cfg.seed = 77;
        auto d = armed_device(5, 1500, cfg);
        std::vector<safety::LoadMeasurement> ms;
        d.handle(proto::StimTrain{4, 50});
        d.run_until_idle(600000.0, &ms);
        return ms;
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].voltage == b[i].voltage);
        CHECK(a[i].current == b[i].current);
    }
}

TEST_CASE("ledger equals the sum of played charges") {
    auto d = armed_device(5, 1000);
    d.play(5, stim::synth_monophasic(1.0, 5.0));
    d.run_until_idle();
    d.handle(proto::StimTrain{5, 10});
    d.run_until_idle();
    d.play(5, stim::synth_stimulus(stim::PulseSpec::unbalanced(1.0, 0.25)));
    d.run_until_idle();
    double sum = 0.0;
    for (const auto& p : d.played()) sum += p.net_charge_uc;
    CHECK(d.accumulated_charge(5) == sum);
    CHECK(sum == doctest::Approx(0.0));  // -5 from the monophasic pulse, +5 from the unbalanced one
}

TEST_CASE("vibrotactile baseline") {
    const auto e = vibrotactile_baseline();
    REQUIRE(e.has_value());
    CHECK(e->duration_ms == 25.0);
    CHECK(e->frequency_hz == 80.0);
    CHECK(e->locus == "wrist");
    CHECK_FALSE(vibrotactile_baseline(0.0).has_value());

    Device d;
    CHECK(d.handle(proto::Vibrate{25, 80}) == Command{proto::Ack{proto::Opcode::Vibrate}});
    CHECK(d.handle(proto::Vibrate{0, 80}) == Command{proto::Ack{proto::Opcode::Vibrate}});
    REQUIRE(d.vibrations().size() == 1);
    CHECK(d.vibrations()[0].duration_ms == 25.0);
}

TEST_CASE("stop aborts a train") {
    auto d = armed_device();
    d.handle(proto::StimTrain{10, 1000});
    d.step(1100.0);
    CHECK(d.handle(proto::Stop{}) == Command{proto::Ack{proto::Opcode::Stop}});
    CHECK_FALSE(d.playing());
    CHECK(d.played().size() == 2);
    CHECK(d.safety_state() == safety::SafetyState::armed());
    CHECK_THROWS_AS(d.accumulated_charge(0), Error);
}
