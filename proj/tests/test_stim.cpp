#include <doctest.h>

#include <sstream>

#include "etw/error.hpp"
#include "etw/rng.hpp"
#include "etw/stim.hpp"
#include "etw/waveform_io.hpp"

using namespace etw;
using namespace etw::stim;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an etw::Error");
    return ErrorCode::Argument;
}

}  // namespace

TEST_CASE("default stimulus: 400 priming samples then 50 stimulation samples") {
    const auto w = synth_stimulus(PulseSpec::balanced(1.6), 10000.0);
    REQUIRE(w.size() == 450);
    for (std::size_t i = 0; i < 400; ++i) CHECK(w.samples()[i] == 0.2);
    for (std::size_t i = 400; i < 450; ++i) CHECK(w.samples()[i] == -1.6);
    CHECK(w.duration_ms() == 45.0);
}

TEST_CASE("priming amplitude is one eighth of the stimulation amplitude") {
    const auto spec = PulseSpec::balanced(0.65);
    CHECK(spec.priming_amplitude() == 0.08125);
    CHECK(spec.priming_ratio() == 0.125);
    CHECK(spec.total_duration() == 45.0);
}

TEST_CASE("amplitude and sample rate validation") {
    CHECK(code_of([] { PulseSpec::balanced(4.1); }) == ErrorCode::Range);
    CHECK(code_of([] { PulseSpec::balanced(0.0); }) == ErrorCode::Range);
    CHECK(code_of([] { PulseSpec::balanced(-1.0); }) == ErrorCode::Range);
    CHECK_NOTHROW(PulseSpec::balanced(4.0));
    CHECK(code_of([] { synth_stimulus(PulseSpec::balanced(1.0), 800.0); }) == ErrorCode::Resolution);
    CHECK(code_of([] { synth_stimulus(PulseSpec::balanced(1.0), 10100.0); }) == ErrorCode::Resolution);
    CHECK_NOTHROW(synth_stimulus(PulseSpec::balanced(1.0), 1000.0));
    CHECK(code_of([] { synth_monophasic(4.5, 5.0); }) == ErrorCode::Range);
    // 3:1 width ratio cannot be balanced exactly
    CHECK(code_of([] { PulseSpec::balanced(1.0, Polarity::Cathodic, 5.0, 15.0); }) == ErrorCode::Argument);
}

TEST_CASE("anodic polarity flips both phases") {
    const auto w = synth_stimulus(PulseSpec::balanced(2.0, Polarity::Anodic), 10000.0);
    CHECK(w.samples().front() == -0.25);
    CHECK(w.samples().back() == 2.0);
    CHECK(net_charge(w) == 0.0);
}

TEST_CASE("interphase gap inserts zero samples and keeps balance") {
    const auto spec = PulseSpec::balanced(1.0, Polarity::Cathodic, 5.0, 40.0, 2.0);
    const auto w = synth_stimulus(spec, 10000.0);
    CHECK(w.size() == 470);
    CHECK(w.samples()[400] == 0.0);
    CHECK(w.samples()[419] == 0.0);
    CHECK(net_charge(w) == 0.0);
}

TEST_CASE("monophasic pulses") {
    const auto w = synth_monophasic(1.0, 5.0, 10000.0);
    REQUIRE(w.size() == 50);
    for (double s : w.samples()) CHECK(s == -1.0);
    CHECK(net_charge(w) == -5.0);
    CHECK(net_charge(synth_monophasic(2.0, 5.0)) == -10.0);

    const auto zero = synth_monophasic(0.0, 5.0, 10000.0);
    CHECK(zero.size() == 50);
    for (double s : zero.samples()) CHECK(s == 0.0);
    CHECK(net_charge(zero) == 0.0);
}

TEST_CASE("unbalanced spec leaves +5*I microcoulombs") {
    // hand arithmetic: 40 ms * (I/4) - 5 ms * I = 5 I
    for (double amp : {0.5, 1.0, 1.6, 3.2}) {
        const auto spec = PulseSpec::unbalanced(amp, 0.25);
        CHECK_FALSE(spec.charge_balanced());
        CHECK(net_charge(synth_stimulus(spec)) == doctest::Approx(5.0 * amp).epsilon(1e-12));
    }
    CHECK(PulseSpec::unbalanced(1.0, 0.125).charge_balanced());
}

TEST_CASE("charge balance property over random specs and admissible rates") {
    Rng rng(20240601);
    for (int i = 0; i < 2000; ++i) {
        const double amp = rng.uniform(0.1, 4.0);
        const double rate = 200.0 * static_cast<double>(rng.uniform_int(5, 250));
        const auto polarity = rng.uniform() < 0.5 ? Polarity::Cathodic : Polarity::Anodic;
        const auto w = synth_stimulus(PulseSpec::balanced(amp, polarity), rate);
        REQUIRE(net_charge(w) == 0.0);
        // duration identity: samples / rate == 45 ms
        REQUIRE(w.size() == static_cast<std::size_t>(45.0 * rate / 1000.0));
        REQUIRE(w.peak_abs() <= kHardwareCapMa);
        // priming precedes stimulation
        REQUIRE(w.samples().front() * w.samples().back() < 0.0);
    }
}

TEST_CASE("train schedule") {
    const StimulusTrain train(PulseSpec::balanced(1.0), 10, 1000.0);
    const auto schedule = build_train(train);
    REQUIRE(schedule.size() == 10);
    // k * (45 + 1000)
    const double expected[] = {0, 1045, 2090, 3135, 4180, 5225, 6270, 7315, 8360, 9405};
    for (int k = 0; k < 10; ++k) CHECK(schedule[k].start_ms == expected[k]);
    CHECK(schedule.back().start_ms + schedule.back().waveform.duration_ms() == 9450.0);
    CHECK(train.span() == 9450.0);
    for (std::size_t k = 1; k < schedule.size(); ++k)
        CHECK(schedule[k].start_ms >= schedule[k - 1].start_ms + schedule[k - 1].waveform.duration_ms());

    const auto single = build_train(StimulusTrain(PulseSpec::balanced(1.0), 1));
    REQUIRE(single.size() == 1);
    CHECK(single[0].start_ms == 0.0);

    CHECK(code_of([] { StimulusTrain(PulseSpec::balanced(1.0), 0); }) == ErrorCode::Argument);
    CHECK(code_of([] { StimulusTrain(PulseSpec::balanced(1.0), 1, -1.0); }) == ErrorCode::Argument);
}

TEST_CASE("amplitude to control fraction") {
    CHECK(amplitude_to_control(0.0) == 0.0);
    CHECK(amplitude_to_control(4.0) == 1.0);
    CHECK(amplitude_to_control(2.0) == 0.5);
    CHECK(code_of([] { amplitude_to_control(4.01); }) == ErrorCode::Range);
    CHECK(code_of([] { amplitude_to_control(-0.1); }) == ErrorCode::Range);

    const double step = 4.0 / 4095.0;
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double amp = rng.uniform(0.0, 4.0);
        const double back = code_to_amplitude(amplitude_to_code(amp));
        REQUIRE(std::abs(back - amp) <= step);
    }
    CHECK(amplitude_to_code(4.0) == 4095);
    CHECK(amplitude_to_code(0.0) == 0);
}

TEST_CASE("CSV export round-trips and integrates exactly") {
    const auto w = synth_stimulus(PulseSpec::balanced(1.6));
    std::stringstream ss;
    write_csv(ss, w);
    const auto back = read_csv(ss);
    CHECK(back.sample_rate() == 10000.0);
    REQUIRE(back.size() == w.size());
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(back.samples()[i] == w.samples()[i]);
    CHECK(net_charge(back) == 0.0);

    std::stringstream bad("time,current\n0,1\n");
    CHECK(code_of([&] { read_csv(bad); }) == ErrorCode::Parse);
}

TEST_CASE("schedule export has one record per stimulus") {
    std::stringstream ss;
    write_schedule(ss, build_train(StimulusTrain(PulseSpec::balanced(1.0), 3, 100.0)));
    std::string line;
    int n = 0;
    while (std::getline(ss, line)) {
        CHECK(line.find("\"index\":" + std::to_string(n)) != std::string::npos);
        ++n;
    }
    CHECK(n == 3);
}
