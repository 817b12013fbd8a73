#include "etw/stim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "etw/error.hpp"

namespace etw::stim {
namespace {

void check_amplitude(double amplitude_ma, bool allow_zero) {
    const bool low_ok = allow_zero ? amplitude_ma >= 0.0 : amplitude_ma > 0.0;
    if (!std::isfinite(amplitude_ma) || !low_ok || amplitude_ma > kMaxCommandCurrentMa) {
        std::ostringstream os;
        os << "amplitude " << amplitude_ma << " mA outside "
           << (allow_zero ? "[0, " : "(0, ") << kMaxCommandCurrentMa << "] mA";
        fail(ErrorCode::Range, os.str());
    }
}

void check_widths(double stim_width, double priming_width, double gap) {
    if (!(stim_width > 0.0) || !(priming_width > 0.0) || !(gap >= 0.0))
        fail(ErrorCode::Argument, "pulse widths must be positive and the inter-phase gap non-negative");
}

bool is_power_of_two_ratio(double ratio) {
    if (!(ratio >= 1.0) || ratio != std::floor(ratio) || ratio > 1024.0) return false;
    const auto n = static_cast<unsigned>(ratio);
    return (n & (n - 1)) == 0;
}

double sign_of(Polarity p) { return p == Polarity::Cathodic ? -1.0 : 1.0; }

}  // namespace

PulseSpec PulseSpec::balanced(double stim_amplitude_ma, Polarity polarity, double stim_width_ms,
                              double priming_width_ms, double interphase_gap_ms) {
    check_amplitude(stim_amplitude_ma, false);
    check_widths(stim_width_ms, priming_width_ms, interphase_gap_ms);
    if (!is_power_of_two_ratio(priming_width_ms / stim_width_ms))
        fail(ErrorCode::Argument, "balanced spec needs priming_width / stim_width to be a power of two");
    PulseSpec s;
    s.stim_amplitude_ = stim_amplitude_ma;
    s.stim_width_ = stim_width_ms;
    s.priming_width_ = priming_width_ms;
    s.priming_ratio_ = stim_width_ms / priming_width_ms;
    s.interphase_gap_ = interphase_gap_ms;
    s.polarity_ = polarity;
    s.balanced_ = true;
    return s;
}

PulseSpec PulseSpec::unbalanced(double stim_amplitude_ma, double priming_ratio, Polarity polarity,
                                double stim_width_ms, double priming_width_ms,
                                double interphase_gap_ms) {
    check_amplitude(stim_amplitude_ma, false);
    check_widths(stim_width_ms, priming_width_ms, interphase_gap_ms);
    if (!(priming_ratio >= 0.0) || stim_amplitude_ma * priming_ratio > kMaxCommandCurrentMa)
        fail(ErrorCode::Range, "priming amplitude outside [0, 4] mA");
    PulseSpec s;
    s.stim_amplitude_ = stim_amplitude_ma;
    s.stim_width_ = stim_width_ms;
    s.priming_width_ = priming_width_ms;
    s.priming_ratio_ = priming_ratio;
    s.interphase_gap_ = interphase_gap_ms;
    s.polarity_ = polarity;
    s.balanced_ = priming_ratio * priming_width_ms == stim_width_ms;
    return s;
}

WaveformSamples::WaveformSamples(double sample_rate_hz, std::vector<double> samples)
    : sample_rate_(sample_rate_hz), samples_(std::move(samples)) {
    if (!(sample_rate_hz > 0.0)) fail(ErrorCode::Argument, "sample rate must be positive");
    if (peak_abs() > kHardwareCapMa) fail(ErrorCode::Range, "sample exceeds the 4.5 mA hardware cap");
}

double WaveformSamples::peak_abs() const noexcept {
    double peak = 0.0;
    for (double v : samples_) peak = std::max(peak, std::abs(v));
    return peak;
}

StimulusTrain::StimulusTrain(PulseSpec spec, int count, double inter_stimulus_gap_ms)
    : spec_(spec), count_(count), gap_(inter_stimulus_gap_ms) {
    if (count < 1) fail(ErrorCode::Argument, "train count must be >= 1");
    if (!(inter_stimulus_gap_ms >= 0.0)) fail(ErrorCode::Argument, "train gap must be >= 0");
}

void check_sample_rate(double sample_rate_hz) {
    if (!(sample_rate_hz >= kMinSampleRateHz) ||
        std::fmod(sample_rate_hz, kSampleRateQuantumHz) != 0.0) {
        std::ostringstream os;
        os << "sample rate " << sample_rate_hz << " Hz must be >= 1000 Hz and a multiple of 200 Hz";
        fail(ErrorCode::Resolution, os.str());
    }
}

std::size_t samples_for(double width_ms, double sample_rate_hz) {
    const double exact = width_ms * sample_rate_hz / 1000.0;
    const double rounded = std::round(exact);
    if (std::abs(exact - rounded) > 1e-9 * std::max(1.0, exact)) {
        std::ostringstream os;
        os << width_ms << " ms is not a whole number of samples at " << sample_rate_hz << " Hz";
        fail(ErrorCode::Resolution, os.str());
    }
    return static_cast<std::size_t>(rounded);
}

WaveformSamples synth_stimulus(const PulseSpec& spec, double sample_rate_hz) {
    check_sample_rate(sample_rate_hz);
    const std::size_t n_priming = samples_for(spec.priming_width(), sample_rate_hz);
    const std::size_t n_gap = samples_for(spec.interphase_gap(), sample_rate_hz);
    const std::size_t n_stim = samples_for(spec.stim_width(), sample_rate_hz);

    const double stim_value = sign_of(spec.polarity()) * spec.stim_amplitude();
    const double priming_value = -sign_of(spec.polarity()) * spec.priming_amplitude();

    std::vector<double> samples;
    samples.reserve(n_priming + n_gap + n_stim);
    samples.insert(samples.end(), n_priming, priming_value);
    samples.insert(samples.end(), n_gap, 0.0);
    samples.insert(samples.end(), n_stim, stim_value);
    return WaveformSamples(sample_rate_hz, std::move(samples));
}

WaveformSamples synth_monophasic(double amplitude_ma, double width_ms, double sample_rate_hz) {
    check_amplitude(amplitude_ma, true);
    if (!(width_ms > 0.0)) fail(ErrorCode::Argument, "pulse width must be positive");
    check_sample_rate(sample_rate_hz);
    const std::size_t n = samples_for(width_ms, sample_rate_hz);
    // -0.0 would print as "-0" in exports
    const double value = amplitude_ma == 0.0 ? 0.0 : -amplitude_ma;
    return WaveformSamples(sample_rate_hz, std::vector<double>(n, value));
}

double net_charge(std::span<const double> samples, double sample_rate_hz) {
    double total = 0.0;
    std::size_t i = 0;
    while (i < samples.size()) {
        std::size_t j = i + 1;
        while (j < samples.size() && samples[j] == samples[i]) ++j;
        const double run = samples[i] * static_cast<double>(j - i);
        total += run * 1000.0 / sample_rate_hz;
        i = j;
    }
    return total;
}

double net_charge(const WaveformSamples& w) { return net_charge(w.samples(), w.sample_rate()); }

std::vector<ScheduledWaveform> build_train(const StimulusTrain& train, double sample_rate_hz) {
    const WaveformSamples one = synth_stimulus(train.spec(), sample_rate_hz);
    std::vector<ScheduledWaveform> schedule;
    schedule.reserve(static_cast<std::size_t>(train.count()));
    for (int k = 0; k < train.count(); ++k)
        schedule.push_back({k * train.period(), one});
    return schedule;
}

double amplitude_to_control(double amplitude_ma) {
    check_amplitude(amplitude_ma, true);
    return amplitude_ma / kMaxCommandCurrentMa;
}

double control_to_amplitude(double control) {
    if (!(control >= 0.0 && control <= 1.0)) fail(ErrorCode::Range, "control fraction outside [0, 1]");
    return control * kMaxCommandCurrentMa;
}

std::uint16_t amplitude_to_code(double amplitude_ma) {
    constexpr double full_scale = (1 << kControlBits) - 1;
    return static_cast<std::uint16_t>(std::lround(amplitude_to_control(amplitude_ma) * full_scale));
}

double code_to_amplitude(std::uint16_t code) {
    constexpr double full_scale = (1 << kControlBits) - 1;
    if (code > full_scale) fail(ErrorCode::Range, "DAC code exceeds 12 bits");
    return control_to_amplitude(code / full_scale);
}

}  // namespace etw::stim
