#pragma once

// Stimulus waveform synthesis.
//
// Sign convention: samples are signed currents in mA at the stimulation
// electrode. Cathodic current is negative, anodic current positive. A cathodic
// stimulus therefore plays a positive, low-amplitude priming phase followed by
// a short negative stimulation phase.
//
// Charge is reported in microcoulombs (mA x ms).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace etw::stim {

inline constexpr double kMaxCommandCurrentMa = 4.0;  // software / current-source full scale
inline constexpr double kHardwareCapMa = 4.5;        // current-limiting diode
inline constexpr double kDefaultStimWidthMs = 5.0;
inline constexpr double kDefaultPrimingWidthMs = 40.0;
inline constexpr double kDefaultSampleRateHz = 10000.0;
inline constexpr double kMinSampleRateHz = 1000.0;
inline constexpr double kSampleRateQuantumHz = 200.0;
inline constexpr int kControlBits = 12;

enum class Polarity { Cathodic, Anodic };

class PulseSpec {
public:
    // Charge-balanced spec: priming amplitude is stim_amplitude * stim_width / priming_width.
    // The width ratio must be a power of two so the balance is exact in binary floating point.
    static PulseSpec balanced(double stim_amplitude_ma,
                              Polarity polarity = Polarity::Cathodic,
                              double stim_width_ms = kDefaultStimWidthMs,
                              double priming_width_ms = kDefaultPrimingWidthMs,
                              double interphase_gap_ms = 0.0);

    // Deliberately unbalanced spec with an arbitrary priming ratio.
    static PulseSpec unbalanced(double stim_amplitude_ma,
                                double priming_ratio,
                                Polarity polarity = Polarity::Cathodic,
                                double stim_width_ms = kDefaultStimWidthMs,
                                double priming_width_ms = kDefaultPrimingWidthMs,
                                double interphase_gap_ms = 0.0);

    double stim_amplitude() const noexcept { return stim_amplitude_; }
    double stim_width() const noexcept { return stim_width_; }
    double priming_width() const noexcept { return priming_width_; }
    double priming_ratio() const noexcept { return priming_ratio_; }
    double interphase_gap() const noexcept { return interphase_gap_; }
    Polarity polarity() const noexcept { return polarity_; }
    bool charge_balanced() const noexcept { return balanced_; }

    double priming_amplitude() const noexcept { return stim_amplitude_ * priming_ratio_; }
    double total_duration() const noexcept { return priming_width_ + interphase_gap_ + stim_width_; }

private:
    PulseSpec() = default;

    double stim_amplitude_ = 0.0;
    double stim_width_ = kDefaultStimWidthMs;
    double priming_width_ = kDefaultPrimingWidthMs;
    double priming_ratio_ = 0.125;
    double interphase_gap_ = 0.0;
    Polarity polarity_ = Polarity::Cathodic;
    bool balanced_ = true;
};

class WaveformSamples {
public:
    // Throws Range if any |sample| exceeds the hardware cap.
    WaveformSamples(double sample_rate_hz, std::vector<double> samples);

    double sample_rate() const noexcept { return sample_rate_; }
    std::span<const double> samples() const noexcept { return samples_; }
    std::size_t size() const noexcept { return samples_.size(); }
    double duration_ms() const noexcept { return static_cast<double>(samples_.size()) * 1000.0 / sample_rate_; }
    double peak_abs() const noexcept;

private:
    double sample_rate_;
    std::vector<double> samples_;
};

class StimulusTrain {
public:
    StimulusTrain(PulseSpec spec, int count, double inter_stimulus_gap_ms = 1000.0);

    const PulseSpec& spec() const noexcept { return spec_; }
    int count() const noexcept { return count_; }
    double gap() const noexcept { return gap_; }
    double period() const noexcept { return spec_.total_duration() + gap_; }
    // From the first stimulus onset to the end of the last stimulus.
    double span() const noexcept { return count_ * spec_.total_duration() + (count_ - 1) * gap_; }

private:
    PulseSpec spec_;
    int count_;
    double gap_;
};

struct ScheduledWaveform {
    double start_ms;
    WaveformSamples waveform;
};

// Number of samples covering `width_ms` at `sample_rate_hz`; throws Resolution
// when the width is not an integer number of samples.
std::size_t samples_for(double width_ms, double sample_rate_hz);

// Throws Resolution unless the rate is >= 1 kHz and a multiple of 200 Hz.
void check_sample_rate(double sample_rate_hz);

WaveformSamples synth_stimulus(const PulseSpec& spec, double sample_rate_hz = kDefaultSampleRateHz);

WaveformSamples synth_monophasic(double amplitude_ma, double width_ms,
                                 double sample_rate_hz = kDefaultSampleRateHz);

// Sum of sample * dt in microcoulombs. Equal-valued runs are integrated as
// value * count, which keeps rectangular waveforms exact.
double net_charge(const WaveformSamples& w);
double net_charge(std::span<const double> samples, double sample_rate_hz);

std::vector<ScheduledWaveform> build_train(const StimulusTrain& train,
                                           double sample_rate_hz = kDefaultSampleRateHz);

// Linear map of [0, 4] mA onto the current-source control range [0, 1].
double amplitude_to_control(double amplitude_ma);
double control_to_amplitude(double control);

// 12-bit DAC code for an amplitude and back.
std::uint16_t amplitude_to_code(double amplitude_ma);
double code_to_amplitude(std::uint16_t code);

}  // namespace etw::stim
