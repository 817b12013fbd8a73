#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "etw/stim.hpp"

namespace etw::stim {

// "time_ms,current_mA" header, one row per sample, shortest round-trip decimals.
void write_csv(std::ostream& out, const WaveformSamples& w);
// Parses write_csv output; the sample rate is recovered from the time column.
WaveformSamples read_csv(std::istream& in);

struct PlotTrace {
    std::string label;
    std::string color;
    const WaveformSamples* waveform;
};

// Step plot of one or more waveforms against a shared time axis.
void write_svg(std::ostream& out, const std::vector<PlotTrace>& traces, const std::string& title);

// One JSON object per line: index, start_ms, duration_ms, samples, net_charge_uC.
void write_schedule(std::ostream& out, const std::vector<ScheduledWaveform>& schedule);

// Shortest decimal that parses back to the same double.
std::string format_double(double v);

}  // namespace etw::stim
