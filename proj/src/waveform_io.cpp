#include "etw/waveform_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "etw/error.hpp"

namespace etw::stim {

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return std::to_string(v);
    return std::string(buf, end);
}

void write_csv(std::ostream& out, const WaveformSamples& w) {
    out << "time_ms,current_mA\n";
    const auto samples = w.samples();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double t = static_cast<double>(i) * 1000.0 / w.sample_rate();
        out << format_double(t) << ',' << format_double(samples[i]) << '\n';
    }
}

WaveformSamples read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("time_ms,current_mA", 0) != 0)
        fail(ErrorCode::Parse, "waveform CSV: missing time_ms,current_mA header");
    std::vector<double> times;
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        double t = 0.0;
        double v = 0.0;
        const char* begin = line.data();
        const char* end = begin + line.size();
        auto r1 = std::from_chars(begin, begin + (comma == std::string::npos ? 0 : comma), t);
        auto r2 = comma == std::string::npos ? std::from_chars_result{begin, std::errc::invalid_argument}
                                             : std::from_chars(begin + comma + 1, end, v);
        if (comma == std::string::npos || r1.ec != std::errc{} || r2.ec != std::errc{})
            fail(ErrorCode::Parse, "waveform CSV: malformed line " + std::to_string(line_no));
        times.push_back(t);
        values.push_back(v);
    }
    if (times.size() < 2) fail(ErrorCode::Parse, "waveform CSV: need at least two samples");
    const double dt = times[1] - times[0];
    if (!(dt > 0.0)) fail(ErrorCode::Parse, "waveform CSV: non-increasing time column");
    const double rate = std::round(1000.0 / dt);
    return WaveformSamples(rate, std::move(values));
}

void write_svg(std::ostream& out, const std::vector<PlotTrace>& traces, const std::string& title) {
    constexpr double width = 720.0;
    constexpr double height = 360.0;
    constexpr double margin = 48.0;

    double t_max = 1.0;
    double i_max = 0.5;
    for (const auto& tr : traces) {
        t_max = std::max(t_max, tr.waveform->duration_ms());
        i_max = std::max(i_max, tr.waveform->peak_abs());
    }
    i_max *= 1.1;
    const double plot_w = width - 2 * margin;
    const double plot_h = height - 2 * margin;
    auto x_of = [&](double t) { return margin + plot_w * t / t_max; };
    auto y_of = [&](double i) { return margin + plot_h * (0.5 - 0.5 * i / i_max); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title
        << "</text>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << y_of(0) << "\" x2=\"" << width - margin << "\" y2=\""
        << y_of(0) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    out << "<text x=\"4\" y=\"" << y_of(i_max / 1.1) + 4 << "\" font-size=\"10\">+" << format_double(i_max / 1.1)
        << " mA</text>\n";
    out << "<text x=\"" << width - margin << "\" y=\"" << height - 12 << "\" font-size=\"10\">"
        << format_double(t_max) << " ms</text>\n";

    double legend_y = 40;
    for (const auto& tr : traces) {
        const auto s = tr.waveform->samples();
        const double dt = 1000.0 / tr.waveform->sample_rate();
        out << "<polyline fill=\"none\" stroke=\"" << tr.color << "\" stroke-width=\"1.5\" points=\"";
        double prev = 0.0;
        out << x_of(0) << ',' << y_of(0);
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i == 0 || s[i] != prev) {
                out << ' ' << x_of(i * dt) << ',' << y_of(prev) << ' ' << x_of(i * dt) << ',' << y_of(s[i]);
                prev = s[i];
            }
        }
        const double t_end = s.size() * dt;
        out << ' ' << x_of(t_end) << ',' << y_of(prev) << ' ' << x_of(t_end) << ',' << y_of(0) << "\"/>\n";
        out << "<text x=\"" << width - margin - 160 << "\" y=\"" << legend_y << "\" font-size=\"11\" fill=\""
            << tr.color << "\">" << tr.label << "</text>\n";
        legend_y += 14;
    }
    out << "</svg>\n";
}

void write_schedule(std::ostream& out, const std::vector<ScheduledWaveform>& schedule) {
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const auto& e = schedule[k];
        nlohmann::ordered_json rec;
        rec["index"] = k;
        rec["start_ms"] = e.start_ms;
        rec["duration_ms"] = e.waveform.duration_ms();
        rec["samples"] = e.waveform.size();
        rec["net_charge_uC"] = net_charge(e.waveform);
        out << rec.dump() << '\n';
    }
}

}  // namespace etw::stim
