#pragma once

// Analysis report over study logs: rate tables, heatmaps and statistics.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "etw/analysis.hpp"
#include "etw/study.hpp"

namespace etw::report {

struct ReportOptions {
    bool greenhouse_geisser = false;
    analysis::Variance variance = analysis::Variance::Pooled;
};

struct RateSummary {
    int n = 0;
    double mean = 0.0;  // percent
    double sd = 0.0;
    double strongest_rate = 0.0;  // fraction of reports whose strongest point is in the finger
};

struct ChannelRow {
    int channel = 0;
    int trials = 0;
    int reports = 0;
    double mean_intensity_ma = 0.0;
    double mean_steps = 0.0;
    RateSummary thumb;
    RateSummary index;
};

struct ConditionRow {
    VisualSize size = VisualSize::Finger;
    Opacity opacity = Opacity::Full;
    RateSummary thumb;  // trials targeting the thumb, rated against the thumb
    RateSummary index;
};

struct BaselineTest {
    VisualSize size = VisualSize::Finger;
    Opacity opacity = Opacity::Full;
    analysis::TTest test;  // condition vs no-visual
};

struct FingerStats {
    Finger finger = Finger::Thumb;
    std::optional<analysis::RmAnovaResult> anova;  // A = visual size, B = opacity
    std::string anova_note;                        // why the ANOVA was skipped
    std::optional<RateSummary> baseline;           // no-visual rate on the chosen channel
    std::vector<BaselineTest> vs_baseline;
};

struct NamedHeatmap {
    std::string name;
    analysis::Heatmap heatmap;
};

struct Report {
    int participants = 0;
    int trials = 0;
    int aborted = 0;
    int calibration_failed = 0;
    std::vector<ChannelRow> channels;      // from a study1 log
    std::vector<ConditionRow> conditions;  // from a study2 log, six rows
    std::vector<FingerStats> fingers;      // from a study2 log
    std::vector<NamedHeatmap> heatmaps;
    ReportOptions options;

    std::string to_json() const;
};

// At least one log. Throws Argument when neither log has usable reports.
Report analyze(const std::optional<TrialLog>& study1, const std::optional<TrialLog>& study2, const HandMap& map,
               const ReportOptions& options = {});

// report.json, channels.csv, conditions.csv, anova.csv, ttests.csv, heatmaps/<name>.{csv,svg}
std::vector<std::filesystem::path> write_report(const Report& r, const HandMap& map,
                                                const std::filesystem::path& dir);

std::string channels_csv(const Report& r);
std::string conditions_csv(const Report& r);
std::string anova_csv(const Report& r);
std::string ttests_csv(const Report& r);

}  // namespace etw::report
