#pragma once

// Study sessions against simulated participants, and the trial log format.
//
// Log format (JSON lines). First line:
//   {"type":"header","schema":"etw-trial-log","version":1,"study":"study1","handmap":{"version":1,"width":48,"height":72}}
// Then one line per trial:
//   {"type":"trial","participant":"P01","study":"study1","trial":0,"seed":...,
//    "status":"ok"|"aborted"|"calibration-failed",
//    "condition":{"channel":7,"intensity_ma":0.9,"policy":"electro",
//                 "visual":null|{"size":"finger","opacity":"full"},"target":null|"thumb"},
//    "calibration_steps":9,
//    "report":null|{"mask":"<hex>","strongest":[x,y],"quality":"tapping"},
//    "t_start_ms":..., "t_stim_ms":..., "t_end_ms":...}

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etw/calibration.hpp"
#include "etw/device.hpp"
#include "etw/perceiver.hpp"
#include "etw/renderer.hpp"
#include "etw/visual.hpp"

namespace etw {

enum class StudyKind { Study1, Study2 };
const char* study_name(StudyKind k);
StudyKind study_from_name(const std::string& name);

enum class TrialStatus { Ok, Aborted, CalibrationFailed };
const char* trial_status_name(TrialStatus s);

struct TrialCondition {
    int channel = 0;
    double intensity_ma = 0.0;
    DevicePolicy policy = DevicePolicy::Electro;
    std::optional<VisualSize> size;     // study2 only
    std::optional<Opacity> opacity;     // study2 only
    std::optional<Finger> target;       // study2 only

    std::optional<VisualEffect> visual() const;
    friend bool operator==(const TrialCondition&, const TrialCondition&) = default;
};

struct TrialRecord {
    std::string participant;
    StudyKind study = StudyKind::Study1;
    int trial = 0;
    std::uint64_t seed = 0;
    TrialStatus status = TrialStatus::Ok;
    TrialCondition condition;
    int calibration_steps = 0;
    std::optional<SensationReport> report;
    double t_start_ms = 0.0;
    double t_stim_ms = 0.0;
    double t_end_ms = 0.0;

    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

inline constexpr const char* kTrialLogSchema = "etw-trial-log";
inline constexpr int kTrialLogVersion = 1;

std::string trial_to_json(const TrialRecord& r);
TrialRecord trial_from_json(const std::string& line, const HandMap& map);  // throws Parse

void write_log_header(std::ostream& out, StudyKind kind, const HandMap& map);
void write_trial_log(std::ostream& out, StudyKind kind, const std::vector<TrialRecord>& records, const HandMap& map);

struct TrialLog {
    StudyKind study = StudyKind::Study1;
    std::vector<TrialRecord> records;
};

// Throws Parse naming the offending line for schema mismatches and for an empty log.
TrialLog read_trial_log(std::istream& in, const HandMap& map);

struct StudyConfig {
    std::uint64_t seed = 1;
    int participants = 12;
    double wait_min_ms = 1000.0;
    double wait_max_ms = 3000.0;
    int train_count = 10;
    double train_gap_ms = 1000.0;
    DevicePolicy policy = DevicePolicy::Electro;
    CalibrationMode calibration_mode = CalibrationMode::Study1;
    PerceiverConfig perceiver = PerceiverConfig::defaults();
    device::DeviceConfig device;
    // Test hook: inject an over-current measurement during this (global) trial index.
    std::optional<int> inject_lockout_at;

    void check() const;  // throws Argument
};

std::string participant_id(int index);  // P01, P02, ...
std::uint64_t participant_seed(std::uint64_t study_seed, int index);

// Per-finger channel and intensity a participant ends study1 with: the channel
// with the highest mean in-finger rate (ties: lower channel), at the highest
// intensity calibrated for it.
CalibrationTable calibrated_channels(const std::vector<TrialRecord>& study1, const HandMap& map);

// One participant wearing one simulated device for both studies.
class StudySession {
public:
    StudySession(std::string participant, std::uint64_t seed, const StudyConfig& config, const HandMap& map);

    const Perceiver& perceiver() const noexcept { return perceiver_; }
    device::Device& device() noexcept { return device_; }
    bool aborted() const noexcept { return aborted_; }

    // 11 channels x 2 repetitions, per-trial calibration.
    std::vector<TrialRecord> run_study1();
    // 3 sizes x 2 opacities x 2 fingers x 2 repetitions on the calibrated channels.
    std::vector<TrialRecord> run_study2(const CalibrationTable& calibration);

private:
    TrialRecord deliver(TrialRecord r);
    void finish();

    std::string participant_;
    std::uint64_t seed_;
    const StudyConfig* config_;
    const HandMap* map_;
    Perceiver perceiver_;
    device::Device device_;
    Rng rng_;
    bool aborted_ = false;
    int global_trial_ = 0;
};

struct StudyRun {
    std::vector<TrialRecord> records;
    bool aborted = false;
    std::string abort_reason;
};

// Runs every participant. Study2 first runs study1 (unlogged) to obtain each
// participant's calibrated channels, mirroring a continuous session.
StudyRun run_study_protocol(StudyKind kind, const StudyConfig& config, const HandMap& map);

// Both studies for every participant.
struct FullRun {
    std::vector<TrialRecord> study1;
    std::vector<TrialRecord> study2;
    bool aborted = false;
    std::string abort_reason;
};
FullRun run_full_pipeline(const StudyConfig& config, const HandMap& map);

}  // namespace etw
