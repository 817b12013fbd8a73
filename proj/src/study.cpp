#include "etw/study.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "etw/analysis.hpp"
#include "etw/error.hpp"

namespace etw {

using ojson = nlohmann::ordered_json;

const char* study_name(StudyKind k) { return k == StudyKind::Study1 ? "study1" : "study2"; }

StudyKind study_from_name(const std::string& name) {
    if (name == "study1") return StudyKind::Study1;
    if (name == "study2") return StudyKind::Study2;
    fail(ErrorCode::Parse, "unknown study '" + name + "' (study1|study2)");
}

const char* trial_status_name(TrialStatus s) {
    switch (s) {
    case TrialStatus::Ok: return "ok";
    case TrialStatus::Aborted: return "aborted";
    case TrialStatus::CalibrationFailed: return "calibration-failed";
    }
    return "?";
}

namespace {

TrialStatus trial_status_from_name(const std::string& s) {
    for (auto st : {TrialStatus::Ok, TrialStatus::Aborted, TrialStatus::CalibrationFailed})
        if (s == trial_status_name(st)) return st;
    fail(ErrorCode::Parse, "unknown trial status '" + s + "'");
}

}  // namespace

std::optional<VisualEffect> TrialCondition::visual() const {
    if (!size || !opacity || !target) return std::nullopt;
    return VisualEffect{*size, *opacity, *target};
}

std::string trial_to_json(const TrialRecord& r) {
    ojson cond;
    cond["channel"] = r.condition.channel;
    cond["intensity_ma"] = r.condition.intensity_ma;
    cond["policy"] = policy_name(r.condition.policy);
    if (r.condition.size && r.condition.opacity)
        cond["visual"] = {{"size", visual_size_name(*r.condition.size)}, {"opacity", opacity_name(*r.condition.opacity)}};
    else
        cond["visual"] = nullptr;
    cond["target"] = r.condition.target ? ojson(finger_name(*r.condition.target)) : ojson(nullptr);

    ojson j;
    j["type"] = "trial";
    j["participant"] = r.participant;
    j["study"] = study_name(r.study);
    j["trial"] = r.trial;
    j["seed"] = r.seed;
    j["status"] = trial_status_name(r.status);
    j["condition"] = cond;
    j["calibration_steps"] = r.calibration_steps;
    if (r.report)
        j["report"] = {{"mask", r.report->area.to_hex()},
                       {"strongest", {r.report->strongest.x, r.report->strongest.y}},
                       {"quality", quality_name(r.report->quality)}};
    else
        j["report"] = nullptr;
    j["t_start_ms"] = r.t_start_ms;
    j["t_stim_ms"] = r.t_stim_ms;
    j["t_end_ms"] = r.t_end_ms;
    return j.dump();
}

TrialRecord trial_from_json(const std::string& line, const HandMap& map) {
    try {
        const auto j = ojson::parse(line);
        if (j.at("type").get<std::string>() != "trial") fail(ErrorCode::Parse, "expected a trial record");
        TrialRecord r;
        r.participant = j.at("participant").get<std::string>();
        r.study = study_from_name(j.at("study").get<std::string>());
        r.trial = j.at("trial").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.status = trial_status_from_name(j.at("status").get<std::string>());
        const auto& c = j.at("condition");
        r.condition.channel = c.at("channel").get<int>();
        r.condition.intensity_ma = c.at("intensity_ma").get<double>();
        r.condition.policy = policy_from_name(c.at("policy").get<std::string>());
        if (r.condition.channel < 1 || r.condition.channel > 15) fail(ErrorCode::Parse, "channel outside 1..15");
        if (!(r.condition.intensity_ma >= 0.0 && r.condition.intensity_ma <= 4.0))
            fail(ErrorCode::Parse, "intensity outside 0..4 mA");
        if (!c.at("visual").is_null()) {
            r.condition.size = visual_size_from_name(c.at("visual").at("size").get<std::string>());
            r.condition.opacity = opacity_from_name(c.at("visual").at("opacity").get<std::string>());
        }
        if (!c.at("target").is_null()) r.condition.target = finger_from_name(c.at("target").get<std::string>());
        const bool has_visual = r.condition.size.has_value();
        const bool has_target = r.condition.target.has_value();
        if (r.study == StudyKind::Study1 && (has_visual || has_target))
            fail(ErrorCode::Parse, "study1 trials carry no visual condition");
        if (r.study == StudyKind::Study2 && !(has_visual && has_target))
            fail(ErrorCode::Parse, "study2 trials need a visual condition and a target finger");
        r.calibration_steps = j.at("calibration_steps").get<int>();
        if (!j.at("report").is_null()) {
            const auto& rep = j.at("report");
            SensationReport s;
            s.area = Mask::from_hex(map.width(), map.height(), rep.at("mask").get<std::string>());
            s.strongest = {rep.at("strongest").at(0).get<int>(), rep.at("strongest").at(1).get<int>()};
            s.quality = quality_from_name(rep.at("quality").get<std::string>());
            try {
                check_report(s);
            } catch (const Error& e) {
                fail(ErrorCode::Parse, e.what());
            }
            r.report = s;
        }
        r.t_start_ms = j.at("t_start_ms").get<double>();
        r.t_stim_ms = j.at("t_stim_ms").get<double>();
        r.t_end_ms = j.at("t_end_ms").get<double>();
        return r;
    } catch (const ojson::exception& e) {
        fail(ErrorCode::Parse, e.what());
    }
}

void write_log_header(std::ostream& out, StudyKind kind, const HandMap& map) {
    ojson h;
    h["type"] = "header";
    h["schema"] = kTrialLogSchema;
    h["version"] = kTrialLogVersion;
    h["study"] = study_name(kind);
    h["handmap"] = {{"version", map.version()}, {"width", map.width()}, {"height", map.height()}};
    out << h.dump() << '\n';
}

void write_trial_log(std::ostream& out, StudyKind kind, const std::vector<TrialRecord>& records,
                     const HandMap& map) {
    write_log_header(out, kind, map);
    for (const auto& r : records) out << trial_to_json(r) << '\n';
}

TrialLog read_trial_log(std::istream& in, const HandMap& map) {
    TrialLog log;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        try {
            if (!header) {
                const auto h = ojson::parse(line);
                if (h.value("type", "") != "header" || h.value("schema", "") != kTrialLogSchema)
                    fail(ErrorCode::Parse, "missing etw-trial-log header");
                if (h.value("version", 0) != kTrialLogVersion)
                    fail(ErrorCode::Parse, "unsupported log version " + h.at("version").dump());
                const auto& hm = h.at("handmap");
                if (hm.at("width").get<int>() != map.width() || hm.at("height").get<int>() != map.height())
                    fail(ErrorCode::Parse, "log was written against a different hand map");
                log.study = study_from_name(h.at("study").get<std::string>());
                header = true;
                continue;
            }
            auto r = trial_from_json(line, map);
            if (r.study != log.study) fail(ErrorCode::Parse, "trial study differs from the header");
            log.records.push_back(std::move(r));
        } catch (const Error& e) {
            fail(ErrorCode::Parse, where + e.what());
        } catch (const ojson::exception& e) {
            fail(ErrorCode::Parse, where + e.what());
        }
    }
    if (!header) fail(ErrorCode::Parse, "empty trial log");
    if (log.records.empty()) fail(ErrorCode::Parse, "trial log has no trials");
    return log;
}

void StudyConfig::check() const {
    if (participants < 1) fail(ErrorCode::Argument, "need at least one participant");
    if (!(wait_min_ms >= 0 && wait_max_ms >= wait_min_ms)) fail(ErrorCode::Argument, "bad waiting period bounds");
    if (train_count < 1 || train_count > 65535) fail(ErrorCode::Argument, "train count must be 1..65535");
    if (!(train_gap_ms >= 0 && train_gap_ms <= 65535)) fail(ErrorCode::Argument, "train gap must be 0..65535 ms");
}

std::string participant_id(int index) {
    const std::string n = std::to_string(index + 1);
    return "P" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n;
}

std::uint64_t participant_seed(std::uint64_t study_seed, int index) {
    return Rng::mix(study_seed, static_cast<std::uint64_t>(index));
}

CalibrationTable calibrated_channels(const std::vector<TrialRecord>& study1, const HandMap& map) {
    CalibrationTable table;
    for (Finger f : {Finger::Thumb, Finger::Index}) {
        const Region region = region_of(f);
        std::map<int, std::vector<double>> rates;
        std::map<int, double> intensity;
        for (const auto& r : study1) {
            if (r.status != TrialStatus::Ok || !r.report) continue;
            rates[r.condition.channel].push_back(analysis::in_region_rate(r.report->area, region, map));
            intensity[r.condition.channel] = std::max(intensity[r.condition.channel], r.condition.intensity_ma);
        }
        int best = 0;
        double best_rate = -1.0;
        for (const auto& [ch, v] : rates) {
            const double m = analysis::mean(v);
            if (m > best_rate) {
                best_rate = m;
                best = ch;
            }
        }
        if (best) table[f] = {f, best, intensity[best], 0};
    }
    return table;
}

StudySession::StudySession(std::string participant, std::uint64_t seed, const StudyConfig& config, const HandMap& map)
    : participant_(std::move(participant)), seed_(seed), config_(&config), map_(&map),
      perceiver_(config.perceiver.for_participant(seed), map),
      device_([&] {
          auto d = config.device;
          d.seed = Rng::mix(seed, 3);
          return d;
      }()),
      rng_(Rng::mix(seed, 7)) {
    config.check();
    device_.handle(proto::Arm{});
}

TrialRecord StudySession::deliver(TrialRecord r) {
    const auto& cfg = *config_;
    const double wait = std::round(rng_.uniform(cfg.wait_min_ms, cfg.wait_max_ms));
    if (wait > 0) device_.step(wait);
    r.t_stim_ms = device_.now_ms();
    const std::size_t before = device_.played().size();
    bool refused = false;

    if (r.condition.policy == DevicePolicy::Electro) {
        const auto ua = static_cast<std::uint16_t>(std::lround(r.condition.intensity_ma * 1000.0));
        for (const proto::Command& c :
             {proto::Command{proto::SetChannel{static_cast<std::uint8_t>(r.condition.channel)}},
              proto::Command{proto::SetIntensity{ua}},
              proto::Command{proto::StimTrain{static_cast<std::uint16_t>(cfg.train_count),
                                              static_cast<std::uint16_t>(cfg.train_gap_ms)}}})
            if (std::holds_alternative<proto::Nak>(device_.handle(c))) refused = true;
        if (cfg.inject_lockout_at && *cfg.inject_lockout_at == global_trial_) {
            device_.step(100.0);
            device_.inject_measurement({72.0, 5.0, device_.now_ms()});
        }
        device_.run_until_idle();
    } else {
        for (int i = 0; i < cfg.train_count; ++i) {
            device_.handle(proto::Vibrate{25, 80});
            device_.step(25.0 + (i + 1 < cfg.train_count ? cfg.train_gap_ms : 0.0));
        }
    }
    r.t_end_ms = device_.now_ms();

    bool incomplete = refused;
    for (std::size_t k = before; k < device_.played().size(); ++k)
        if (!device_.played()[k].completed) incomplete = true;
    if (incomplete || device_.safety_state().kind == safety::StateKind::Lockout) {
        r.status = TrialStatus::Aborted;
        aborted_ = true;
    } else if (r.condition.policy == DevicePolicy::Electro) {
        r.report = perceiver_.perceive(r.condition.channel, r.condition.intensity_ma, r.condition.visual(), r.seed);
    } else {
        r.report = perceiver_.perceive_vibration(25.0, r.condition.visual(), r.seed);
    }
    ++global_trial_;
    return r;
}

std::vector<TrialRecord> StudySession::run_study1() {
    std::vector<int> order;
    for (int ch = 5; ch <= 15; ++ch)
        for (int rep = 0; rep < 2; ++rep) order.push_back(ch);
    Rng(Rng::mix(seed_, 1)).shuffle(order);

    std::vector<TrialRecord> out;
    for (std::size_t k = 0; k < order.size() && !aborted_; ++k) {
        TrialRecord r;
        r.participant = participant_;
        r.study = StudyKind::Study1;
        r.trial = static_cast<int>(k);
        r.seed = Rng::mix(seed_, 100 + k);
        r.condition.channel = order[k];
        r.condition.policy = config_->policy;
        r.t_start_ms = device_.now_ms();
        if (config_->policy == DevicePolicy::Electro) {
            const int ch = order[k];
            const auto seed = r.seed;
            try {
                const auto cal = run_calibration(
                    Finger::Thumb, {ch},
                    [&](int c, double ma) { return perceiver_.perceive(c, ma, std::nullopt, seed).has_value(); },
                    config_->calibration_mode, &device_);
                r.condition.intensity_ma = cal.intensity_ma;
                r.calibration_steps = cal.steps;
            } catch (const Error& e) {
                if (e.code() == ErrorCode::CalibrationFailed) {
                    r.status = TrialStatus::CalibrationFailed;
                    r.calibration_steps = CalibrationStepper::kMaxSteps;
                    r.t_stim_ms = r.t_end_ms = device_.now_ms();
                    out.push_back(r);
                    ++global_trial_;
                    continue;
                }
                if (e.code() != ErrorCode::Lockout) throw;
                r.status = TrialStatus::Aborted;
                r.t_stim_ms = r.t_end_ms = device_.now_ms();
                aborted_ = true;
                out.push_back(r);
                break;
            }
        }
        out.push_back(deliver(r));
    }
    return out;
}

std::vector<TrialRecord> StudySession::run_study2(const CalibrationTable& calibration) {
    std::vector<TrialCondition> grid;
    for (auto size : kVisualSizes)
        for (auto op : kOpacities)
            for (auto f : {Finger::Thumb, Finger::Index})
                for (int rep = 0; rep < 2; ++rep) {
                    TrialCondition c;
                    c.size = size;
                    c.opacity = op;
                    c.target = f;
                    c.policy = config_->policy;
                    grid.push_back(c);
                }
    Rng(Rng::mix(seed_, 2)).shuffle(grid);

    std::vector<TrialRecord> out;
    for (std::size_t k = 0; k < grid.size() && !aborted_; ++k) {
        TrialRecord r;
        r.participant = participant_;
        r.study = StudyKind::Study2;
        r.trial = static_cast<int>(k);
        r.seed = Rng::mix(seed_, 200 + k);
        r.condition = grid[k];
        r.t_start_ms = device_.now_ms();
        const auto it = calibration.find(*grid[k].target);
        if (it == calibration.end()) {
            r.status = TrialStatus::CalibrationFailed;
            r.t_stim_ms = r.t_end_ms = r.t_start_ms;
            out.push_back(r);
            continue;
        }
        r.condition.channel = it->second.channel;
        r.condition.intensity_ma = config_->policy == DevicePolicy::Electro ? it->second.intensity_ma : 0.0;
        out.push_back(deliver(r));
    }
    return out;
}

void StudySession::finish() {
    device_.handle(proto::Stop{});
    device_.handle(proto::Disarm{});
}

FullRun run_full_pipeline(const StudyConfig& config, const HandMap& map) {
    config.check();
    FullRun run;
    for (int p = 0; p < config.participants; ++p) {
        StudySession s(participant_id(p), participant_seed(config.seed, p), config, map);
        auto s1 = s.run_study1();
        run.study1.insert(run.study1.end(), s1.begin(), s1.end());
        if (!s.aborted()) {
            auto s2 = s.run_study2(calibrated_channels(s1, map));
            run.study2.insert(run.study2.end(), s2.begin(), s2.end());
        }
        s.device().handle(proto::Stop{});
        s.device().handle(proto::Disarm{});
        if (s.aborted()) {
            run.aborted = true;
            run.abort_reason = participant_id(p) + ": device left the armed state mid-trial (" +
                               s.device().safety_state().name() + ")";
            break;
        }
    }
    return run;
}

StudyRun run_study_protocol(StudyKind kind, const StudyConfig& config, const HandMap& map) {
    config.check();
    StudyRun run;
    if (kind == StudyKind::Study2) {
        auto full = run_full_pipeline(config, map);
        return {std::move(full.study2), full.aborted, full.abort_reason};
    }
    for (int p = 0; p < config.participants; ++p) {
        StudySession s(participant_id(p), participant_seed(config.seed, p), config, map);
        auto s1 = s.run_study1();
        run.records.insert(run.records.end(), s1.begin(), s1.end());
        s.device().handle(proto::Stop{});
        s.device().handle(proto::Disarm{});
        if (s.aborted()) {
            run.aborted = true;
            run.abort_reason = participant_id(p) + ": device left the armed state mid-trial (" +
                               s.device().safety_state().name() + ")";
            break;
        }
    }
    return run;
}

}  // namespace etw
