#include "etw/console.hpp"

#include <cctype>
#include <cmath>

#include <nlohmann/json.hpp>

#include "etw/error.hpp"

namespace etw::console {

using ojson = nlohmann::ordered_json;

namespace {

const char* opcode_label(proto::Opcode op) {
    switch (op) {
    case proto::Opcode::SetChannel: return "SET_CHANNEL";
    case proto::Opcode::SetIntensity: return "SET_INTENSITY";
    case proto::Opcode::StimOnce: return "STIM_ONCE";
    case proto::Opcode::StimTrain: return "STIM_TRAIN";
    case proto::Opcode::Stop: return "STOP";
    case proto::Opcode::QueryStatus: return "QUERY_STATUS";
    case proto::Opcode::ResetLockout: return "RESET_LOCKOUT";
    case proto::Opcode::Arm: return "ARM";
    case proto::Opcode::Disarm: return "DISARM";
    case proto::Opcode::Vibrate: return "VIBRATE";
    case proto::Opcode::Status: return "STATUS";
    case proto::Opcode::Ack: return "ACK";
    case proto::Opcode::Nak: return "NAK";
    }
    return "?";
}

const char* nak_label(proto::NakReason r) {
    switch (r) {
    case proto::NakReason::NotArmed: return "not-armed";
    case proto::NakReason::OverLimit: return "over-limit";
    case proto::NakReason::NonPositive: return "non-positive";
    case proto::NakReason::NoChannel: return "no-channel";
    case proto::NakReason::Busy: return "busy";
    case proto::NakReason::LockedOut: return "locked-out";
    case proto::NakReason::BadArgument: return "bad-argument";
    }
    return "?";
}

const char* device_state_label(proto::DeviceState s) {
    switch (s) {
    case proto::DeviceState::Disarmed: return "disarmed";
    case proto::DeviceState::Armed: return "armed";
    case proto::DeviceState::Stimulating: return "stimulating";
    case proto::DeviceState::FaultOpenCircuit: return "fault-open-circuit";
    case proto::DeviceState::FaultShort: return "fault-short";
    case proto::DeviceState::Lockout: return "lockout";
    }
    return "?";
}

std::vector<std::uint8_t> parse_hex_bytes(const std::string& text) {
    std::string digits;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        if (!std::isxdigit(static_cast<unsigned char>(c))) fail(ErrorCode::Parse, "bad hex digit in frame");
        digits += c;
    }
    if (digits.size() % 2) fail(ErrorCode::Parse, "odd number of hex digits");
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i < digits.size(); i += 2)
        out.push_back(static_cast<std::uint8_t>(std::stoi(digits.substr(i, 2), nullptr, 16)));
    return out;
}

template <class T>
T uint_arg(const ojson& j, const char* key, T max) {
    if (!j.contains(key) || !j.at(key).is_number_integer()) fail(ErrorCode::Argument, std::string("missing integer '") + key + "'");
    const auto v = j.at(key).get<std::int64_t>();
    if (v < 0 || v > static_cast<std::int64_t>(max)) fail(ErrorCode::Argument, std::string("'") + key + "' out of range");
    return static_cast<T>(v);
}

ojson reply_for(const proto::Command& r) {
    if (const auto* a = std::get_if<proto::Ack>(&r)) return {{"type", "ACK"}, {"opcode", opcode_label(a->opcode)}};
    if (const auto* n = std::get_if<proto::Nak>(&r))
        return {{"type", "NAK"}, {"opcode", opcode_label(n->opcode)}, {"reason", nak_label(n->reason)}};
    if (const auto* s = std::get_if<proto::Status>(&r))
        return {{"type", "STATUS_FRAME"},
                {"state", device_state_label(s->state)},
                {"resistance_dohm", s->resistance_dohm},
                {"intensity_ua", s->intensity_ua}};
    return {{"type", "REPLY"}, {"frame", proto::describe(r)}};
}

}  // namespace

struct ConsoleSession::Request {
    ojson body;
    std::string verb;
    ojson id;
};

ConsoleSession::ConsoleSession(SessionConfig config, const HandMap& map)
    : config_(std::move(config)), map_(&map), device_(config_.device) {}

proto::Command ConsoleSession::send(const proto::Command& c) {
    sent_.push_back(c);
    return device_.handle(c);
}

bool ConsoleSession::locked_out() const { return device_.safety_state().kind == safety::StateKind::Lockout; }

std::string ConsoleSession::handle_line(const std::string& line) {
    Request req;
    try {
        req.body = ojson::parse(line);
        if (!req.body.is_object()) fail(ErrorCode::Parse, "request must be a JSON object");
        if (req.body.contains("id")) req.id = req.body.at("id");
        if (!req.body.contains("verb") || !req.body.at("verb").is_string())
            fail(ErrorCode::Parse, "request needs a string 'verb'");
        req.verb = req.body.at("verb").get<std::string>();
    } catch (const ojson::exception& e) {
        ojson err = {{"ok", false}, {"type", "ERROR"}, {"code", to_string(ErrorCode::Parse)}, {"message", e.what()}};
        return err.dump();
    } catch (const Error& e) {
        ojson err = {{"ok", false}, {"type", "ERROR"}, {"code", to_string(e.code())}, {"message", e.what()}};
        if (!req.id.is_null()) err["id"] = req.id;
        return err.dump();
    }

    const std::string key = req.id.is_null() ? std::string() : req.id.dump();
    if (!key.empty()) {
        const auto it = replies_.find(key);
        if (it != replies_.end()) return it->second;
    }

    std::string reply;
    try {
        reply = dispatch(req);
    } catch (const Error& e) {
        ojson err;
        if (!req.id.is_null()) err["id"] = req.id;
        err["ok"] = false;
        err["type"] = "ERROR";
        err["code"] = to_string(e.code());
        err["message"] = e.what();
        reply = err.dump();
    } catch (const ojson::exception& e) {
        ojson err;
        if (!req.id.is_null()) err["id"] = req.id;
        err["ok"] = false;
        err["type"] = "ERROR";
        err["code"] = to_string(ErrorCode::Parse);
        err["message"] = e.what();
        reply = err.dump();
    }

    if (!key.empty()) {
        replies_[key] = reply;
        reply_order_.push_back(key);
        if (reply_order_.size() > kIdCacheSize) {
            replies_.erase(reply_order_.front());
            reply_order_.pop_front();
        }
    }
    return reply;
}

namespace {

std::string finish(const ojson& id, ojson body) {
    ojson out;
    if (!id.is_null()) out["id"] = id;
    out["ok"] = true;
    for (auto& [k, v] : body.items()) out[k] = v;
    return out.dump();
}

}  // namespace

std::string ConsoleSession::dispatch(const Request& req) {
    const auto& v = req.verb;
    if (v == "STATUS") return status_reply(req);
    if (v == "CAL_START") return cal_start(req);
    if (v == "CAL_STEP") return cal_step(req);
    if (v == "CAL_SWITCH") return cal_switch(req);
    if (v == "CAL_CONFIRM") return cal_confirm(req);
    if (v == "CAL_ABORT") return cal_abort(req);
    if (v == "START_TRIAL") return start_trial(req);
    if (v == "SUBMIT_REPORT") return submit_report(req);
    if (v == "GET_SESSION") return get_session(req);
    if (v == "FRAME") {
        const auto bytes = parse_hex_bytes(req.body.at("hex").get<std::string>());
        const auto out = device_.receive(bytes);
        return finish(req.id, {{"type", "FRAMES"}, {"hex", proto::to_hex_line(out)}});
    }
    return wire(req);
}

std::string ConsoleSession::wire(const Request& req) {
    const auto& v = req.verb;
    const auto& b = req.body;
    proto::Command c;
    if (v == "SET_CHANNEL") c = proto::SetChannel{uint_arg<std::uint8_t>(b, "channel", 255)};
    else if (v == "SET_INTENSITY") c = proto::SetIntensity{uint_arg<std::uint16_t>(b, "microamps", 65535)};
    else if (v == "STIM_ONCE") c = proto::StimOnce{};
    else if (v == "STIM_TRAIN")
        c = proto::StimTrain{uint_arg<std::uint16_t>(b, "count", 65535), uint_arg<std::uint16_t>(b, "gap_ms", 65535)};
    else if (v == "STOP") c = proto::Stop{};
    else if (v == "QUERY_STATUS") c = proto::QueryStatus{};
    else if (v == "RESET_LOCKOUT") c = proto::ResetLockout{};
    else if (v == "ARM") c = proto::Arm{};
    else if (v == "DISARM") c = proto::Disarm{};
    else if (v == "VIBRATE")
        c = proto::Vibrate{uint_arg<std::uint16_t>(b, "duration_ms", 65535),
                           uint_arg<std::uint16_t>(b, "frequency_hz", 65535)};
    else fail(ErrorCode::Argument, "unknown verb '" + v + "'");

    const auto r = send(c);
    if (v == "STIM_ONCE" || v == "STIM_TRAIN" || v == "VIBRATE") device_.run_until_idle();
    return finish(req.id, reply_for(r));
}

std::string ConsoleSession::status_reply(const Request& req) const {
    const auto s = device_.status();
    ojson j;
    j["type"] = "STATUS";
    j["state"] = s.state.name();
    j["t_ms"] = device_.now_ms();
    j["channel"] = s.channel;
    j["intensity_ua"] = s.intensity_ua;
    j["resistance_kohm"] = s.resistance_kohm ? ojson(*s.resistance_kohm) : ojson(nullptr);
    j["playing"] = s.playing;
    j["relay_frame"] = relay::to_hex(device_.relay_frame());
    j["awaiting_report"] = pending_.has_value();
    j["trials"] = records_.size();
    if (stepper_)
        j["calibration"] = {{"finger", finger_name(stepper_->target())},
                            {"channel", stepper_->channel()},
                            {"intensity_ua", stepper_->intensity_ua()},
                            {"state", calibration_state_name(stepper_->state())}};
    else
        j["calibration"] = nullptr;
    return finish(req.id, j);
}

std::string ConsoleSession::cal_reply(const Request& req) const {
    ojson j;
    j["type"] = "CAL";
    j["finger"] = finger_name(stepper_->target());
    j["channel"] = stepper_->channel();
    j["intensity_ua"] = stepper_->intensity_ua();
    j["steps"] = stepper_->steps();
    j["total_steps"] = stepper_->total_steps();
    j["state"] = calibration_state_name(stepper_->state());
    j["stepping_enabled"] = stepper_->state() == CalibrationStepper::State::Stepping && !locked_out();
    return finish(req.id, j);
}

std::string ConsoleSession::cal_start(const Request& req) {
    if (stepper_ && stepper_->state() == CalibrationStepper::State::Stepping)
        fail(ErrorCode::State, "a calibration is already running");
    if (pending_) fail(ErrorCode::State, "a trial is waiting for its report");
    if (locked_out()) fail(ErrorCode::Lockout, "device is locked out");
    if (device_.safety_state().kind != safety::StateKind::Armed) fail(ErrorCode::State, "device is not armed");
    const Finger f = finger_from_name(req.body.at("finger").get<std::string>());
    const int ch = uint_arg<int>(req.body, "channel", 15);
    if (ch < 1) fail(ErrorCode::Argument, "channel must be 1..15");
    CalibrationMode mode = config_.calibration_mode;
    if (req.body.contains("mode")) {
        const auto m = req.body.at("mode").get<std::string>();
        if (m == "study1") mode = CalibrationMode::Study1;
        else if (m == "study3") mode = CalibrationMode::Study3;
        else fail(ErrorCode::Argument, "mode must be study1 or study3");
    }
    const auto r = send(proto::SetChannel{static_cast<std::uint8_t>(ch)});
    if (std::holds_alternative<proto::Nak>(r)) fail(ErrorCode::State, "device refused SET_CHANNEL");
    stepper_.emplace(f, ch, mode);
    return cal_reply(req);
}

std::string ConsoleSession::cal_step(const Request& req) {
    if (!stepper_) fail(ErrorCode::State, "no calibration running");
    if (locked_out()) fail(ErrorCode::Lockout, "device is locked out; stepping disabled");
    const int ua = stepper_->step();
    const auto r1 = send(proto::SetIntensity{static_cast<std::uint16_t>(ua)});
    const auto r2 = send(proto::StimOnce{});
    device_.run_until_idle();
    if (locked_out()) fail(ErrorCode::Lockout, "device locked out during the step; stepping disabled");
    if (std::holds_alternative<proto::Nak>(r1) || std::holds_alternative<proto::Nak>(r2))
        fail(ErrorCode::State, "device refused the step");
    return cal_reply(req);
}

std::string ConsoleSession::cal_switch(const Request& req) {
    if (!stepper_) fail(ErrorCode::State, "no calibration running");
    if (locked_out()) fail(ErrorCode::Lockout, "device is locked out");
    const int ch = uint_arg<int>(req.body, "channel", 15);
    if (ch < 1) fail(ErrorCode::Argument, "channel must be 1..15");
    stepper_->switch_channel(ch);
    send(proto::SetChannel{static_cast<std::uint8_t>(ch)});
    return cal_reply(req);
}

std::string ConsoleSession::cal_confirm(const Request& req) {
    if (!stepper_) fail(ErrorCode::State, "no calibration running");
    const auto result = stepper_->confirm();
    calibration_[result.finger] = result;
    return cal_reply(req);
}

std::string ConsoleSession::cal_abort(const Request& req) {
    if (!stepper_) fail(ErrorCode::State, "no calibration running");
    stepper_->abort();
    send(proto::Stop{});
    device_.run_until_idle();
    return cal_reply(req);
}

std::string ConsoleSession::start_trial(const Request& req) {
    if (pending_) fail(ErrorCode::State, "previous trial is still waiting for its report");
    if (locked_out()) fail(ErrorCode::Lockout, "device is locked out");
    if (stepper_ && stepper_->state() == CalibrationStepper::State::Stepping)
        fail(ErrorCode::State, "finish the calibration first");
    const auto& b = req.body;

    TrialRecord r;
    r.participant = config_.participant;
    r.trial = next_trial_;
    r.seed = Rng::mix(config_.seed, static_cast<std::uint64_t>(next_trial_));
    r.condition.policy = config_.policy;
    if (b.contains("target")) r.condition.target = finger_from_name(b.at("target").get<std::string>());
    if (b.contains("size")) r.condition.size = visual_size_from_name(b.at("size").get<std::string>());
    if (b.contains("opacity")) r.condition.opacity = opacity_from_name(b.at("opacity").get<std::string>());
    if (r.condition.size.has_value() != r.condition.opacity.has_value())
        fail(ErrorCode::Argument, "size and opacity go together");
    if (r.condition.size && !r.condition.target) fail(ErrorCode::Argument, "a visual needs a target finger");
    if (r.condition.target && !r.condition.size) fail(ErrorCode::Argument, "a target finger needs a visual");
    r.study = r.condition.size ? StudyKind::Study2 : StudyKind::Study1;

    if (b.contains("channel")) {
        r.condition.channel = uint_arg<int>(b, "channel", 15);
        if (r.condition.channel < 1) fail(ErrorCode::Argument, "channel must be 1..15");
        r.condition.intensity_ma = b.value("intensity_ma", 0.0);
    } else if (r.condition.target && calibration_.count(*r.condition.target)) {
        const auto& cal = calibration_.at(*r.condition.target);
        r.condition.channel = cal.channel;
        r.condition.intensity_ma = cal.intensity_ma;
        r.calibration_steps = cal.steps;
    } else {
        fail(ErrorCode::Uncalibrated, "no channel given and no calibration for the target");
    }
    if (config_.policy == DevicePolicy::Electro && !(r.condition.intensity_ma > 0.0 && r.condition.intensity_ma <= 4.0))
        fail(ErrorCode::Argument, "intensity_ma must be in (0, 4]");

    r.t_start_ms = r.t_stim_ms = device_.now_ms();
    bool refused = false;
    if (config_.policy == DevicePolicy::Electro) {
        const auto ua = static_cast<std::uint16_t>(std::lround(r.condition.intensity_ma * 1000.0));
        for (const proto::Command& c :
             {proto::Command{proto::SetChannel{static_cast<std::uint8_t>(r.condition.channel)}},
              proto::Command{proto::SetIntensity{ua}},
              proto::Command{proto::StimTrain{static_cast<std::uint16_t>(config_.train_count),
                                              static_cast<std::uint16_t>(config_.train_gap_ms)}}})
            if (std::holds_alternative<proto::Nak>(send(c))) refused = true;
        device_.run_until_idle();
    } else {
        r.condition.intensity_ma = 0.0;
        for (int i = 0; i < config_.train_count; ++i) {
            send(proto::Vibrate{25, 80});
            device_.step(25.0 + (i + 1 < config_.train_count ? config_.train_gap_ms : 0.0));
        }
    }
    r.t_end_ms = device_.now_ms();
    ++next_trial_;
    if (refused || locked_out()) {
        r.status = TrialStatus::Aborted;
        records_.push_back(r);
        fail(locked_out() ? ErrorCode::Lockout : ErrorCode::State, "device did not deliver the trial");
    }
    pending_ = r;

    ojson j = ojson::parse(trial_to_json(r));
    j["type"] = "TRIAL";
    return finish(req.id, j);
}

std::string ConsoleSession::submit_report(const Request& req) {
    if (!pending_) fail(ErrorCode::State, "no trial is waiting for a report");
    const auto& b = req.body;
    SensationReport s;
    s.area = Mask::from_hex(map_->width(), map_->height(), b.at("mask").get<std::string>());
    s.strongest = {b.at("strongest").at(0).get<int>(), b.at("strongest").at(1).get<int>()};
    s.quality = quality_from_name(b.at("quality").get<std::string>());
    check_report(s);
    auto r = *pending_;
    r.report = s;
    records_.push_back(r);
    pending_.reset();
    return finish(req.id, {{"type", "RECORDED"}, {"trial", r.trial}});
}

std::string ConsoleSession::get_session(const Request& req) const {
    ojson j;
    j["type"] = "SESSION";
    j["participant"] = config_.participant;
    ojson cal = ojson::object();
    for (const auto& [f, c] : calibration_)
        cal[finger_name(f)] = {{"channel", c.channel}, {"intensity_ma", c.intensity_ma}, {"steps", c.steps}};
    j["calibration"] = cal;
    j["awaiting_report"] = pending_.has_value();
    j["trials"] = ojson::array();
    for (const auto& r : records_) j["trials"].push_back(ojson::parse(trial_to_json(r)));
    return finish(req.id, j);
}

void ConsoleSession::shutdown() {
    if (stepper_ && stepper_->state() == CalibrationStepper::State::Stepping) stepper_->abort();
    send(proto::Stop{});
    device_.run_until_idle();
    send(proto::Disarm{});
}

}  // namespace etw::console
