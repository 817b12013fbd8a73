#include "etw/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "etw/error.hpp"
#include "etw/stim.hpp"

namespace etw {

using nlohmann::json;

double distance(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Vec3 HandPose::pinch_point() const {
    return {(thumb_tip.x + index_tip.x) / 2, (thumb_tip.y + index_tip.y) / 2, (thumb_tip.z + index_tip.z) / 2};
}

HandPose HandPose::from_tips(double t_ms, const Vec3& thumb, const Vec3& index) {
    return {t_ms, thumb, index, distance(thumb, index)};
}

const char* element_kind_name(ElementKind k) {
    switch (k) {
    case ElementKind::Button: return "button";
    case ElementKind::Slider: return "slider";
    case ElementKind::Grabbable: return "grabbable";
    }
    return "?";
}

void UIElement::check() const {
    if (id.empty()) fail(ErrorCode::Argument, "UI element needs an id");
    if (!(half_extent.x > 0 && half_extent.y > 0 && half_extent.z > 0))
        fail(ErrorCode::Argument, "UI element '" + id + "' must have positive extents");
    if (kind == ElementKind::Slider) {
        if (detents < 2) fail(ErrorCode::Argument, "slider '" + id + "' needs at least 2 detents");
        if (!(travel_mm > 0)) fail(ErrorCode::Argument, "slider '" + id + "' needs a positive travel");
    }
}

double UIElement::signed_distance(const Vec3& p) const {
    const double qx = std::abs(p.x - center.x) - half_extent.x;
    const double qy = std::abs(p.y - center.y) - half_extent.y;
    const double qz = std::abs(p.z - center.z) - half_extent.z;
    const double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0), oz = std::max(qz, 0.0);
    const double outside = std::sqrt(ox * ox + oy * oy + oz * oz);
    const double inside = std::min(std::max({qx, qy, qz}), 0.0);
    return outside + inside;
}

double UIElement::knob_position(const Vec3& p) const {
    return std::clamp(p.x - center.x, -travel_mm / 2, travel_mm / 2);
}

double UIElement::detent_position(int i) const {
    return -travel_mm / 2 + travel_mm * i / (detents - 1);
}

const char* event_kind_name(EventKind k) {
    switch (k) {
    case EventKind::Contact: return "contact";
    case EventKind::Release: return "release";
    case EventKind::DetentCrossing: return "detent_crossing";
    }
    return "?";
}

const char* effector_name(Effector e) {
    switch (e) {
    case Effector::Thumb: return "thumb";
    case Effector::Index: return "index";
    case Effector::Pinch: return "pinch";
    }
    return "?";
}

ContactDetector::ContactDetector(std::vector<UIElement> elements, DetectorConfig config)
    : elements_(std::move(elements)), config_(config) {
    for (auto& e : elements_) {
        e.check();
        e.state = ElementState::Idle;
    }
    if (!(config_.hysteresis_mm >= 0 && config_.pinch_threshold_mm > 0))
        fail(ErrorCode::Argument, "detector thresholds must be positive");
}

std::optional<std::size_t> ContactDetector::candidate(const Vec3& p, bool (*accepts)(ElementKind)) const {
    std::optional<std::size_t> best;
    double best_d = 0.0;
    for (std::size_t i = 0; i < elements_.size(); ++i) {
        const auto& e = elements_[i];
        if (!accepts(e.kind) || e.state != ElementState::Idle || e.signed_distance(p) > 0.0) continue;
        const double d = distance(p, e.center);
        if (!best || d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

void ContactDetector::release(Effector who, double t, std::vector<ContactEvent>& out) {
    const auto it = holds_.find(who);
    if (it == holds_.end()) return;
    auto& e = elements_[it->second.element];
    e.state = ElementState::Idle;
    out.push_back({EventKind::Release, e.id, who, t});
    holds_.erase(it);
}

void ContactDetector::update_button(Effector who, const Vec3& tip, double t, std::vector<ContactEvent>& out) {
    if (const auto it = holds_.find(who); it != holds_.end()) {
        if (elements_[it->second.element].signed_distance(tip) > config_.hysteresis_mm) release(who, t, out);
        return;
    }
    const auto c = candidate(tip, [](ElementKind k) { return k == ElementKind::Button; });
    if (!c) return;
    elements_[*c].state = ElementState::Contacted;
    holds_[who] = {*c};
    out.push_back({EventKind::Contact, elements_[*c].id, who, t});
}

void ContactDetector::update_pinch(const HandPose& pose, std::vector<ContactEvent>& out) {
    const Vec3 p = pose.pinch_point();
    const double t = pose.timestamp_ms;
    if (const auto it = holds_.find(Effector::Pinch); it != holds_.end()) {
        auto& e = elements_[it->second.element];
        if (pose.pinch_mm > config_.pinch_threshold_mm + config_.hysteresis_mm ||
            e.signed_distance(p) > config_.hysteresis_mm) {
            release(Effector::Pinch, t, out);
            return;
        }
        if (e.kind == ElementKind::Slider) {
            const double prev = it->second.knob;
            const double cur = e.knob_position(p);
            std::vector<int> crossed;
            for (int i = 0; i < e.detents; ++i) {
                const double d = e.detent_position(i);
                if ((prev < d && cur >= d) || (prev > d && cur <= d)) crossed.push_back(i);
            }
            if (cur < prev) std::reverse(crossed.begin(), crossed.end());
            for (int i : crossed) out.push_back({EventKind::DetentCrossing, e.id, Effector::Pinch, t, i});
            it->second.knob = cur;
        }
        return;
    }
    if (pose.pinch_mm >= config_.pinch_threshold_mm) return;
    const auto c =
        candidate(p, [](ElementKind k) { return k == ElementKind::Grabbable || k == ElementKind::Slider; });
    if (!c) return;
    auto& e = elements_[*c];
    e.state = ElementState::Grabbed;
    holds_[Effector::Pinch] = {*c, e.kind == ElementKind::Slider ? e.knob_position(p) : 0.0};
    out.push_back({EventKind::Contact, e.id, Effector::Pinch, t});
}

std::vector<ContactEvent> ContactDetector::feed(const HandPose& pose) {
    if (last_t_ && pose.timestamp_ms < *last_t_) fail(ErrorCode::Argument, "pose timestamps must not decrease");
    last_t_ = pose.timestamp_ms;
    std::vector<ContactEvent> out;
    update_pinch(pose, out);
    update_button(Effector::Index, pose.index_tip, pose.timestamp_ms, out);
    if (config_.thumb_presses_buttons) update_button(Effector::Thumb, pose.thumb_tip, pose.timestamp_ms, out);
    return out;
}

std::vector<ContactEvent> ContactDetector::flush(double t_ms) {
    std::vector<ContactEvent> out;
    for (Effector who : {Effector::Pinch, Effector::Index, Effector::Thumb}) release(who, t_ms, out);
    return out;
}

std::vector<ContactEvent> detect_events(const std::vector<HandPose>& poses, const std::vector<UIElement>& elements,
                                        const DetectorConfig& config) {
    ContactDetector det(elements, config);
    std::vector<ContactEvent> out;
    for (const auto& p : poses) {
        auto ev = det.feed(p);
        out.insert(out.end(), ev.begin(), ev.end());
    }
    if (!poses.empty()) {
        auto ev = det.flush(poses.back().timestamp_ms);
        out.insert(out.end(), ev.begin(), ev.end());
    }
    return out;
}

const char* policy_name(DevicePolicy p) { return p == DevicePolicy::Electro ? "electro" : "vibro"; }

DevicePolicy policy_from_name(const std::string& name) {
    if (name == "electro") return DevicePolicy::Electro;
    if (name == "vibro") return DevicePolicy::Vibro;
    fail(ErrorCode::Parse, "unknown device policy '" + name + "' (electro|vibro)");
}

Finger finger_for(Effector e) { return e == Effector::Index ? Finger::Index : Finger::Thumb; }

RenderAction on_event(const ContactEvent& e, const RenderConfig& config, const CalibrationTable& calibration) {
    if (!(config.tick_ms > 0)) fail(ErrorCode::Argument, "scheduler tick must be positive");
    const Finger finger = finger_for(e.effector);
    RenderAction a;
    a.event = e;
    a.scheduled_ms = std::ceil(e.timestamp_ms / config.tick_ms) * config.tick_ms;

    double duration = stim::PulseSpec::balanced(1.0).total_duration();
    if (config.policy == DevicePolicy::Electro) {
        const auto it = calibration.find(finger);
        if (it == calibration.end())
            fail(ErrorCode::Uncalibrated,
                 std::string("no calibration for the ") + finger_name(finger) + "; run calibration first");
        const auto& cal = it->second;
        a.commands.push_back(proto::SetChannel{static_cast<std::uint8_t>(cal.channel)});
        a.commands.push_back(proto::SetIntensity{static_cast<std::uint16_t>(std::lround(cal.intensity_ma * 1000.0))});
        a.commands.push_back(proto::StimOnce{});
    } else {
        duration = config.vibration_ms;
        a.commands.push_back(proto::Vibrate{static_cast<std::uint16_t>(std::lround(config.vibration_ms)),
                                            config.vibration_hz});
    }
    if (config.visual) {
        VisualEffect v = *config.visual;
        v.target = finger;
        a.visual = VisualCommand{v, a.scheduled_ms, duration};
    }
    return a;
}

InteractionSession::InteractionSession(device::Device& device, std::vector<UIElement> elements, RenderConfig config,
                                       CalibrationTable calibration, DetectorConfig detector)
    : device_(&device), detector_(std::move(elements), detector), config_(config),
      calibration_(std::move(calibration)) {}

std::vector<EmittedAction> InteractionSession::dispatch(const std::vector<ContactEvent>& events) {
    std::vector<EmittedAction> out;
    for (const auto& e : events) {
        EmittedAction em{on_event(e, config_, calibration_), 0.0, {}};
        if (em.action.scheduled_ms > device_->now_ms()) device_->step(em.action.scheduled_ms - device_->now_ms());
        em.emitted_ms = device_->now_ms();
        for (const auto& c : em.action.commands) em.replies.push_back(device_->handle(c));
        out.push_back(em);
        log_.push_back(em);
    }
    return out;
}

std::vector<EmittedAction> InteractionSession::feed(const HandPose& pose) {
    auto events = detector_.feed(pose);
    last_t_ = pose.timestamp_ms;
    if (pose.timestamp_ms > device_->now_ms()) device_->step(pose.timestamp_ms - device_->now_ms());
    return dispatch(events);
}

std::vector<EmittedAction> InteractionSession::finish() {
    auto out = dispatch(detector_.flush(last_t_));
    device_->run_until_idle();
    return out;
}

namespace {

Vec3 vec_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

}  // namespace

std::vector<HandPose> read_pose_stream(std::istream& in) {
    std::vector<HandPose> poses;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        try {
            const json j = json::parse(line);
            HandPose p = HandPose::from_tips(j.at("t").get<double>(), vec_from_json(j.at("thumb")),
                                             vec_from_json(j.at("index")));
            if (j.contains("pinch")) p.pinch_mm = j.at("pinch").get<double>();
            if (!poses.empty() && p.timestamp_ms < poses.back().timestamp_ms)
                fail(ErrorCode::Parse, "pose line " + std::to_string(lineno) + ": timestamp goes backwards");
            poses.push_back(p);
        } catch (const json::exception& e) {
            fail(ErrorCode::Parse, "pose line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return poses;
}

void write_pose_stream(std::ostream& out, const std::vector<HandPose>& poses) {
    for (const auto& p : poses)
        out << json{{"t", p.timestamp_ms}, {"thumb", vec_to_json(p.thumb_tip)}, {"index", vec_to_json(p.index_tip)},
                    {"pinch", p.pinch_mm}}
                   .dump()
            << '\n';
}

std::vector<UIElement> read_scene(std::istream& in) {
    try {
        const json j = json::parse(in);
        std::vector<UIElement> out;
        for (const auto& e : j.at("elements")) {
            UIElement u;
            u.id = e.at("id").get<std::string>();
            const auto kind = e.at("kind").get<std::string>();
            if (kind == "button") u.kind = ElementKind::Button;
            else if (kind == "slider") u.kind = ElementKind::Slider;
            else if (kind == "grabbable") u.kind = ElementKind::Grabbable;
            else fail(ErrorCode::Parse, "scene: unknown element kind '" + kind + "'");
            u.center = vec_from_json(e.at("center"));
            u.half_extent = vec_from_json(e.at("half_extent"));
            u.detents = e.value("detents", 0);
            u.travel_mm = e.value("travel_mm", 0.0);
            u.check();
            out.push_back(u);
        }
        return out;
    } catch (const json::exception& e) {
        fail(ErrorCode::Parse, std::string("scene: ") + e.what());
    }
}

}  // namespace etw
