#pragma once

// Host-side rendering engine: turns a hand-pose stream into UI contact events
// and each event into a stimulus + visual-effect pair scheduled on a common
// tick.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etw/device.hpp"
#include "etw/handmap.hpp"
#include "etw/protocol.hpp"
#include "etw/visual.hpp"

namespace etw {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

double distance(const Vec3& a, const Vec3& b);

struct HandPose {
    double timestamp_ms = 0.0;
    Vec3 thumb_tip;
    Vec3 index_tip;
    double pinch_mm = 0.0;  // thumb-index fingertip distance

    Vec3 pinch_point() const;
    static HandPose from_tips(double t_ms, const Vec3& thumb, const Vec3& index);
};

enum class ElementKind { Button, Slider, Grabbable };
enum class ElementState { Idle, Contacted, Grabbed };
const char* element_kind_name(ElementKind k);

// Axis-aligned box. A slider's knob travels along x, centred on `center`.
struct UIElement {
    std::string id;
    ElementKind kind = ElementKind::Button;
    Vec3 center;
    Vec3 half_extent{10.0, 10.0, 10.0};
    int detents = 0;          // sliders: >= 2
    double travel_mm = 0.0;   // sliders: > 0
    ElementState state = ElementState::Idle;

    void check() const;  // throws Argument
    // Signed distance from p to the box surface (negative inside).
    double signed_distance(const Vec3& p) const;
    // Knob offset along x for a pinch point, clamped to the travel.
    double knob_position(const Vec3& p) const;
    double detent_position(int i) const;
};

enum class EventKind { Contact, Release, DetentCrossing };
enum class Effector { Thumb, Index, Pinch };
const char* event_kind_name(EventKind k);
const char* effector_name(Effector e);

struct ContactEvent {
    EventKind kind = EventKind::Contact;
    std::string element_id;
    Effector effector = Effector::Index;
    double timestamp_ms = 0.0;
    int detent = -1;  // detent index for crossings

    friend bool operator==(const ContactEvent&, const ContactEvent&) = default;
};

struct DetectorConfig {
    double hysteresis_mm = 2.0;
    double pinch_threshold_mm = 15.0;
    bool thumb_presses_buttons = false;  // buttons respond to the index fingertip only by default
};

// Streaming contact detector. Each effector holds at most one element at a
// time; when several elements qualify the nearest centre wins.
class ContactDetector {
public:
    ContactDetector(std::vector<UIElement> elements, DetectorConfig config = {});

    // Throws Argument for a timestamp earlier than the previous pose.
    std::vector<ContactEvent> feed(const HandPose& pose);
    // Releases whatever is still held, stamped at t_ms.
    std::vector<ContactEvent> flush(double t_ms);

    const std::vector<UIElement>& elements() const noexcept { return elements_; }

private:
    struct Hold {
        std::size_t element;
        double knob = 0.0;
    };
    std::optional<std::size_t> candidate(const Vec3& p, bool (*accepts)(ElementKind)) const;
    void update_button(Effector who, const Vec3& tip, double t, std::vector<ContactEvent>& out);
    void update_pinch(const HandPose& pose, std::vector<ContactEvent>& out);
    void release(Effector who, double t, std::vector<ContactEvent>& out);

    std::vector<UIElement> elements_;
    DetectorConfig config_;
    std::map<Effector, Hold> holds_;
    std::optional<double> last_t_;
};

// Whole-stream convenience: feeds every pose, then flushes at the last timestamp
// so every contact is paired with a release.
std::vector<ContactEvent> detect_events(const std::vector<HandPose>& poses, const std::vector<UIElement>& elements,
                                        const DetectorConfig& config = {});

enum class DevicePolicy { Electro, Vibro };
const char* policy_name(DevicePolicy p);
DevicePolicy policy_from_name(const std::string& name);

struct CalibrationResult {
    Finger finger = Finger::Thumb;
    int channel = 0;
    double intensity_ma = 0.0;
    int steps = 0;
};

using CalibrationTable = std::map<Finger, CalibrationResult>;

struct RenderConfig {
    DevicePolicy policy = DevicePolicy::Electro;
    std::optional<VisualEffect> visual = VisualEffect{};  // target finger is taken from the event
    double tick_ms = 10.0;
    double vibration_ms = 25.0;
    std::uint16_t vibration_hz = 80;
};

struct VisualCommand {
    VisualEffect effect;
    double start_ms;
    double duration_ms;
};

struct RenderAction {
    ContactEvent event;
    double scheduled_ms = 0.0;             // common start of stimulus and visual
    std::vector<proto::Command> commands;  // ends in STIM_ONCE or VIBRATE
    std::optional<VisualCommand> visual;
};

// Finger whose calibration serves an effector (a pinch is rendered on the thumb).
Finger finger_for(Effector e);

// Throws Uncalibrated when the event's finger has no calibration (electro policy).
RenderAction on_event(const ContactEvent& e, const RenderConfig& config, const CalibrationTable& calibration);

struct EmittedAction {
    RenderAction action;
    double emitted_ms;  // simulated clock when the commands reached the device
    std::vector<proto::Command> replies;
};

// Event loop: detects events on the pose stream and plays the resulting
// commands into the device at their scheduled ticks. Pose timestamps and the
// device clock share one origin.
class InteractionSession {
public:
    InteractionSession(device::Device& device, std::vector<UIElement> elements, RenderConfig config,
                       CalibrationTable calibration, DetectorConfig detector = {});

    std::vector<EmittedAction> feed(const HandPose& pose);
    std::vector<EmittedAction> finish();
    const std::vector<EmittedAction>& log() const noexcept { return log_; }

private:
    std::vector<EmittedAction> dispatch(const std::vector<ContactEvent>& events);

    device::Device* device_;
    ContactDetector detector_;
    RenderConfig config_;
    CalibrationTable calibration_;
    std::vector<EmittedAction> log_;
    double last_t_ = 0.0;
};

// Pose replay: one JSON object per line,
//   {"t": ms, "thumb": [x, y, z], "index": [x, y, z], "pinch": mm}
// "pinch" is optional and defaults to the fingertip distance.
std::vector<HandPose> read_pose_stream(std::istream& in);
void write_pose_stream(std::ostream& out, const std::vector<HandPose>& poses);

// Scene: {"elements": [{"id", "kind", "center", "half_extent", "detents", "travel_mm"}]}
std::vector<UIElement> read_scene(std::istream& in);

}  // namespace etw
