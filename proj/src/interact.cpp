#include "etw/interact.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

namespace etw {

using ojson = nlohmann::ordered_json;

std::vector<int> candidate_channels(const Perceiver& perceiver, Finger finger) {
    struct Ranked {
        double share;
        double distance;  // weighted blob centroid to the finger centroid
        int channel;
    };
    const PointMm target = perceiver.map().region_centroid(region_of(finger));
    std::vector<Ranked> ranked;
    for (int ch = 5; ch <= 15; ++ch) {
        if (!perceiver.knows(ch)) continue;
        double x = 0.0, y = 0.0, w = 0.0;
        for (const auto& b : perceiver.config().channels.at(ch).blobs) {
            x += b.weight * b.centroid.x;
            y += b.weight * b.centroid.y;
            w += b.weight;
        }
        ranked.push_back({perceiver.expected_region_share(ch, region_of(finger)), std::hypot(x / w - target.x, y / w - target.y), ch});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.share != b.share) return a.share > b.share;
        return a.distance < b.distance;
    });
    std::vector<int> out;
    for (const auto& r : ranked) out.push_back(r.channel);
    return out;
}

InteractionRun run_interaction(const std::vector<UIElement>& scene, const std::vector<HandPose>& poses,
                               const RenderConfig& config, const Perceiver& perceiver, device::Device& device,
                               std::uint64_t seed, CalibrationMode mode) {
    InteractionRun run;
    device.handle(proto::Arm{});
    if (config.policy == DevicePolicy::Electro) {
        for (Finger f : {Finger::Thumb, Finger::Index}) {
            const auto s = Rng::mix(seed, static_cast<std::uint64_t>(f));
            run.calibration[f] = run_calibration(
                f, candidate_channels(perceiver, f),
                [&](int ch, double ma) { return perceiver.perceive(ch, ma, std::nullopt, s).has_value(); }, mode,
                &device);
        }
    }
    // replay starts after calibration on the device clock
    const double offset = device.now_ms();
    InteractionSession session(device, scene, config, run.calibration);
    for (auto p : poses) {
        p.timestamp_ms += offset;
        session.feed(p);
    }
    session.finish();
    device.run_until_idle();
    run.actions = session.log();
    device.handle(proto::Stop{});
    device.handle(proto::Disarm{});
    run.end_ms = device.now_ms();
    return run;
}

void write_action_log(std::ostream& out, const std::vector<EmittedAction>& actions) {
    for (const auto& a : actions) {
        const auto& e = a.action.event;
        ojson j;
        j["event"] = event_kind_name(e.kind);
        j["element"] = e.element_id;
        j["effector"] = effector_name(e.effector);
        j["t_event_ms"] = e.timestamp_ms;
        j["detent"] = e.kind == EventKind::DetentCrossing ? ojson(e.detent) : ojson(nullptr);
        j["scheduled_ms"] = a.action.scheduled_ms;
        j["emitted_ms"] = a.emitted_ms;
        if (a.action.visual) {
            const auto& v = *a.action.visual;
            j["visual"] = {{"size", visual_size_name(v.effect.size)},
                           {"opacity", opacity_name(v.effect.opacity)},
                           {"target", finger_name(v.effect.target)},
                           {"start_ms", v.start_ms},
                           {"duration_ms", v.duration_ms}};
        } else {
            j["visual"] = nullptr;
        }
        j["commands"] = ojson::array();
        for (const auto& c : a.action.commands) j["commands"].push_back(proto::describe(c));
        j["replies"] = ojson::array();
        for (const auto& c : a.replies) j["replies"].push_back(proto::describe(c));
        out << j.dump() << '\n';
    }
}

}  // namespace etw
