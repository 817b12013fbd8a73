#include "etw/visual.hpp"

#include "etw/error.hpp"

namespace etw {
namespace {

PointMm lerp(PointMm a, PointMm b, double t) { return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}; }

// Fingertip highlight sits on the distal pad, 85% of the way from base to tip.
constexpr double kFingertipFraction = 0.85;

}  // namespace

const char* visual_size_name(VisualSize s) {
    switch (s) {
    case VisualSize::Fingertip: return "fingertip";
    case VisualSize::Finger: return "finger";
    case VisualSize::FingertipToWrist: return "fingertip-to-wrist";
    }
    return "?";
}

VisualSize visual_size_from_name(const std::string& name) {
    for (auto s : kVisualSizes)
        if (name == visual_size_name(s)) return s;
    fail(ErrorCode::Parse, "unknown visual size '" + name + "'");
}

const char* opacity_name(Opacity o) { return o == Opacity::Full ? "full" : "half"; }

Opacity opacity_from_name(const std::string& name) {
    if (name == "full") return Opacity::Full;
    if (name == "half") return Opacity::Half;
    fail(ErrorCode::Parse, "unknown opacity '" + name + "'");
}

HighlightPath highlight_path(const VisualEffect& v, const HandMap& map) {
    const auto& lm = map.landmarks(v.target);
    const PointMm tip = lerp(lm.base, lm.tip, kFingertipFraction);
    switch (v.size) {
    case VisualSize::Fingertip: return {tip, tip, VisualEffect::kSweepDurationMs};
    case VisualSize::Finger: {
        const PointMm c = map.region_centroid(region_of(v.target));
        return {c, c, VisualEffect::kSweepDurationMs};
    }
    case VisualSize::FingertipToWrist: return {tip, map.wrist_center(), VisualEffect::kSweepDurationMs};
    }
    return {tip, tip, 0.0};
}

PointMm visual_centroid(const VisualEffect& v, const HandMap& map) {
    const auto path = highlight_path(v, map);
    return lerp(path.start, path.end, 0.5);
}

}  // namespace etw
