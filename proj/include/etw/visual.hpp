#pragma once

#include <array>
#include <optional>
#include <string>

#include "etw/handmap.hpp"

namespace etw {

enum class VisualSize { Fingertip, Finger, FingertipToWrist };
enum class Opacity { Full, Half };

inline constexpr std::array<VisualSize, 3> kVisualSizes = {VisualSize::Fingertip, VisualSize::Finger,
                                                           VisualSize::FingertipToWrist};
inline constexpr std::array<Opacity, 2> kOpacities = {Opacity::Full, Opacity::Half};

const char* visual_size_name(VisualSize s);  // fingertip | finger | fingertip-to-wrist
VisualSize visual_size_from_name(const std::string& name);
const char* opacity_name(Opacity o);  // full | half
Opacity opacity_from_name(const std::string& name);

// Light-blue highlight shown on the target finger together with a stimulus.
struct VisualEffect {
    static constexpr const char* kColor = "#7fd4ff";
    static constexpr double kSweepDurationMs = 45.0;  // fingertip-to-wrist sweep, aligned with one stimulus

    VisualSize size = VisualSize::Finger;
    Opacity opacity = Opacity::Full;
    Finger target = Finger::Thumb;

    friend bool operator==(const VisualEffect&, const VisualEffect&) = default;
};

// Where the highlight sits on the hand map. For the fingertip-to-wrist sweep
// this is the time-averaged position of the moving highlight.
PointMm visual_centroid(const VisualEffect& v, const HandMap& map);

// Start and end loci of the highlight (equal for the static effects).
struct HighlightPath {
    PointMm start;
    PointMm end;
    double duration_ms;
};
HighlightPath highlight_path(const VisualEffect& v, const HandMap& map);

}  // namespace etw
