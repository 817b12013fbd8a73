#pragma once

// Scene + pose replay against a simulated participant: calibrate, then play
// the interaction and log every emitted stimulus/visual pair.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "etw/calibration.hpp"
#include "etw/perceiver.hpp"
#include "etw/renderer.hpp"

namespace etw {

struct InteractionRun {
    CalibrationTable calibration;
    std::vector<EmittedAction> actions;
    double end_ms = 0.0;
};

// Channels 5..15 ordered by expected share in the finger, then by blob distance to it.
std::vector<int> candidate_channels(const Perceiver& perceiver, Finger finger);

// Arms the device, calibrates thumb and index on the participant, replays the
// poses, then stops and disarms. Throws CalibrationFailed / Lockout.
InteractionRun run_interaction(const std::vector<UIElement>& scene, const std::vector<HandPose>& poses,
                               const RenderConfig& config, const Perceiver& perceiver, device::Device& device,
                               std::uint64_t seed, CalibrationMode mode = CalibrationMode::Study1);

// One JSON object per emitted action.
void write_action_log(std::ostream& out, const std::vector<EmittedAction>& actions);

}  // namespace etw
