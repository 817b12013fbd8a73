#pragma once

// Threshold calibration: intensity climbs from zero in 0.1 mA steps on a
// candidate channel until the participant reports a clear sensation.

#include <functional>
#include <vector>

#include "etw/device.hpp"
#include "etw/renderer.hpp"

namespace etw {

enum class CalibrationMode {
    Study1,  // result = first intensity felt
    Study3,  // result = first intensity felt + one step
};

class CalibrationStepper {
public:
    enum class State { Stepping, Confirmed, Failed, Aborted };

    static constexpr int kStepUa = 100;
    static constexpr int kMaxUa = 4000;
    static constexpr int kMaxSteps = kMaxUa / kStepUa;

    CalibrationStepper(Finger target, int channel, CalibrationMode mode = CalibrationMode::Study1);

    Finger target() const noexcept { return target_; }
    int channel() const noexcept { return channel_; }
    int intensity_ua() const noexcept { return intensity_ua_; }
    double intensity_ma() const noexcept { return intensity_ua_ / 1000.0; }
    int steps() const noexcept { return steps_; }              // on the current channel
    int total_steps() const noexcept { return total_steps_; }  // across channel switches
    State state() const noexcept { return state_; }
    CalibrationMode mode() const noexcept { return mode_; }

    // +0.1 mA. At 4.0 mA the next step fails the channel (throws CalibrationFailed).
    int step();
    // New candidate channel, intensity back to zero. Allowed after a failure.
    void switch_channel(int channel);
    // Current intensity felt: closes the calibration.
    CalibrationResult confirm();
    void abort();

private:
    void require(State s, const char* what) const;

    Finger target_;
    int channel_;
    CalibrationMode mode_;
    int intensity_ua_ = 0;
    int steps_ = 0;
    int total_steps_ = 0;
    State state_ = State::Stepping;
};

const char* calibration_state_name(CalibrationStepper::State s);

// Asked after every step: was a clear sensation felt on `channel` at `intensity_ma`?
using Responder = std::function<bool(int channel, double intensity_ma)>;

// Runs the stepper over the candidate channels in order, moving to the next
// candidate when one fails. When a device is given, each step is delivered as
// one stimulus (device must be Armed). Throws CalibrationFailed when every
// candidate fails and Lockout when the device locks out.
CalibrationResult run_calibration(Finger target, const std::vector<int>& candidates, const Responder& responder,
                                  CalibrationMode mode = CalibrationMode::Study1, device::Device* device = nullptr);

}  // namespace etw
