#include "etw/calibration.hpp"

#include <algorithm>
#include <string>

#include "etw/error.hpp"
#include "etw/relay.hpp"

namespace etw {
namespace {

void check_channel(int channel) {
    if (channel < 1 || channel > relay::kChannelCount)
        fail(ErrorCode::UnknownChannel, "calibration channel must be 1..15");
}

}  // namespace

const char* calibration_state_name(CalibrationStepper::State s) {
    switch (s) {
    case CalibrationStepper::State::Stepping: return "stepping";
    case CalibrationStepper::State::Confirmed: return "confirmed";
    case CalibrationStepper::State::Failed: return "failed";
    case CalibrationStepper::State::Aborted: return "aborted";
    }
    return "?";
}

CalibrationStepper::CalibrationStepper(Finger target, int channel, CalibrationMode mode)
    : target_(target), channel_(channel), mode_(mode) {
    check_channel(channel);
}

void CalibrationStepper::require(State s, const char* what) const {
    if (state_ != s)
        fail(ErrorCode::State, std::string("cannot ") + what + " while calibration is " + calibration_state_name(state_));
}

int CalibrationStepper::step() {
    require(State::Stepping, "step");
    if (intensity_ua_ >= kMaxUa) {
        state_ = State::Failed;
        fail(ErrorCode::CalibrationFailed,
             "no sensation on ch" + std::to_string(channel_) + " up to 4.0 mA; switch channel");
    }
    intensity_ua_ += kStepUa;
    ++steps_;
    ++total_steps_;
    return intensity_ua_;
}

void CalibrationStepper::switch_channel(int channel) {
    if (state_ != State::Stepping && state_ != State::Failed) require(State::Stepping, "switch channel");
    check_channel(channel);
    channel_ = channel;
    intensity_ua_ = 0;
    steps_ = 0;
    state_ = State::Stepping;
}

CalibrationResult CalibrationStepper::confirm() {
    require(State::Stepping, "confirm");
    if (intensity_ua_ == 0) fail(ErrorCode::State, "confirm needs at least one step");
    state_ = State::Confirmed;
    const int extra = mode_ == CalibrationMode::Study3 ? kStepUa : 0;
    const int result = std::min(intensity_ua_ + extra, kMaxUa);
    return {target_, channel_, result / 1000.0, steps_};
}

void CalibrationStepper::abort() {
    if (state_ == State::Confirmed) fail(ErrorCode::State, "calibration already confirmed");
    state_ = State::Aborted;
}

CalibrationResult run_calibration(Finger target, const std::vector<int>& candidates, const Responder& responder,
                                  CalibrationMode mode, device::Device* device) {
    if (candidates.empty()) fail(ErrorCode::Argument, "calibration needs at least one candidate channel");
    if (device && device->safety_state().kind != safety::StateKind::Armed)
        fail(ErrorCode::State, "calibration requires an armed device");

    CalibrationStepper stepper(target, candidates.front(), mode);
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (k > 0) stepper.switch_channel(candidates[k]);
        try {
            while (true) {
                const int ua = stepper.step();
                if (device) {
                    device->handle(proto::SetChannel{static_cast<std::uint8_t>(stepper.channel())});
                    device->handle(proto::SetIntensity{static_cast<std::uint16_t>(ua)});
                    device->handle(proto::StimOnce{});
                    device->run_until_idle();
                    if (device->safety_state().kind == safety::StateKind::Lockout)
                        fail(ErrorCode::Lockout, "device locked out during calibration");
                }
                if (responder(stepper.channel(), stepper.intensity_ma())) return stepper.confirm();
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::CalibrationFailed) throw;
        }
    }
    fail(ErrorCode::CalibrationFailed,
         std::string("calibration failed on every candidate channel for the ") + finger_name(target));
}

}  // namespace etw
