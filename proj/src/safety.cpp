#include "etw/safety.hpp"

#include "etw/error.hpp"

namespace etw::safety {

void SafetyLimits::check() const {
    if (!(software_max_current < hardware_cap))
        fail(ErrorCode::Argument, "software current limit must be below the hardware cap");
    if (!(resistance_fault_floor < resistance_fault_ceiling))
        fail(ErrorCode::Argument, "resistance fault floor must be below the ceiling");
}

std::string SafetyState::name() const {
    switch (kind) {
    case StateKind::Disarmed: return "Disarmed";
    case StateKind::Armed: return "Armed";
    case StateKind::Stimulating: return "Stimulating";
    case StateKind::Fault:
        return reason == FaultReason::OpenCircuit ? "Fault(open_circuit)"
             : reason == FaultReason::Short       ? "Fault(short)"
                                                  : "Fault";
    case StateKind::Lockout: return "Lockout";
    }
    return "?";
}

std::string CommandCheck::describe() const {
    switch (kind) {
    case Kind::Ok: return "ok";
    case Kind::NonPositive: return "rejected: non-positive amplitude";
    case Kind::OverSoftwareLimit: return "rejected: over software limit";
    }
    return "?";
}

CommandCheck check_command(double amplitude_ma, const SafetyLimits& limits) {
    if (!(amplitude_ma > 0.0)) return {CommandCheck::Kind::NonPositive};
    if (amplitude_ma > limits.software_max_current) return {CommandCheck::Kind::OverSoftwareLimit};
    return {};
}

double estimate_resistance(const LoadMeasurement& m) {
    if (!(m.current > 0.0)) fail(ErrorCode::UndefinedLoad, "resistance undefined without load current");
    return m.voltage / m.current;
}

SafetyState monitor(SafetyState state, const LoadMeasurement& m, const SafetyLimits& limits) {
    if (state.kind == StateKind::Lockout) return state;
    if (m.current > limits.hardware_cap) return SafetyState::lockout();
    if (state.kind == StateKind::Disarmed || !(m.current > 0.0)) return state;

    const double r = estimate_resistance(m);
    if (r > limits.resistance_fault_ceiling) return SafetyState::fault(FaultReason::OpenCircuit);
    if (r < limits.resistance_fault_floor) return SafetyState::fault(FaultReason::Short);
    if (state.kind == StateKind::Fault) return SafetyState::armed();
    return state;
}

Interlock::Interlock(SafetyLimits limits) : limits_(limits) { limits_.check(); }

bool Interlock::arm() {
    if (state_.kind != StateKind::Disarmed) return false;
    state_ = SafetyState::armed();
    return true;
}

bool Interlock::disarm() {
    if (state_.kind != StateKind::Armed && state_.kind != StateKind::Fault) return false;
    state_ = SafetyState::disarmed();
    return true;
}

bool Interlock::begin_stimulation() {
    if (state_.kind != StateKind::Armed) return false;
    state_ = SafetyState::stimulating();
    return true;
}

void Interlock::end_stimulation() {
    if (state_.kind == StateKind::Stimulating) state_ = SafetyState::armed();
}

bool Interlock::reset() {
    if (state_.kind != StateKind::Lockout) return false;
    state_ = SafetyState::disarmed();
    return true;
}

SafetyState Interlock::observe(const LoadMeasurement& m) {
    last_current_ = m.current;
    if (m.current > 0.0) last_resistance_ = m.voltage / m.current;
    state_ = monitor(state_, m, limits_);
    return state_;
}

}  // namespace etw::safety
