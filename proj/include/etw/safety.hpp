#pragma once

#include <optional>
#include <string>

namespace etw::safety {

struct SafetyLimits {
    double software_max_current = 4.0;     // mA
    double hardware_cap = 4.5;             // mA
    double resistance_fault_floor = 5.0;   // kOhm
    double resistance_fault_ceiling = 500.0;
    double supply_rail = 72.0;             // V

    // Throws Argument if the ordering invariants do not hold.
    void check() const;
};

enum class StateKind { Disarmed, Armed, Stimulating, Fault, Lockout };
enum class FaultReason { None, OpenCircuit, Short };

struct SafetyState {
    StateKind kind = StateKind::Disarmed;
    FaultReason reason = FaultReason::None;

    static SafetyState disarmed() { return {}; }
    static SafetyState armed() { return {StateKind::Armed, FaultReason::None}; }
    static SafetyState stimulating() { return {StateKind::Stimulating, FaultReason::None}; }
    static SafetyState fault(FaultReason r) { return {StateKind::Fault, r}; }
    static SafetyState lockout() { return {StateKind::Lockout, FaultReason::None}; }

    std::string name() const;
    friend bool operator==(const SafetyState&, const SafetyState&) = default;
};

struct LoadMeasurement {
    double voltage = 0.0;    // V at the stimulation output
    double current = 0.0;    // mA, magnitude
    double timestamp = 0.0;  // ms
};

struct CommandCheck {
    enum class Kind { Ok, NonPositive, OverSoftwareLimit };
    Kind kind = Kind::Ok;

    bool ok() const noexcept { return kind == Kind::Ok; }
    std::string describe() const;
};

CommandCheck check_command(double amplitude_ma, const SafetyLimits& limits);

// V / mA = kOhm. Throws UndefinedLoad when no current flows.
double estimate_resistance(const LoadMeasurement& m);

// Pure transition rule for one measurement.
SafetyState monitor(SafetyState state, const LoadMeasurement& m, const SafetyLimits& limits);

// Owns the state and applies the operator-facing transitions around monitor().
class Interlock {
public:
    explicit Interlock(SafetyLimits limits = {});

    const SafetyLimits& limits() const noexcept { return limits_; }
    SafetyState state() const noexcept { return state_; }
    std::optional<double> last_resistance() const noexcept { return last_resistance_; }
    double last_current() const noexcept { return last_current_; }

    // Disarmed -> Armed. Returns false (no change) from any other state.
    bool arm();
    // Armed/Fault -> Disarmed. Stimulating and Lockout are left alone.
    bool disarm();
    // Armed -> Stimulating. The only gate through which a waveform may start.
    bool begin_stimulation();
    // Stimulating -> Armed.
    void end_stimulation();
    // Lockout -> Disarmed.
    bool reset();

    SafetyState observe(const LoadMeasurement& m);

private:
    SafetyLimits limits_;
    SafetyState state_;
    std::optional<double> last_resistance_;
    double last_current_ = 0.0;
};

}  // namespace etw::safety
