#include <doctest.h>

#include "etw/error.hpp"
#include "etw/rng.hpp"
#include "etw/safety.hpp"

using namespace etw;
using namespace etw::safety;

TEST_CASE("command limits") {
    const SafetyLimits limits;
    CHECK(check_command(4.0, limits).ok());
    CHECK(check_command(4.1, limits).kind == CommandCheck::Kind::OverSoftwareLimit);
    CHECK(check_command(0.0, limits).kind == CommandCheck::Kind::NonPositive);
    CHECK(check_command(-1.0, limits).kind == CommandCheck::Kind::NonPositive);
    CHECK(check_command(0.65, limits).ok());
}

TEST_CASE("limits ordering") {
    SafetyLimits bad;
    bad.software_max_current = 4.6;
    CHECK_THROWS_AS(bad.check(), Error);
    SafetyLimits flipped;
    flipped.resistance_fault_floor = 600.0;
    CHECK_THROWS_AS(Interlock{flipped}, Error);
}

TEST_CASE("resistance estimate") {
    CHECK(estimate_resistance({72.3, 1.0, 0.0}) == doctest::Approx(72.3));
    CHECK(estimate_resistance({76.0, 1.0, 0.0}) == doctest::Approx(76.0));
    try {
        estimate_resistance({10.0, 0.0, 0.0});
        FAIL("expected undefined-load error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UndefinedLoad);
    }
}

TEST_CASE("monitor transitions") {
    const SafetyLimits limits;
    CHECK(monitor(SafetyState::armed(), {72.0, 5.0, 0}, limits) == SafetyState::lockout());
    CHECK(monitor(SafetyState::armed(), {600.0, 1.0, 0}, limits) == SafetyState::fault(FaultReason::OpenCircuit));
    CHECK(monitor(SafetyState::armed(), {2.0, 1.0, 0}, limits) == SafetyState::fault(FaultReason::Short));
    CHECK(monitor(SafetyState::fault(FaultReason::OpenCircuit), {72.0, 1.0, 0}, limits) == SafetyState::armed());
    CHECK(monitor(SafetyState::stimulating(), {72.3, 1.0, 0}, limits) == SafetyState::stimulating());
    CHECK(monitor(SafetyState::armed(), {0.0, 0.0, 0}, limits) == SafetyState::armed());
    // Lockout does not clear on a good measurement
    CHECK(monitor(SafetyState::lockout(), {72.0, 1.0, 0}, limits) == SafetyState::lockout());
}

TEST_CASE("interlock gate and reset") {
    Interlock il;
    CHECK_FALSE(il.begin_stimulation());
    CHECK(il.arm());
    CHECK(il.begin_stimulation());
    CHECK(il.state().kind == StateKind::Stimulating);
    CHECK_FALSE(il.begin_stimulation());
    il.end_stimulation();
    CHECK(il.state() == SafetyState::armed());
    il.observe({72.0, 5.0, 1.0});
    CHECK(il.state() == SafetyState::lockout());
    CHECK_FALSE(il.arm());
    CHECK_FALSE(il.begin_stimulation());
    CHECK(il.reset());
    CHECK(il.state() == SafetyState::disarmed());
}

TEST_CASE("lockout is absorbing under random measurements") {
    const SafetyLimits limits;
    Rng rng(4242);
    SafetyState s = monitor(SafetyState::armed(), {72.0, 5.0, 0}, limits);
    for (int i = 0; i < 10000; ++i) {
        const LoadMeasurement m{rng.uniform(0.0, 80.0), rng.uniform(0.0, 6.0), static_cast<double>(i)};
        s = monitor(s, m, limits);
        REQUIRE(s == SafetyState::lockout());
    }
}
