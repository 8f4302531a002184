#include <doctest.h>

#include <algorithm>

#include "gridrelax/error.hpp"
#include "gridrelax/network.hpp"
#include "support/networks.hpp"

using namespace gridrelax;
using gridrelax::testing::case3_base;

namespace {

bool has_code(const std::vector<Diagnostic>& diags, DiagnosticCode code, Severity sev) {
    return std::any_of(diags.begin(), diags.end(),
                       [&](const Diagnostic& d) { return d.code == code && d.severity == sev; });
}

}  // namespace

TEST_SUITE("network_model") {

TEST_CASE("three-bus case validates clean") {
    CHECK(validate(case3_base()).empty());
    CHECK(validate(gridrelax::testing::case3_tight()).empty());
}

TEST_CASE("dangling branch endpoint is an error") {
    Network net = case3_base();
    net.branches[0].to_bus = 9;
    const auto diags = validate(net);
    CHECK(has_errors(diags));
    CHECK(has_code(diags, DiagnosticCode::kDanglingBranch, Severity::kError));
}

TEST_CASE("negative resistance is only a warning") {
    Network net = case3_base();
    net.branches[1].r = -0.01;
    const auto diags = validate(net);
    CHECK_FALSE(has_errors(diags));
    CHECK(has_impedance_warning(diags));
    CHECK(has_code(diags, DiagnosticCode::kNonnegativeImpedanceViolated, Severity::kWarning));
}

TEST_CASE("structural errors") {
    Network net = case3_base();
    net.reference_bus = 42;
    CHECK(has_code(validate(net), DiagnosticCode::kReferenceMissing, Severity::kError));

    net = case3_base();
    net.buses[2].id = 1;
    CHECK(has_code(validate(net), DiagnosticCode::kDuplicateBusId, Severity::kError));

    net = case3_base();
    net.buses[0].vmin = 1.2;
    CHECK(has_code(validate(net), DiagnosticCode::kBadVoltageLimits, Severity::kError));

    net = case3_base();
    net.branches[0].tap = 0.0;
    CHECK(has_code(validate(net), DiagnosticCode::kBadTap, Severity::kError));

    net = case3_base();
    net.branches[0].angle_min = 0.1;
    CHECK(has_code(validate(net), DiagnosticCode::kBadAngleLimits, Severity::kError));

    net = case3_base();
    net.branches[0].r = net.branches[0].x = 0.0;
    CHECK(has_code(validate(net), DiagnosticCode::kZeroImpedance, Severity::kError));

    net = case3_base();
    net.generators[0].pmin = 30.0;
    CHECK(has_code(validate(net), DiagnosticCode::kBadGeneratorLimits, Severity::kError));

    net = case3_base();
    net.generators[1].c2 = -1.0;
    CHECK(has_code(validate(net), DiagnosticCode::kNonconvexCost, Severity::kError));

    CHECK(has_code(validate(Network{}), DiagnosticCode::kNoBuses, Severity::kError));
}

TEST_CASE("branch constants") {
    SUBCASE("line 1-3") {
        const BranchConstants c = branch_constants({.r = 0.065, .x = 0.62});
        CHECK(c.g == doctest::Approx(0.16726).epsilon(1e-4));
        CHECK(c.b == doctest::Approx(-0.62 / (0.065 * 0.065 + 0.62 * 0.62)));
        CHECK(c.b == doctest::Approx(-1.59537).epsilon(1e-5));
        CHECK(c.tzR == doctest::Approx(0.065));
        CHECK(c.tzI == doctest::Approx(0.62));
        CHECK(c.tap_sq() == doctest::Approx(1.0));
    }
    SUBCASE("unit tap passes the impedance through") {
        const BranchConstants c = branch_constants({.r = 0.042, .x = 0.90});
        CHECK(c.tzR == doctest::Approx(0.042));
        CHECK(c.tzI == doctest::Approx(0.90));
    }
    SUBCASE("resistive line with real tap") {
        Branch br{.r = 1.0, .x = 0.0};
        br.tap = 2.0;
        const BranchConstants c = branch_constants(br);
        CHECK(c.g == doctest::Approx(1.0));
        CHECK(c.b == doctest::Approx(0.0));
        CHECK(c.tR == doctest::Approx(2.0));
        CHECK(c.tI == doctest::Approx(0.0));
        CHECK(c.tzR == doctest::Approx(2.0));
        CHECK(c.tzI == doctest::Approx(0.0));
    }
    SUBCASE("phase shifter") {
        Branch br{.r = 0.01, .x = 0.1};
        br.tap = 1.05;
        br.shift = 0.2;
        const BranchConstants c = branch_constants(br);
        CHECK(c.tR == doctest::Approx(1.05 * std::cos(0.2)));
        CHECK(c.tI == doctest::Approx(1.05 * std::sin(0.2)));
        CHECK(c.tzR == doctest::Approx(0.01 * c.tR - 0.1 * c.tI));
        CHECK(c.tzI == doctest::Approx(0.01 * c.tI + 0.1 * c.tR));
    }
    SUBCASE("zero impedance throws") {
        try {
            branch_constants({.r = 0.0, .x = 0.0});
            FAIL("expected an exception");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::kDegenerateBranch);
        }
    }
}

TEST_CASE("angle limits are clamped below pi/2") {
    CHECK(clamp_angle_limit(2.0) == kMaxAngleLimit);
    CHECK(clamp_angle_limit(-2.0) == -kMaxAngleLimit);
    CHECK(clamp_angle_limit(0.3) == 0.3);
}

TEST_CASE("generator cost uses MW arguments") {
    const Network net = case3_base();
    CHECK(net.generator_cost(0, 1.27564) == doctest::Approx(0.11 * 127.564 * 127.564 + 5 * 127.564));
    CHECK(net.total_cost({0.0, 0.0, 0.0}) == 0.0);
    CHECK(net.bus_index(3) == 2);
    CHECK_FALSE(net.find_bus(7).has_value());
    CHECK(net.generators_at(2) == std::vector<std::size_t>{1});
    CHECK_THROWS_AS(net.bus_index(7), Error);
}

}
