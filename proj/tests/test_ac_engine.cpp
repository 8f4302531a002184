#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gridrelax/ac_engine.hpp"
#include "gridrelax/error.hpp"
#include "support/networks.hpp"

using namespace gridrelax;
using gridrelax::testing::case3_base;

namespace {

AcPoint flat(const Network& net) {
    AcPoint pt;
    pt.vm.assign(net.buses.size(), 1.0);
    pt.va.assign(net.buses.size(), 0.0);
    pt.pg.assign(net.generators.size(), 0.0);
    pt.qg.assign(net.generators.size(), 0.0);
    return pt;
}

}  // namespace

TEST_SUITE("ac_engine") {

TEST_CASE("flat-start flows reduce to line charging") {
    const Network net = case3_base();
    const auto flows = eval_flows(net, flat(net));
    REQUIRE(flows.size() == 3);
    CHECK(flows[2].p_fr == doctest::Approx(0.0));
    CHECK(flows[2].q_fr == doctest::Approx(-0.225));
    CHECK(flows[1].q_fr == doctest::Approx(-0.35));
    CHECK(flows[1].q_to == doctest::Approx(-0.35));
}

TEST_CASE("feasibility checks") {
    SUBCASE("balanced flat point on a lossless line") {
        Network net = gridrelax::testing::two_bus(0.0, 0.1, 0.0, 0.0, 0.0);
        net.buses[1].pd = 0.0;
        AcPoint pt = flat(net);
        CHECK(check_feasibility(net, pt).feasible);
    }
    SUBCASE("balanced one-bus point") {
        const Network net = gridrelax::testing::one_bus(0.7, 0.0, 1.0, 0.0);
        AcPoint pt = flat(net);
        pt.pg[0] = 0.7;
        CHECK(check_feasibility(net, pt).feasible);
    }
    SUBCASE("overvoltage") {
        const Network net = case3_base();
        AcPoint pt = flat(net);
        pt.vm[1] = 1.2;
        const FeasReport rep = check_feasibility(net, pt);
        CHECK_FALSE(rep.feasible);
        const auto it = std::find_if(rep.violations.begin(), rep.violations.end(),
                                     [](const RowViolation& v) { return v.tag == "voltage_ub[2]"; });
        REQUIRE(it != rep.violations.end());
        CHECK(it->magnitude == doctest::Approx(0.1));
    }
    SUBCASE("generator box and reference angle") {
        const Network net = case3_base();
        AcPoint pt = flat(net);
        pt.pg[2] = 0.5;
        pt.va[0] = 0.1;
        const FeasReport rep = check_feasibility(net, pt);
        auto has = [&](const std::string& tag) {
            return std::any_of(rep.violations.begin(), rep.violations.end(),
                               [&](const RowViolation& v) { return v.tag == tag; });
        };
        CHECK(has("pg_ub[2]"));
        CHECK(has("ref_angle[1]"));
    }
}

TEST_CASE("lifting") {
    Network net = gridrelax::testing::two_bus(0.01, 0.1, 0.0, 0.0, 0.0);
    AcPoint pt = flat(net);
    WPoint w = lift(net, pt);
    CHECK(w.wr[0] == doctest::Approx(1.0));
    CHECK(w.wi[0] == doctest::Approx(0.0));

    pt.vm = {1.1, 0.9};
    w = lift(net, pt);
    CHECK(w.wr[0] == doctest::Approx(0.99));
    CHECK(w.wi[0] == doctest::Approx(0.0));
    CHECK(w.wr[0] * w.wr[0] + w.wi[0] * w.wi[0] == doctest::Approx(w.w[0] * w.w[1]));
    CHECK(w.w[0] * w.w[1] == doctest::Approx(0.9801));

    pt.vm = {1.0, 1.0};
    pt.va = {std::numbers::pi / 6, 0.0};
    w = lift(net, pt);
    CHECK(w.wr[0] == doctest::Approx(std::cos(std::numbers::pi / 6)));
    CHECK(w.wi[0] == doctest::Approx(0.5));
}

TEST_CASE("active losses are nonnegative on passive lines") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
        Network net = gridrelax::testing::two_bus(0.1 * unit(rng), 0.01 + unit(rng), unit(rng), 0.0, 0.0);
        net.branches[0].tap = 0.9 + 0.2 * unit(rng);
        net.branches[0].shift = 0.2 * (unit(rng) - 0.5);
        AcPoint pt = flat(net);
        pt.vm = {0.9 + 0.2 * unit(rng), 0.9 + 0.2 * unit(rng)};
        pt.va = {0.0, 2.0 * (unit(rng) - 0.5)};
        const BranchFlow f = eval_flows(net, pt)[0];
        worst = std::min(worst, f.p_fr + f.p_to);
    }
    CHECK(worst >= -1e-12);
}

TEST_CASE("generation cost") {
    const Network net = case3_base();
    AcPoint pt = flat(net);
    pt.pg = {1.0, 2.0, 0.0};
    CHECK(generation_cost(net, pt) == doctest::Approx(0.11 * 1e4 + 500 + 0.085 * 4e4 + 240));
}

TEST_CASE("grid oracle") {
    SUBCASE("one bus buys exactly the demand") {
        const Network net = gridrelax::testing::one_bus(1.0, 0.1, 2.0, 5.0);
        const OracleResult r = grid_oracle(net, {.resolution = 5, .refine_rounds = 1});
        CHECK(r.objective == doctest::Approx(0.1 * 1e4 + 200 + 5));
        CHECK(r.point.pg[0] == doctest::Approx(1.0));
    }
    SUBCASE("three-bus case at coarse resolution is feasible and above the SOC bound") {
        const Network net = case3_base();
        const OracleResult r = grid_oracle(net, {.resolution = 11, .refine_rounds = 2});
        CHECK(check_feasibility(net, r.point, 1e-4).feasible);
        CHECK(r.objective > 5736.0);
        CHECK(r.objective < 5812.0 * 1.05);
        CHECK(r.objective == doctest::Approx(generation_cost(net, r.point)));
    }
    SUBCASE("guards") {
        Network big = case3_base();
        for (int id = 4; id <= 6; ++id) big.buses.push_back({.id = id});
        try {
            grid_oracle(big);
            FAIL("expected an exception");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::kOracleTooLarge);
        }
        Network starved = case3_base();
        starved.generators[0].pmax = starved.generators[1].pmax = 0.1;
        try {
            grid_oracle(starved, {.resolution = 5, .refine_rounds = 0});
            FAIL("expected an exception");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::kOracleNoFeasible);
        }
    }
}

TEST_CASE("sampler") {
    const Network net = case3_base();
    const auto a = sample_feasible_points(net, 50, 9);
    const auto b = sample_feasible_points(net, 50, 9);
    REQUIRE(a.size() == 50);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].vm == b[k].vm);
        CHECK(a[k].pg == b[k].pg);
        CHECK(check_feasibility(net, a[k], 1e-9).feasible);
    }
}

}
