#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "gridrelax/ac_engine.hpp"
#include "gridrelax/conic_solver.hpp"
#include "gridrelax/error.hpp"
#include "gridrelax/relaxations.hpp"
#include "support/networks.hpp"

using namespace gridrelax;
using gridrelax::testing::case3_base;
using gridrelax::testing::case3_tight;

namespace {

std::size_t count_rows(const OptModel& m, const std::string& prefix) {
    return static_cast<std::size_t>(std::count_if(m.rows().begin(), m.rows().end(), [&](const LinearRow& r) {
        return r.tag.starts_with(prefix);
    }));
}

double optimum(RelaxKind kind, const Network& net) {
    const SolveResult r = solve(build(kind, net).model);
    REQUIRE_MESSAGE(r.optimal(), to_string(kind) << ": " << r.message);
    return r.objective;
}

ErrorCode build_error(RelaxKind kind, const Network& net) {
    try {
        build(kind, net);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::kIo;
}

}  // namespace

TEST_SUITE("relaxations") {

TEST_CASE("relaxation names") {
    CHECK(to_string(RelaxKind::kNf) == "NF");
    CHECK(parse_relax_kind("soc") == RelaxKind::kSoc);
    CHECK(parse_relax_kind("TH") == RelaxKind::kTh);
    CHECK_FALSE(parse_relax_kind("sdp").has_value());
}

TEST_CASE("flow bounds") {
    const Network net = case3_base();
    SUBCASE("thermal limit boxes both components") {
        const FlowBox box = infer_flow_bounds(net, net.branches[1]);
        CHECK(box.p.lower == doctest::Approx(-0.5));
        CHECK(box.p.upper == doctest::Approx(0.5));
        CHECK(box.q.lower == doctest::Approx(-0.5));
        CHECK(box.q.upper == doctest::Approx(0.5));
    }
    SUBCASE("unrated branch under the demand envelope") {
        const FlowBox box = infer_flow_bounds(net, net.branches[0], FlowBoundPolicy::kDemandEnvelope);
        CHECK(box.p.upper == doctest::Approx(3.15 + 1.3 + 1.45));
        CHECK(box.q.lower == doctest::Approx(-5.9));
    }
    SUBCASE("zero rating counts as unrated") {
        Branch br = net.branches[1];
        br.s_max = 0.0;
        CHECK(infer_flow_bounds(net, br, FlowBoundPolicy::kDemandEnvelope).p.upper == doctest::Approx(5.9));
        CHECK(std::isinf(infer_flow_bounds(net, br).p.upper));
    }
}

TEST_CASE("voltage bounds") {
    Bus bus;
    bus.vmin = 0.9;
    bus.vmax = 1.1;
    CHECK(infer_w_bounds(bus).lower == doctest::Approx(0.81));
    CHECK(infer_w_bounds(bus).upper == doctest::Approx(1.21));
    bus.vmin = bus.vmax = 1.0;
    CHECK(infer_w_bounds(bus).lower == 1.0);
    CHECK(infer_w_bounds(bus).upper == 1.0);
    bus.vmin = 0.95;
    bus.vmax = 1.05;
    CHECK(infer_w_bounds(bus).lower == doctest::Approx(0.9025));
    CHECK(infer_w_bounds(bus).upper == doctest::Approx(1.1025));
}

TEST_CASE("copper plate structure") {
    const Relaxation cp = build_cp(case3_base());
    REQUIRE(cp.model.rows().size() == 2);
    const LinearRow& p = cp.model.rows()[0];
    CHECK(p.tag == "cp_balance_p");
    CHECK(p.sense == RowSense::kGreaterEqual);
    CHECK(p.rhs == doctest::Approx(3.15));
    REQUIRE(p.terms.size() == 3);
    for (const LinearTerm& t : p.terms) CHECK(t.coef == 1.0);
}

TEST_CASE("network flow structure") {
    const Relaxation nf = build_nf(case3_base());
    CHECK(count_rows(nf.model, "kcl_") == 6);
    CHECK(count_rows(nf.model, "nf_loss_") == 6);
    CHECK(count_rows(nf.model, "pad_") == 6);
    CHECK(nf.model.rows().size() == 18);
    CHECK(nf.model.cones().size() == 2);  // cost epigraphs of the two priced units
}

TEST_CASE("SOC structure") {
    const Relaxation soc = build_soc(case3_base());
    CHECK(soc.vars.wr.size() == 3);
    const auto& cones = soc.model.cones();
    CHECK(std::count_if(cones.begin(), cones.end(), [](const ConeRow& c) { return c.tag.starts_with("soc_w"); }) ==
          3);
    CHECK(std::count_if(cones.begin(), cones.end(), [](const ConeRow& c) { return c.tag.starts_with("thermal"); }) ==
          2);
}

TEST_CASE("optima on the three-bus case") {
    const Network net = case3_base();
    CHECK(optimum(RelaxKind::kSoc, net) == doctest::Approx(5735.0).epsilon(6.0 / 5735.0));
    CHECK(optimum(RelaxKind::kNf, net) == doctest::Approx(5639.0).epsilon(1.0 / 5639.0));
    CHECK(optimum(RelaxKind::kCp, net) == doctest::Approx(5639.0).epsilon(1.0 / 5639.0));
    CHECK(optimum(RelaxKind::kTh, net) == doctest::Approx(744.0).epsilon(10.0 / 744.0));

    const double soc_tight = optimum(RelaxKind::kSoc, case3_tight());
    CHECK(100.0 * (5992.0 - soc_tight) / 5992.0 == doctest::Approx(4.28).epsilon(0.1 / 4.28));
}

TEST_CASE("one bus copper plate serves the demand") {
    const Network net = gridrelax::testing::one_bus(1.0, 0.1, 2.0, 5.0);
    const Relaxation cp = build_cp(net);
    REQUIRE(cp.model.rows().size() == 2);
    const SolveResult r = solve(cp.model);
    REQUIRE(r.optimal());
    CHECK(r.value(cp.vars.pg[0]) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.objective == doctest::Approx(0.1 * 100 * 100 + 2.0 * 100 + 5.0).epsilon(1e-6));
}

TEST_CASE("lossless two-bus line: SOC equals CP") {
    const Network net = gridrelax::testing::two_bus(0.0, 0.1, 0.0, 1.0, 0.2);
    const double soc = optimum(RelaxKind::kSoc, net);
    const double cp = optimum(RelaxKind::kCp, net);
    CHECK(soc == doctest::Approx(cp).epsilon(1e-6));
}

TEST_CASE("TH with zero demand costs nothing") {
    const Network net = gridrelax::testing::two_bus(0.01, 0.1, 0.0, 0.0, 0.0);
    CHECK(std::abs(optimum(RelaxKind::kTh, net)) < 1e-5);
}

TEST_CASE("negative impedance") {
    Network net = case3_base();
    net.branches[0].r = -0.01;
    CHECK(build_error(RelaxKind::kNf, net) == ErrorCode::kModelUnsound);
    CHECK(build_error(RelaxKind::kCp, net) == ErrorCode::kModelUnsound);
    CHECK(build_error(RelaxKind::kTh, net) == ErrorCode::kModelUnsound);
    CHECK_NOTHROW(build_soc(net));

    net.branches[0].to_bus = 9;
    CHECK(build_error(RelaxKind::kSoc, net) == ErrorCode::kModelUnsound);
}

TEST_CASE("parallel branches get distinct variables") {
    Network net = case3_base();
    net.branches.push_back(net.branches[0]);
    const Relaxation soc = build_soc(net);
    CHECK(soc.model.find_variable("p[1,2]").has_value());
    CHECK(soc.model.find_variable("p[1,2#1]").has_value());
    CHECK(solve(soc.model).optimal());
}

TEST_CASE("loss kernel") {
    CHECK(loss_kernel(1.0, 1.0, 1.0, 0.0, 1.0, 0.0) == doctest::Approx(0.0));
    // |V_i/T* - V_j|^2 at a rank-one point.
    const double vi = 1.05, vj = 0.97, ai = 0.2, aj = -0.1, tap = 1.04, shift = 0.05;
    const double wr = vi * vj * std::cos(ai - aj), wi = vi * vj * std::sin(ai - aj);
    const double dr = vi / tap * std::cos(ai + shift) - vj * std::cos(aj);
    const double di = vi / tap * std::sin(ai + shift) - vj * std::sin(aj);
    CHECK(loss_kernel(vi * vi, vj * vj, wr, wi, tap, shift) == doctest::Approx(dr * dr + di * di));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int s = 0; s < 20000; ++s) {
        const double w_i = 0.5 + unit(rng), w_j = 0.5 + unit(rng);
        const double rad = std::sqrt(w_i * w_j * unit(rng));
        const double ph = 2.0 * std::numbers::pi * unit(rng);
        worst = std::min(worst, loss_kernel(w_i, w_j, rad * std::cos(ph), rad * std::sin(ph), 0.8 + 0.4 * unit(rng),
                                            unit(rng) - 0.5));
    }
    CHECK(worst >= -1e-10);
}

TEST_CASE("embedding a lifted AC point satisfies every model") {
    const Network net = case3_base();
    const auto points = sample_feasible_points(net, 20, 3);
    REQUIRE(points.size() == 20);
    for (RelaxKind kind : {RelaxKind::kSoc, RelaxKind::kNf, RelaxKind::kCp}) {
        const Relaxation relax = build(kind, net);
        for (const AcPoint& pt : points) {
            const auto x = embed(relax, net, lift(net, pt));
            CHECK(relax.model.max_violation(x) <= 1e-8);
            CHECK(relax.model.objective_value(x) == doctest::Approx(generation_cost(net, pt)));
        }
    }
}

}
