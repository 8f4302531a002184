#pragma once

// Small hand-made networks and random generators shared by the unit tests and
// the acceptance suite.

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "gridrelax/matpower_io.hpp"
#include "gridrelax/network.hpp"

namespace gridrelax::testing {

inline Network case3_base() { return load_fixture(Fixture::kCase3Base); }
inline Network case3_tight() { return load_fixture(Fixture::kCase3Tight); }

/// One bus carrying the demand and one generator.
inline Network one_bus(double pd, double c2, double c1, double c0) {
    Network net;
    net.name = "one_bus";
    net.buses.push_back({.id = 1, .pd = pd, .qd = 0.0, .vmin = 0.9, .vmax = 1.1});
    net.generators.push_back({.bus = 1, .pmin = 0.0, .pmax = 10.0, .qmin = -10.0, .qmax = 10.0,
                              .c2 = c2, .c1 = c1, .c0 = c0});
    net.reference_bus = 1;
    return net;
}

/// Generator at bus 1, demand at bus 2, one line between them.
inline Network two_bus(double r, double x, double b_charge, double pd, double qd) {
    Network net;
    net.name = "two_bus";
    net.buses.push_back({.id = 1, .vmin = 0.9, .vmax = 1.1});
    net.buses.push_back({.id = 2, .pd = pd, .qd = qd, .vmin = 0.9, .vmax = 1.1});
    net.branches.push_back({.from_bus = 1, .to_bus = 2, .r = r, .x = x, .b_charge = b_charge});
    net.generators.push_back({.bus = 1, .pmin = 0.0, .pmax = 10.0, .qmin = -10.0, .qmax = 10.0,
                              .c2 = 0.1, .c1 = 2.0, .c0 = 0.0});
    net.reference_bus = 1;
    return net;
}

/// Valid network with 1..6 buses, a spanning tree plus a few extra branches,
/// random transformers, ratings and polynomial costs. Values are drawn on a
/// coarse decimal grid so they survive a text round-trip unchanged.
inline Network random_network(std::mt19937_64& rng) {
    auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto grid = [&](double lo, double hi, double step) { return std::round(uniform(lo, hi) / step) * step; };
    auto coin = [&rng](double p) { return std::bernoulli_distribution(p)(rng); };
    constexpr double deg = std::numbers::pi / 180.0;

    Network net;
    net.name = "random_case";
    net.base_mva = coin(0.5) ? 100.0 : grid(10.0, 1000.0, 10.0);
    const int n = std::uniform_int_distribution<int>(1, 6)(rng);
    int next_id = std::uniform_int_distribution<int>(1, 20)(rng);
    for (int i = 0; i < n; ++i) {
        Bus bus;
        bus.id = next_id;
        next_id += std::uniform_int_distribution<int>(1, 5)(rng);
        bus.pd = grid(0.0, 2.0, 0.01);
        bus.qd = grid(-0.5, 1.0, 0.01);
        bus.gs = coin(0.2) ? grid(0.0, 0.1, 0.01) : 0.0;
        bus.bs = coin(0.2) ? grid(-0.2, 0.2, 0.01) : 0.0;
        bus.vmin = grid(0.85, 1.0, 0.01);
        bus.vmax = bus.vmin + grid(0.0, 0.2, 0.01);
        net.buses.push_back(bus);
    }
    net.reference_bus = net.buses[std::uniform_int_distribution<std::size_t>(0, net.buses.size() - 1)(rng)].id;

    auto add_branch = [&](int from, int to) {
        Branch br;
        br.from_bus = from;
        br.to_bus = to;
        br.r = grid(0.0, 0.1, 0.001);
        br.x = grid(0.01, 1.0, 0.001);
        br.b_charge = grid(0.0, 0.8, 0.01);
        if (coin(0.3)) br.s_max = grid(0.1, 3.0, 0.1);
        if (coin(0.2)) {
            br.tap = grid(0.9, 1.1, 0.01);
            br.shift = grid(-10.0, 10.0, 1.0) * deg;
        }
        br.angle_min = -grid(5.0, 60.0, 1.0) * deg;
        br.angle_max = grid(5.0, 60.0, 1.0) * deg;
        net.branches.push_back(br);
    };
    for (int i = 1; i < n; ++i) {
        const int parent = std::uniform_int_distribution<int>(0, i - 1)(rng);
        add_branch(net.buses[static_cast<std::size_t>(parent)].id, net.buses[static_cast<std::size_t>(i)].id);
    }
    if (n > 2) {
        for (int extra = std::uniform_int_distribution<int>(0, 2)(rng); extra > 0; --extra) {
            auto pick = std::uniform_int_distribution<std::size_t>(0, net.buses.size() - 1);
            const std::size_t a = pick(rng), b = pick(rng);
            if (a != b) add_branch(net.buses[a].id, net.buses[b].id);
        }
    }

    const int gens = std::uniform_int_distribution<int>(1, n + 1)(rng);
    for (int g = 0; g < gens; ++g) {
        Generator gen;
        gen.bus = net.buses[std::uniform_int_distribution<std::size_t>(0, net.buses.size() - 1)(rng)].id;
        gen.pmin = grid(0.0, 0.5, 0.01);
        gen.pmax = gen.pmin + grid(0.0, 5.0, 0.01);
        gen.qmin = -grid(0.0, 3.0, 0.01);
        gen.qmax = grid(0.0, 3.0, 0.01);
        gen.c2 = grid(0.0, 0.2, 0.001);
        gen.c1 = grid(0.0, 40.0, 0.1);
        gen.c0 = grid(0.0, 100.0, 1.0);
        net.generators.push_back(gen);
    }
    return net;
}

/// Demands scaled by [0.8, 1.2], series impedances by [0.5, 2].
inline Network perturb(const Network& base, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> demand(0.8, 1.2), impedance(0.5, 2.0);
    Network net = base;
    net.name = base.name + "_perturbed";
    for (Bus& bus : net.buses) {
        bus.pd *= demand(rng);
        bus.qd *= demand(rng);
    }
    for (Branch& br : net.branches) {
        br.r *= impedance(rng);
        br.x *= impedance(rng);
    }
    return net;
}

}  // namespace gridrelax::testing
