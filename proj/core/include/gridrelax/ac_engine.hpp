#pragma once

// Exact (non-convex) AC power flow semantics: flow evaluation from complex
// voltages, feasibility checks, lifting into W-space and a brute-force grid
// oracle for desk-scale networks.

#include <cstdint>
#include <string>
#include <vector>

#include "gridrelax/network.hpp"
#include "gridrelax/relaxations.hpp"

namespace gridrelax {

/// Polar voltages per bus (same order as Network::buses) and dispatch per
/// generator, all per-unit / radians.
struct AcPoint {
    std::vector<double> vm, va;
    std::vector<double> pg, qg;
};

struct BranchFlow {
    double p_fr = 0.0, q_fr = 0.0;  // S_ij, into the branch at the from bus
    double p_to = 0.0, q_to = 0.0;  // S_ji, into the branch at the to bus
};

/// S_ij = (Y* - i bc/2)|V_i|^2/|T|^2 - Y* V_i V_j^* / T^*
/// S_ji = (Y* - i bc/2)|V_j|^2       - Y* V_i^* V_j / T
std::vector<BranchFlow> eval_flows(const Network& net, const AcPoint& pt);

struct FeasReport {
    bool feasible = true;
    std::vector<RowViolation> violations;
    double max_violation = 0.0;
};

/// KCL residuals, voltage limits, generator boxes, thermal circles and phase
/// angle differences, each reported when it exceeds `tol`.
FeasReport check_feasibility(const Network& net, const AcPoint& pt, double tol = 1e-6);

WPoint lift(const Network& net, const AcPoint& pt);

double generation_cost(const Network& net, const AcPoint& pt);

struct OracleOptions {
    int resolution = 21;
    int refine_rounds = 3;
    double feas_tol = 1e-4;
    /// 0 picks std::thread::hardware_concurrency().
    unsigned threads = 0;
};

struct OracleResult {
    AcPoint point;
    double objective = 0.0;
    std::uint64_t evaluated = 0;
    std::uint64_t feasible = 0;
};

inline constexpr std::size_t kOracleMaxBuses = 4;

/// Exhaustive grid search with refinement. Non-reference angles range over
/// +/- (hop distance to the reference) * max|angle limit|, magnitudes over
/// [vmin, vmax]. Buses whose generation is fixed (or absent) get their
/// angle/magnitude from a Newton projection onto the fixed-injection rows;
/// the remaining injections are assigned to generators cheapest first.
/// Throws kOracleTooLarge above kOracleMaxBuses buses and kOracleNoFeasible
/// if no grid point passes check_feasibility at feas_tol.
OracleResult grid_oracle(const Network& net, const OracleOptions& opts = {});

/// Random AC points feasible to `tol`, drawn uniformly over the oracle's box
/// and projected the same way. Deterministic for a given seed. May return
/// fewer than `count` points if the acceptance rate is very low.
std::vector<AcPoint> sample_feasible_points(const Network& net, std::size_t count, std::uint64_t seed,
                                            double tol = 1e-9);

}  // namespace gridrelax
