#pragma once

// Builders for the convex relaxations of the AC power flow problem.
//
//   SOC  lifted W-space model with |W_ij|^2 <= W_i W_j
//   NF   network flow model: KCL, nonnegative line losses, linear PAD rows
//   CP   copper plate: one aggregated active and one reactive balance row
//   TH   NF with the loss inequalities replaced by two valid equalities
//
// For networks with r, x >= 0 the models satisfy CP <= NF <= SOC <= AC.
// Everything is written in rectangular real coordinates.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gridrelax/network.hpp"
#include "gridrelax/opt_model.hpp"

namespace gridrelax {

enum class RelaxKind { kSoc, kNf, kCp, kTh };

std::string_view to_string(RelaxKind kind);
std::optional<RelaxKind> parse_relax_kind(std::string_view text);

/// How flow variables are boxed on branches without a thermal limit.
enum class FlowBoundPolicy {
    /// No box: only rated branches get the +/- s_max box.
    kUnbounded,
    /// +/- (sum |pd| + sum |qd| + sum b_charge) on every unrated branch.
    kDemandEnvelope,
};

struct BuildOptions {
    FlowBoundPolicy flow_bounds = FlowBoundPolicy::kUnbounded;
};

struct Interval {
    double lower = -kInf;
    double upper = kInf;
};

/// Box shared by p_ij, q_ij, p_ji and q_ji.
struct FlowBox {
    Interval p;
    Interval q;
};

/// +/- s_max on both components when the branch is rated (s_max > 0);
/// otherwise the policy fallback.
FlowBox infer_flow_bounds(const Network& net, const Branch& br,
                          FlowBoundPolicy policy = FlowBoundPolicy::kUnbounded);

/// [vmin^2, vmax^2].
Interval infer_w_bounds(const Bus& bus);

/// Variables of a built relaxation. Vectors not used by a model stay empty.
struct VarMap {
    std::vector<VarRef> pg, qg;            // per generator
    std::vector<VarRef> cost_epigraph;     // per generator, invalid when c2 == 0
    std::vector<VarRef> w;                 // per bus
    std::vector<VarRef> p_fr, q_fr;        // per branch, from side
    std::vector<VarRef> p_to, q_to;        // per branch, to side
    std::vector<VarRef> wr, wi;            // per branch, SOC only
};

struct Relaxation {
    RelaxKind kind = RelaxKind::kSoc;
    OptModel model;
    VarMap vars;
};

/// Lifted operating point: W_i, W_ij = wr + i wi and directed flows, plus the
/// generator dispatch that goes with it.
struct WPoint {
    std::vector<double> w;
    std::vector<double> wr, wi;
    std::vector<double> p_fr, q_fr, p_to, q_to;
    std::vector<double> pg, qg;
};

/// Throws Error(kModelUnsound) when validate() reports errors, or, for NF, CP
/// and TH, a negative-impedance branch.
Relaxation build_cp(const Network& net, const BuildOptions& opts = {});
Relaxation build_nf(const Network& net, const BuildOptions& opts = {});
Relaxation build_th(const Network& net, const BuildOptions& opts = {});
Relaxation build_soc(const Network& net, const BuildOptions& opts = {});
Relaxation build(RelaxKind kind, const Network& net, const BuildOptions& opts = {});

/// Variable vector of `relax` holding the values of `pt`; epigraph variables
/// are set to their tight value c2*(base*pg)^2.
std::vector<double> embed(const Relaxation& relax, const Network& net, const WPoint& pt);

/// Real expansion of W_i/|T|^2 - W_ij/T* - W_ij^*/T + W_j, the quantity that
/// multiplies Y* in the line-loss identity. Nonnegative whenever
/// wr^2 + wi^2 <= w_i w_j.
double loss_kernel(double w_i, double w_j, double wr, double wi, double tap, double shift);

}  // namespace gridrelax
