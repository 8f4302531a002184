#include "gridrelax/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "gridrelax/error.hpp"

namespace gridrelax {

std::optional<std::size_t> Network::find_bus(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) return i;
    }
    return std::nullopt;
}

std::size_t Network::bus_index(int id) const {
    if (auto idx = find_bus(id)) return *idx;
    throw Error(ErrorCode::kInvalidNetwork, "unknown bus id " + std::to_string(id));
}

std::vector<std::size_t> Network::generators_at(int id) const {
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < generators.size(); ++g) {
        if (generators[g].bus == id) out.push_back(g);
    }
    return out;
}

double Network::generator_cost(std::size_t g, double pg_pu) const {
    const Generator& gen = generators.at(g);
    const double mw = base_mva * pg_pu;
    return gen.c2 * mw * mw + gen.c1 * mw + gen.c0;
}

double Network::total_cost(const std::vector<double>& pg_pu) const {
    double cost = 0.0;
    for (std::size_t g = 0; g < generators.size() && g < pg_pu.size(); ++g) {
        cost += generator_cost(g, pg_pu[g]);
    }
    return cost;
}

BranchConstants branch_constants(const Branch& br) {
    const double zsq = br.r * br.r + br.x * br.x;
    if (!(zsq > 0.0)) {
        std::ostringstream os;
        os << "branch " << br.from_bus << "-" << br.to_bus << " has zero impedance";
        throw Error(ErrorCode::kDegenerateBranch, os.str());
    }
    BranchConstants k;
    k.g = br.r / zsq;
    k.b = -br.x / zsq;
    k.tR = br.tap * std::cos(br.shift);
    k.tI = br.tap * std::sin(br.shift);
    k.tzR = br.r * k.tR - br.x * k.tI;
    k.tzI = br.r * k.tI + br.x * k.tR;
    return k;
}

double clamp_angle_limit(double angle) {
    return std::clamp(angle, -kMaxAngleLimit, kMaxAngleLimit);
}

const char* to_string(DiagnosticCode code) {
    switch (code) {
        case DiagnosticCode::kNoBuses: return "NO_BUSES";
        case DiagnosticCode::kBadBaseMva: return "BAD_BASE_MVA";
        case DiagnosticCode::kDuplicateBusId: return "DUPLICATE_BUS_ID";
        case DiagnosticCode::kReferenceMissing: return "REFERENCE_MISSING";
        case DiagnosticCode::kDanglingBranch: return "DANGLING_BRANCH";
        case DiagnosticCode::kDanglingGenerator: return "DANGLING_GENERATOR";
        case DiagnosticCode::kBadVoltageLimits: return "BAD_VOLTAGE_LIMITS";
        case DiagnosticCode::kBadTap: return "BAD_TAP";
        case DiagnosticCode::kBadAngleLimits: return "BAD_ANGLE_LIMITS";
        case DiagnosticCode::kZeroImpedance: return "ZERO_IMPEDANCE";
        case DiagnosticCode::kBadGeneratorLimits: return "BAD_GENERATOR_LIMITS";
        case DiagnosticCode::kNonconvexCost: return "NONCONVEX_COST";
        case DiagnosticCode::kNonnegativeImpedanceViolated: return "NONNEGATIVE_IMPEDANCE_VIOLATED";
    }
    return "UNKNOWN";
}

namespace {

std::string branch_label(const Branch& br, std::size_t k) {
    std::ostringstream os;
    os << "branch #" << k << " (" << br.from_bus << "-" << br.to_bus << ")";
    return os.str();
}

}  // namespace

std::vector<Diagnostic> validate(const Network& net) {
    std::vector<Diagnostic> out;
    auto error = [&out](DiagnosticCode c, std::string msg) {
        out.push_back({Severity::kError, c, std::move(msg)});
    };

    if (net.buses.empty()) error(DiagnosticCode::kNoBuses, "network has no buses");
    if (!(net.base_mva > 0.0)) error(DiagnosticCode::kBadBaseMva, "base_mva must be positive");

    std::set<int> ids;
    for (const Bus& bus : net.buses) {
        if (!ids.insert(bus.id).second) {
            error(DiagnosticCode::kDuplicateBusId, "duplicate bus id " + std::to_string(bus.id));
        }
        if (!(bus.vmin > 0.0 && bus.vmin <= bus.vmax)) {
            error(DiagnosticCode::kBadVoltageLimits,
                  "bus " + std::to_string(bus.id) + " needs 0 < vmin <= vmax");
        }
    }
    if (!net.buses.empty() && !ids.count(net.reference_bus)) {
        error(DiagnosticCode::kReferenceMissing,
              "reference bus " + std::to_string(net.reference_bus) + " does not exist");
    }

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const std::string label = branch_label(br, k);
        if (!ids.count(br.from_bus) || !ids.count(br.to_bus)) {
            error(DiagnosticCode::kDanglingBranch, label + " references a missing bus");
        }
        if (!(br.tap > 0.0)) error(DiagnosticCode::kBadTap, label + " needs tap > 0");
        if (!(br.angle_min > -kMaxAngleLimit - 1e-12 && br.angle_min <= 0.0 && 0.0 <= br.angle_max &&
              br.angle_max < kMaxAngleLimit + 1e-12)) {
            error(DiagnosticCode::kBadAngleLimits,
                  label + " needs -pi/2 < angle_min <= 0 <= angle_max < pi/2");
        }
        if (!(br.r * br.r + br.x * br.x > 0.0)) {
            error(DiagnosticCode::kZeroImpedance, label + " has zero impedance");
        }
        if (br.r < 0.0 || br.x < 0.0) {
            out.push_back({Severity::kWarning, DiagnosticCode::kNonnegativeImpedanceViolated,
                           label + " has a negative impedance component; NF/CP/TH are unsound"});
        }
    }

    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const Generator& gen = net.generators[g];
        const std::string label = "generator #" + std::to_string(g);
        if (!ids.count(gen.bus)) {
            error(DiagnosticCode::kDanglingGenerator, label + " references a missing bus");
        }
        if (!(gen.pmin <= gen.pmax) || !(gen.qmin <= gen.qmax)) {
            error(DiagnosticCode::kBadGeneratorLimits, label + " has inverted limits");
        }
        if (gen.c2 < 0.0) error(DiagnosticCode::kNonconvexCost, label + " has c2 < 0");
    }
    return out;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::kError; });
}

bool has_impedance_warning(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
        return d.code == DiagnosticCode::kNonnegativeImpedanceViolated;
    });
}

}  // namespace gridrelax
