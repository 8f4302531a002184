#pragma once

// Per-unit transmission network model.
//
// All powers, admittances and limits are per-unit on Network::base_mva.
// Angles are radians. Generator cost coefficients keep their MW-argument
// meaning ($/h with P in MW), so the cost of a per-unit dispatch p is
// c2*(base_mva*p)^2 + c1*(base_mva*p) + c0.

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gridrelax {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Largest admissible |angle limit|; wider limits are clamped to it so that
/// tan() stays finite in the phase-angle-difference rows.
inline constexpr double kMaxAngleLimit = 1.5707963267948966 - 1e-3;

struct Bus {
    int id = 0;
    double pd = 0.0;
    double qd = 0.0;
    double gs = 0.0;
    double bs = 0.0;
    double vmin = 0.9;
    double vmax = 1.1;
};

/// A line or transformer. The from/to orientation fixes the side the tap
/// T = tap*exp(i*shift) sits on.
struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charge = 0.0;
    double tap = 1.0;
    double shift = 0.0;
    std::optional<double> s_max;
    double angle_min = -kMaxAngleLimit;
    double angle_max = kMaxAngleLimit;
};

struct Generator {
    int bus = 0;
    double pmin = 0.0;
    double pmax = kInf;
    double qmin = -kInf;
    double qmax = kInf;
    double c2 = 0.0;
    double c1 = 0.0;
    double c0 = 0.0;
};

struct Network {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    int reference_bus = 0;

    /// Position of bus `id` in `buses`; throws Error(kInvalidNetwork) if absent.
    std::size_t bus_index(int id) const;
    std::optional<std::size_t> find_bus(int id) const;

    /// Indices into `generators` of the units connected to bus `id`.
    std::vector<std::size_t> generators_at(int id) const;

    /// Generation cost in $/h for a per-unit dispatch of generator `g`.
    double generator_cost(std::size_t g, double pg_pu) const;
    double total_cost(const std::vector<double>& pg_pu) const;
};

/// Real-number constants derived from a branch: series admittance
/// Y = 1/Z = g + ib, rectangular tap T = tR + i tI, and ZT = tzR + i tzI.
struct BranchConstants {
    double g = 0.0;
    double b = 0.0;
    double tR = 1.0;
    double tI = 0.0;
    double tzR = 0.0;
    double tzI = 0.0;

    double tap_sq() const { return tR * tR + tI * tI; }
};

/// Throws Error(kDegenerateBranch) when r = x = 0.
BranchConstants branch_constants(const Branch& br);

/// Clamp an angle limit into [-kMaxAngleLimit, kMaxAngleLimit].
double clamp_angle_limit(double angle);

enum class Severity { kError, kWarning };

enum class DiagnosticCode {
    kNoBuses,
    kBadBaseMva,
    kDuplicateBusId,
    kReferenceMissing,
    kDanglingBranch,
    kDanglingGenerator,
    kBadVoltageLimits,
    kBadTap,
    kBadAngleLimits,
    kZeroImpedance,
    kBadGeneratorLimits,
    kNonconvexCost,
    kNonnegativeImpedanceViolated,
};

struct Diagnostic {
    Severity severity = Severity::kError;
    DiagnosticCode code = DiagnosticCode::kNoBuses;
    std::string message;
};

const char* to_string(DiagnosticCode code);

/// Structural and physical checks. The list is empty iff the network is fully
/// valid; a branch with r < 0 or x < 0 yields a kNonnegativeImpedanceViolated
/// warning (the linear relaxations lose soundness on such branches).
std::vector<Diagnostic> validate(const Network& net);

bool has_errors(const std::vector<Diagnostic>& diags);
bool has_impedance_warning(const std::vector<Diagnostic>& diags);

}  // namespace gridrelax
