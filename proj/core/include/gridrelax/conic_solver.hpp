#pragma once

// Solver contract for OptModel instances (linear rows + second-order cones,
// minimization) and the bundled interior-point implementation.

#include <string>
#include <string_view>
#include <vector>

#include "gridrelax/opt_model.hpp"

namespace gridrelax {

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericFailure };

std::string_view to_string(SolveStatus status);

struct SolverOptions {
    /// Internal stopping tolerances of the interior-point method.
    double feastol = 1e-8;
    double abstol = 1e-8;
    double reltol = 1e-8;
    int max_iterations = 200;
    /// An "optimal" answer must satisfy every model row to this absolute level.
    double report_tol = 1e-6;
    bool verbose = false;

    /// Defaults, with feastol/abstol/reltol overridden by GRIDRELAX_TOL when set.
    static SolverOptions from_environment();
};

struct SolveResult {
    SolveStatus status = SolveStatus::kNumericFailure;
    double objective = 0.0;
    std::vector<double> primal;
    double solve_time = 0.0;
    int iterations = 0;
    std::string message;

    bool optimal() const { return status == SolveStatus::kOptimal; }
    double value(VarRef v) const { return primal.at(static_cast<std::size_t>(v.index)); }
};

class ConicBackend {
public:
    virtual ~ConicBackend() = default;
    virtual std::string_view name() const = 0;
    /// Deterministic for identical inputs. Safe to call concurrently on
    /// distinct models.
    virtual SolveResult solve(const OptModel& model, const SolverOptions& options) const = 0;
};

/// Homogeneous self-dual primal-dual interior-point method with
/// Nesterov-Todd scaling and Mehrotra predictor-corrector steps. The KKT
/// system is factored with a sparse LDL' on a statically regularized
/// quasi-definite matrix followed by iterative refinement.
class InteriorPointBackend final : public ConicBackend {
public:
    std::string_view name() const override { return "ipm"; }
    SolveResult solve(const OptModel& model, const SolverOptions& options) const override;
};

SolveResult solve(const OptModel& model, const SolverOptions& options = SolverOptions{});

}  // namespace gridrelax
