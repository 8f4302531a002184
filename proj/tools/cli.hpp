#pragma once

// Command implementations behind the `gridrelax` executable. Kept in a
// library so the tests and the acceptance suite drive the same code paths.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridrelax/ac_engine.hpp"
#include "gridrelax/conic_solver.hpp"
#include "gridrelax/network.hpp"
#include "gridrelax/relaxations.hpp"

namespace gridrelax::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitInput = 1,     // parse or validation failure
    kExitSolver = 2,    // a solve did not reach optimality
    kExitVerify = 3,    // a verification check failed
};

inline constexpr const char* kGapReportSchema = "gridrelax.gap_report/1";

struct LoadedCase {
    std::string name;
    Network net;
};

/// "case3_base" / "case3_tight" name the embedded fixtures; anything else is
/// read as a file path.
LoadedCase load_case_arg(const std::string& arg);

/// (ac_reference - objective) / ac_reference, in percent.
double gap_percent(double ac_reference, double objective);

struct RelaxationResult {
    RelaxKind kind = RelaxKind::kSoc;
    SolveStatus status = SolveStatus::kNumericFailure;
    std::optional<double> objective;
    std::optional<double> gap_percent;
    double solve_time = 0.0;
    std::string message;
};

struct GapReport {
    std::string case_name;
    double ac_reference = 0.0;
    std::string provenance;  // "user" or "oracle"
    std::vector<RelaxationResult> relaxations;  // SOC, NF, CP, TH
};

nlohmann::json to_json(const GapReport& report);
/// Inverse of to_json; throws std::runtime_error on schema mismatch.
GapReport gap_report_from_json(const nlohmann::json& j);
std::string format_table(const GapReport& report);

/// Solves the four relaxations (concurrently) and fills in the gaps. A
/// relaxation the network cannot support (MODEL_UNSOUND) is reported with
/// status numeric_failure and the error text.
GapReport compute_gap_report(const LoadedCase& lc, double ac_reference, const std::string& provenance,
                             const SolverOptions& opts, const BuildOptions& build = {});

struct SolveArgs {
    std::string case_arg;
    std::string relaxation = "soc";
    std::string export_path;
    BuildOptions build;
};

struct GapArgs {
    std::string case_arg;
    std::optional<double> ac_ref;
    bool oracle = false;
    int resolution = 21;
    int refine_rounds = 3;
    std::string json_path;  // "-" writes JSON to stdout instead of the table
    BuildOptions build;
};

struct VerifyArgs {
    std::string case_arg;
    std::size_t samples = 1000;
    std::size_t kernel_samples = 100000;
    std::uint64_t seed = 1;
};

int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err);
int cmd_gap(const GapArgs& args, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err);

/// Full command-line entry point (argument parsing included).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Checks shared by `verify` and the acceptance suite.

struct ContainmentSummary {
    std::size_t points = 0;
    std::size_t violations = 0;        // rows above tolerance, summed over models
    double worst = 0.0;                // largest violation seen
    std::string worst_tag;
    double worst_rank1_defect = 0.0;   // max |wr^2 + wi^2 - w_i w_j|
    double min_line_loss = 0.0;        // min p_ij + p_ji over branches with r >= 0
    bool linear_models_checked = false;
};

/// Lifts each point and substitutes it into the SOC model and, when the
/// network has nonnegative impedances, the NF and CP models.
ContainmentSummary check_containment(const Network& net, const std::vector<AcPoint>& points, double tol);

struct KernelSummary {
    std::size_t samples = 0;
    double min_value = 0.0;
};

/// Random (w_i, w_j, wr, wi, tap, shift) with wr^2 + wi^2 <= w_i w_j,
/// evaluated with loss_kernel().
KernelSummary sample_loss_kernel(std::size_t samples, std::uint64_t seed);

struct ThExhibit {
    SolveStatus status = SolveStatus::kNumericFailure;
    double objective = 0.0;
    double min_loss = 0.0;
    std::string min_loss_branch;
};

/// Solves TH and reports the most negative p_ij + p_ji at its optimum.
ThExhibit th_negative_loss(const Network& net, const SolverOptions& opts);

}  // namespace gridrelax::cli
