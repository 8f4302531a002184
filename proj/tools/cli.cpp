#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "gridrelax/error.hpp"
#include "gridrelax/matpower_io.hpp"
#include "gridrelax/opt_model.hpp"

namespace gridrelax::cli {

namespace {

constexpr RelaxKind kOrder[] = {RelaxKind::kSoc, RelaxKind::kNf, RelaxKind::kCp, RelaxKind::kTh};

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::optional<SolveStatus> parse_status(const std::string& s) {
    for (SolveStatus st : {SolveStatus::kOptimal, SolveStatus::kInfeasible, SolveStatus::kUnbounded,
                           SolveStatus::kNumericFailure}) {
        if (to_string(st) == s) return st;
    }
    return std::nullopt;
}

std::optional<BuildOptions> parse_flow_bounds(const std::string& s) {
    BuildOptions b;
    if (s == "unbounded") return b;
    if (s == "envelope") {
        b.flow_bounds = FlowBoundPolicy::kDemandEnvelope;
        return b;
    }
    return std::nullopt;
}

}  // namespace

LoadedCase load_case_arg(const std::string& arg) {
    if (arg == "case3_base") return {arg, load_fixture(Fixture::kCase3Base)};
    if (arg == "case3_tight") return {arg, load_fixture(Fixture::kCase3Tight)};
    Network net = load_case(arg);
    return {std::filesystem::path(arg).stem().string(), std::move(net)};
}

double gap_percent(double ac_reference, double objective) {
    return 100.0 * (ac_reference - objective) / ac_reference;
}

nlohmann::json to_json(const GapReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.relaxations) {
        rows.push_back({
            {"relaxation", std::string(to_string(r.kind))},
            {"status", std::string(to_string(r.status))},
            {"objective", r.objective ? nlohmann::json(*r.objective) : nlohmann::json(nullptr)},
            {"gap_percent", r.gap_percent ? nlohmann::json(*r.gap_percent) : nlohmann::json(nullptr)},
            {"solve_time", r.solve_time},
            {"message", r.message},
        });
    }
    return {
        {"schema", kGapReportSchema},
        {"case", report.case_name},
        {"ac_reference", {{"value", report.ac_reference}, {"provenance", report.provenance}}},
        {"relaxations", rows},
    };
}

GapReport gap_report_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != kGapReportSchema) throw std::runtime_error("not a gridrelax gap report");
    GapReport report;
    report.case_name = j.at("case").get<std::string>();
    report.ac_reference = j.at("ac_reference").at("value").get<double>();
    report.provenance = j.at("ac_reference").at("provenance").get<std::string>();
    for (const auto& row : j.at("relaxations")) {
        RelaxationResult r;
        const auto kind = parse_relax_kind(row.at("relaxation").get<std::string>());
        const auto status = parse_status(row.at("status").get<std::string>());
        if (!kind || !status) throw std::runtime_error("bad relaxation row in gap report");
        r.kind = *kind;
        r.status = *status;
        if (!row.at("objective").is_null()) r.objective = row.at("objective").get<double>();
        if (!row.at("gap_percent").is_null()) r.gap_percent = row.at("gap_percent").get<double>();
        r.solve_time = row.at("solve_time").get<double>();
        r.message = row.value("message", "");
        report.relaxations.push_back(std::move(r));
    }
    return report;
}

std::string format_table(const GapReport& report) {
    std::ostringstream os;
    os << "case " << report.case_name << ", AC reference " << fixed(report.ac_reference, 2) << " $/h ("
       << report.provenance << ")\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-10s %16s %9s  %-16s %9s\n", "relaxation", "objective ($/h)", "gap (%)",
                  "status", "time (s)");
    os << line;
    for (const auto& r : report.relaxations) {
        const std::string obj = r.objective ? fixed(*r.objective, 2) : "-";
        const std::string gap = r.gap_percent ? fixed(*r.gap_percent, 2) : "-";
        std::snprintf(line, sizeof(line), "%-10s %16s %9s  %-16s %9.4f\n", std::string(to_string(r.kind)).c_str(),
                      obj.c_str(), gap.c_str(), std::string(to_string(r.status)).c_str(), r.solve_time);
        os << line;
    }
    return os.str();
}

GapReport compute_gap_report(const LoadedCase& lc, double ac_reference, const std::string& provenance,
                             const SolverOptions& opts, const BuildOptions& build) {
    GapReport report;
    report.case_name = lc.name;
    report.ac_reference = ac_reference;
    report.provenance = provenance;

    std::vector<std::future<RelaxationResult>> jobs;
    for (RelaxKind kind : kOrder) {
        jobs.push_back(std::async(std::launch::async, [&lc, &opts, &build, kind, ac_reference] {
            RelaxationResult r;
            r.kind = kind;
            try {
                const Relaxation relax = gridrelax::build(kind, lc.net, build);
                const SolveResult res = solve(relax.model, opts);
                r.status = res.status;
                r.solve_time = res.solve_time;
                r.message = res.message;
                if (res.optimal()) {
                    r.objective = res.objective;
                    r.gap_percent = gap_percent(ac_reference, res.objective);
                }
            } catch (const Error& e) {
                r.status = SolveStatus::kNumericFailure;
                r.message = e.what();
            }
            return r;
        }));
    }
    for (auto& job : jobs) report.relaxations.push_back(job.get());
    return report;
}

int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err) {
    const auto kind = parse_relax_kind(args.relaxation);
    if (!kind) {
        err << "error: unknown relaxation '" << args.relaxation << "' (expected soc, nf, cp or th)\n";
        return kExitInput;
    }
    Relaxation relax;
    try {
        const LoadedCase lc = load_case_arg(args.case_arg);
        relax = gridrelax::build(*kind, lc.net, args.build);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
    if (!args.export_path.empty()) {
        std::ofstream f(args.export_path, std::ios::binary);
        f << export_text(relax.model);
        if (!f) {
            err << "error: cannot write " << args.export_path << "\n";
            return kExitInput;
        }
    }
    const SolveResult res = solve(relax.model, SolverOptions::from_environment());
    out << to_string(*kind) << " " << to_string(res.status);
    if (res.optimal()) out << " objective " << fixed(res.objective, 4) << " $/h";
    out << " (" << res.iterations << " iterations, " << fixed(res.solve_time, 4) << " s)\n";
    if (!res.optimal()) {
        err << "solver: " << res.message << "\n";
        return kExitSolver;
    }
    return kExitOk;
}

int cmd_gap(const GapArgs& args, std::ostream& out, std::ostream& err) {
    if (!args.ac_ref && !args.oracle) {
        err << "error: gap needs --ac-ref <value> or --oracle\n";
        return kExitInput;
    }
    LoadedCase lc;
    try {
        lc = load_case_arg(args.case_arg);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }

    double reference = 0.0;
    std::string provenance;
    if (args.ac_ref) {
        reference = *args.ac_ref;
        provenance = "user";
    } else {
        try {
            OracleOptions oo;
            oo.resolution = args.resolution;
            oo.refine_rounds = args.refine_rounds;
            reference = grid_oracle(lc.net, oo).objective;
            provenance = "oracle";
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
            if (e.code() == ErrorCode::kOracleTooLarge) err << "hint: pass --ac-ref for larger networks\n";
            return e.code() == ErrorCode::kOracleNoFeasible ? kExitSolver : kExitInput;
        }
    }
    if (!(reference != 0.0) || !std::isfinite(reference)) {
        err << "error: AC reference must be finite and nonzero\n";
        return kExitInput;
    }

    const GapReport report = compute_gap_report(lc, reference, provenance, SolverOptions::from_environment(), args.build);
    const std::string json = to_json(report).dump(2) + "\n";
    if (args.json_path == "-") {
        out << json;
    } else {
        out << format_table(report);
        if (!args.json_path.empty()) {
            std::ofstream f(args.json_path, std::ios::binary);
            f << json;
            if (!f) {
                err << "error: cannot write " << args.json_path << "\n";
                return kExitInput;
            }
        }
    }
    for (const auto& r : report.relaxations) {
        if (r.status != SolveStatus::kOptimal) {
            err << to_string(r.kind) << ": " << r.message << "\n";
            return kExitSolver;
        }
    }
    return kExitOk;
}

ContainmentSummary check_containment(const Network& net, const std::vector<AcPoint>& points, double tol) {
    ContainmentSummary sum;
    sum.points = points.size();
    sum.min_line_loss = std::numeric_limits<double>::infinity();
    std::vector<Relaxation> models;
    models.push_back(build_soc(net));
    sum.linear_models_checked = !has_impedance_warning(validate(net));
    if (sum.linear_models_checked) {
        models.push_back(build_nf(net));
        models.push_back(build_cp(net));
    }
    for (const AcPoint& pt : points) {
        const WPoint wp = lift(net, pt);
        for (const Relaxation& relax : models) {
            const std::vector<double> x = embed(relax, net, wp);
            for (const auto& v : relax.model.violations(x, 0.0)) {
                if (v.magnitude > tol) ++sum.violations;
                if (v.magnitude > sum.worst) {
                    sum.worst = v.magnitude;
                    sum.worst_tag = std::string(to_string(relax.kind)) + ":" + v.tag;
                }
            }
        }
        for (std::size_t k = 0; k < net.branches.size(); ++k) {
            const std::size_t fi = net.bus_index(net.branches[k].from_bus);
            const std::size_t ti = net.bus_index(net.branches[k].to_bus);
            const double defect = std::abs(wp.wr[k] * wp.wr[k] + wp.wi[k] * wp.wi[k] - wp.w[fi] * wp.w[ti]);
            sum.worst_rank1_defect = std::max(sum.worst_rank1_defect, defect);
            if (net.branches[k].r >= 0.0) {
                sum.min_line_loss = std::min(sum.min_line_loss, wp.p_fr[k] + wp.p_to[k]);
            }
        }
    }
    if (!std::isfinite(sum.min_line_loss)) sum.min_line_loss = 0.0;
    return sum;
}

KernelSummary sample_loss_kernel(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double pi = std::acos(-1.0);
    KernelSummary sum;
    sum.samples = samples;
    sum.min_value = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < samples; ++s) {
        const double w_i = 0.2 + 2.0 * unit(rng);
        const double w_j = 0.2 + 2.0 * unit(rng);
        const double tap = 0.5 + 1.5 * unit(rng);
        const double shift = (2.0 * unit(rng) - 1.0) * pi;
        // A quarter of the draws sit on the cone boundary; half of those also
        // align W_ij T with the real axis, where the kernel is a square.
        const double radius = std::sqrt(w_i * w_j) * (s % 4 == 0 ? 1.0 : std::sqrt(unit(rng)));
        const double phase = s % 8 == 0 ? -shift : (2.0 * unit(rng) - 1.0) * pi;
        const double value = loss_kernel(w_i, w_j, radius * std::cos(phase), radius * std::sin(phase), tap, shift);
        sum.min_value = std::min(sum.min_value, value);
    }
    if (samples == 0) sum.min_value = 0.0;
    return sum;
}

ThExhibit th_negative_loss(const Network& net, const SolverOptions& opts) {
    ThExhibit ex;
    const Relaxation relax = build_th(net);
    const SolveResult res = solve(relax.model, opts);
    ex.status = res.status;
    if (!res.optimal()) return ex;
    ex.objective = res.objective;
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const double loss = res.value(relax.vars.p_fr[k]) + res.value(relax.vars.p_to[k]);
        if (ex.min_loss_branch.empty() || loss < ex.min_loss) {
            ex.min_loss = loss;
            ex.min_loss_branch = std::to_string(net.branches[k].from_bus) + "-" + std::to_string(net.branches[k].to_bus);
        }
    }
    return ex;
}

int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
    LoadedCase lc;
    try {
        lc = load_case_arg(args.case_arg);
        if (has_errors(validate(lc.net))) throw Error(ErrorCode::kInvalidNetwork, "network fails validation");
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
    const Network& net = lc.net;
    bool ok = true;
    auto line = [&](bool pass, const std::string& what) {
        out << (pass ? "PASS " : "FAIL ") << what << "\n";
        ok = ok && pass;
    };
    constexpr double kContainTol = 1e-8;

    if (net.buses.size() > kOracleMaxBuses) {
        out << "SKIP sampled checks: more than " << kOracleMaxBuses << " buses\n";
    } else {
        const auto points = sample_feasible_points(net, args.samples, args.seed);
        line(points.size() == args.samples,
             "sampling: " + std::to_string(points.size()) + " of " + std::to_string(args.samples) +
                 " AC-feasible points");
        const ContainmentSummary c = check_containment(net, points, kContainTol);
        std::ostringstream msg;
        msg << "containment AC -> SOC" << (c.linear_models_checked ? " -> NF -> CP" : " (NF/CP skipped: negative impedance)")
            << ": " << c.points << " points, " << c.violations << " violations above " << kContainTol;
        if (c.worst > 0.0) msg << " (worst " << c.worst << " at " << c.worst_tag << ")";
        line(c.violations == 0, msg.str());
        std::ostringstream r1;
        r1 << "rank-1 lift: max |wr^2 + wi^2 - w_i w_j| = " << c.worst_rank1_defect;
        line(c.worst_rank1_defect <= 1e-12, r1.str());
        std::ostringstream loss;
        loss << "line losses at AC points: min p_ij + p_ji = " << c.min_line_loss;
        line(c.min_line_loss >= -1e-10, loss.str());
    }

    const KernelSummary k = sample_loss_kernel(args.kernel_samples, args.seed);
    std::ostringstream km;
    km << "loss kernel: " << k.samples << " samples, min " << k.min_value;
    line(k.min_value >= -1e-10, km.str());

    if (!net.branches.empty() && !has_impedance_warning(validate(net))) {
        const ThExhibit th = th_negative_loss(net, SolverOptions::from_environment());
        if (th.status == SolveStatus::kOptimal) {
            out << "INFO TH optimum " << fixed(th.objective, 2) << " $/h, most negative line loss " << th.min_loss
                << " pu on " << th.min_loss_branch << (th.min_loss < -1e-6 ? " (power created on a line)" : "")
                << "\n";
        } else {
            out << "INFO TH solve ended with " << to_string(th.status) << "\n";
        }
    }
    out << (ok ? "verification passed" : "verification FAILED") << "\n";
    return ok ? kExitOk : kExitVerify;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Convex relaxations of AC optimal power flow"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    std::string solve_bounds = "unbounded";
    auto* solve_cmd = app.add_subcommand("solve", "Build and solve one relaxation");
    solve_cmd->add_option("case", solve_args.case_arg, "Case file or fixture name (case3_base, case3_tight)")->required();
    solve_cmd->add_option("-r,--relaxation", solve_args.relaxation, "soc, nf, cp or th")->capture_default_str();
    solve_cmd->add_option("--export", solve_args.export_path, "Write the conic model listing to this file");
    solve_cmd->add_option("--flow-bounds", solve_bounds, "Box for unrated lines: unbounded or envelope")
        ->capture_default_str();

    GapArgs gap_args;
    std::string gap_bounds = "unbounded";
    double ac_ref = 0.0;
    auto* gap_cmd = app.add_subcommand("gap", "Optimality gaps of all relaxations against an AC reference");
    gap_cmd->add_option("case", gap_args.case_arg, "Case file or fixture name")->required();
    auto* ref_opt = gap_cmd->add_option("--ac-ref", ac_ref, "AC objective in $/h");
    auto* oracle_flag = gap_cmd->add_flag("--oracle", gap_args.oracle, "Compute the reference with the grid oracle");
    ref_opt->excludes(oracle_flag);
    gap_cmd->add_option("--resolution", gap_args.resolution, "Oracle grid points per axis")->capture_default_str();
    gap_cmd->add_option("--rounds", gap_args.refine_rounds, "Oracle refinement rounds")->capture_default_str();
    gap_cmd->add_option("--json", gap_args.json_path, "Write the JSON report here ('-' for stdout)");
    gap_cmd->add_option("--flow-bounds", gap_bounds, "Box for unrated lines: unbounded or envelope")
        ->capture_default_str();

    VerifyArgs verify_args;
    auto* verify_cmd = app.add_subcommand("verify", "Numerical checks of the relaxation hierarchy");
    verify_cmd->add_option("case", verify_args.case_arg, "Case file or fixture name")->required();
    verify_cmd->add_option("--samples", verify_args.samples, "Sampled AC-feasible points")->capture_default_str();
    verify_cmd->add_option("--kernel-samples", verify_args.kernel_samples, "Loss kernel samples")
        ->capture_default_str();
    verify_cmd->add_option("--seed", verify_args.seed, "Random seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    if (*solve_cmd) {
        const auto b = parse_flow_bounds(solve_bounds);
        if (!b) {
            err << "error: --flow-bounds must be unbounded or envelope\n";
            return kExitInput;
        }
        solve_args.build = *b;
        return cmd_solve(solve_args, out, err);
    }
    if (*gap_cmd) {
        const auto b = parse_flow_bounds(gap_bounds);
        if (!b) {
            err << "error: --flow-bounds must be unbounded or envelope\n";
            return kExitInput;
        }
        gap_args.build = *b;
        if (ref_opt->count() > 0) gap_args.ac_ref = ac_ref;
        return cmd_gap(gap_args, out, err);
    }
    return cmd_verify(verify_args, out, err);
}

}  // namespace gridrelax::cli
