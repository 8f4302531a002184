#include "gridrelax/relaxations.hpp"

#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "gridrelax/error.hpp"

namespace gridrelax {

std::string_view to_string(RelaxKind kind) {
    switch (kind) {
        case RelaxKind::kSoc: return "SOC";
        case RelaxKind::kNf: return "NF";
        case RelaxKind::kCp: return "CP";
        case RelaxKind::kTh: return "TH";
    }
    return "?";
}

std::optional<RelaxKind> parse_relax_kind(std::string_view text) {
    if (text == "soc" || text == "SOC") return RelaxKind::kSoc;
    if (text == "nf" || text == "NF") return RelaxKind::kNf;
    if (text == "cp" || text == "CP") return RelaxKind::kCp;
    if (text == "th" || text == "TH") return RelaxKind::kTh;
    return std::nullopt;
}

FlowBox infer_flow_bounds(const Network& net, const Branch& br, FlowBoundPolicy policy) {
    if (br.s_max && *br.s_max > 0.0) {
        const double s = *br.s_max;
        return {{-s, s}, {-s, s}};
    }
    if (policy == FlowBoundPolicy::kUnbounded) return {};
    double envelope = 0.0;
    for (const Bus& bus : net.buses) envelope += std::abs(bus.pd) + std::abs(bus.qd);
    for (const Branch& other : net.branches) envelope += std::abs(other.b_charge);
    return {{-envelope, envelope}, {-envelope, envelope}};
}

Interval infer_w_bounds(const Bus& bus) { return {bus.vmin * bus.vmin, bus.vmax * bus.vmax}; }

double loss_kernel(double w_i, double w_j, double wr, double wi, double tap, double shift) {
    const double tR = tap * std::cos(shift);
    const double tI = tap * std::sin(shift);
    const double t2 = tap * tap;
    return w_i / t2 + w_j - 2.0 * (wr * tR - wi * tI) / t2;
}

namespace {

// "i,j" for branch k, with "#n" appended for the n-th parallel copy.
std::vector<std::string> branch_labels(const Network& net) {
    std::vector<std::string> labels;
    std::map<std::pair<int, int>, int> seen;
    for (const Branch& br : net.branches) {
        const int copy = seen[{br.from_bus, br.to_bus}]++;
        std::string label = std::to_string(br.from_bus) + "," + std::to_string(br.to_bus);
        if (copy > 0) label += "#" + std::to_string(copy);
        labels.push_back(std::move(label));
    }
    return labels;
}

std::string reversed_label(const Branch& br, const std::string& label) {
    std::string rev = std::to_string(br.to_bus) + "," + std::to_string(br.from_bus);
    if (const auto hash = label.find('#'); hash != std::string::npos) rev += label.substr(hash);
    return rev;
}

void check_soundness(const Network& net, RelaxKind kind) {
    const auto diags = validate(net);
    if (has_errors(diags)) {
        std::string msg = "network is invalid:";
        for (const auto& d : diags) {
            if (d.severity == Severity::kError) msg += " " + d.message + ";";
        }
        throw Error(ErrorCode::kModelUnsound, msg);
    }
    if (kind != RelaxKind::kSoc && has_impedance_warning(diags)) {
        throw Error(ErrorCode::kModelUnsound,
                    std::string(to_string(kind)) + " requires r >= 0 and x >= 0 on every branch");
    }
}

// Adds the row, or checks the constant inequality when every coefficient
// vanished (e.g. an isolated bus without generation).
void add_row_checked(OptModel& m, AffineExpr expr, RowSense sense, double rhs, const std::string& tag) {
    expr.canonicalize();
    if (!expr.terms().empty()) {
        m.add_row(std::move(expr), sense, rhs, tag);
        return;
    }
    const double lhs = expr.constant();
    const bool ok = sense == RowSense::kLessEqual      ? lhs <= rhs + 1e-12
                    : sense == RowSense::kGreaterEqual ? lhs >= rhs - 1e-12
                                                       : std::abs(lhs - rhs) <= 1e-12;
    if (!ok) throw Error(ErrorCode::kModelUnsound, "row " + tag + " is infeasible with no free variables");
}

class Builder {
public:
    Builder(const Network& net, RelaxKind kind, const BuildOptions& opts)
        : net_(net), opts_(opts), labels_(branch_labels(net)) {
        check_soundness(net, kind);
        relax_.kind = kind;
        for (const Branch& br : net.branches) consts_.push_back(branch_constants(br));
    }

    void add_generators() {
        VarMap& v = relax_.vars;
        AffineExpr objective;
        for (std::size_t g = 0; g < net_.generators.size(); ++g) {
            const Generator& gen = net_.generators[g];
            const std::string id = std::to_string(g);
            v.pg.push_back(model().add_variable("pg[" + id + "]", gen.pmin, gen.pmax));
            v.qg.push_back(model().add_variable("qg[" + id + "]", gen.qmin, gen.qmax));
            const std::size_t before = model().num_variables();
            objective += add_quadratic_cost_epigraph(model(), v.pg.back(), gen.c2, gen.c1, gen.c0, net_.base_mva);
            v.cost_epigraph.push_back(model().num_variables() > before
                                          ? VarRef{static_cast<int>(model().num_variables() - 1)}
                                          : VarRef{});
        }
        model().set_objective(std::move(objective));
    }

    void add_voltages() {
        for (const Bus& bus : net_.buses) {
            const Interval iv = infer_w_bounds(bus);
            relax_.vars.w.push_back(model().add_variable("w[" + std::to_string(bus.id) + "]", iv.lower, iv.upper));
        }
    }

    void add_flows() {
        VarMap& v = relax_.vars;
        for (std::size_t k = 0; k < net_.branches.size(); ++k) {
            const Branch& br = net_.branches[k];
            const FlowBox box = infer_flow_bounds(net_, br, opts_.flow_bounds);
            const std::string fr = labels_[k];
            const std::string to = reversed_label(br, fr);
            v.p_fr.push_back(model().add_variable("p[" + fr + "]", box.p.lower, box.p.upper));
            v.q_fr.push_back(model().add_variable("q[" + fr + "]", box.q.lower, box.q.upper));
            v.p_to.push_back(model().add_variable("p[" + to + "]", box.p.lower, box.p.upper));
            v.q_to.push_back(model().add_variable("q[" + to + "]", box.q.lower, box.q.upper));
        }
    }

    void add_kcl() {
        const VarMap& v = relax_.vars;
        for (std::size_t i = 0; i < net_.buses.size(); ++i) {
            const Bus& bus = net_.buses[i];
            AffineExpr p, q;
            for (std::size_t g : net_.generators_at(bus.id)) {
                p.add(v.pg[g], 1.0);
                q.add(v.qg[g], 1.0);
            }
            p.add(v.w[i], -bus.gs);
            q.add(v.w[i], bus.bs);
            for (std::size_t k = 0; k < net_.branches.size(); ++k) {
                const Branch& br = net_.branches[k];
                if (br.from_bus == bus.id) {
                    p.add(v.p_fr[k], -1.0);
                    q.add(v.q_fr[k], -1.0);
                }
                if (br.to_bus == bus.id) {
                    p.add(v.p_to[k], -1.0);
                    q.add(v.q_to[k], -1.0);
                }
            }
            const std::string id = std::to_string(bus.id);
            add_row_checked(model(), std::move(p), RowSense::kEqual, bus.pd, "kcl_p[" + id + "]");
            add_row_checked(model(), std::move(q), RowSense::kEqual, bus.qd, "kcl_q[" + id + "]");
        }
    }

    // (b_charge/2) * (w_i/t^2 + w_j), the charging term of the loss rows.
    AffineExpr charging(std::size_t k, double scale) const {
        const Branch& br = net_.branches[k];
        const double half = br.b_charge / 2.0 * scale;
        AffineExpr e;
        e.add(w_from(k), half / consts_[k].tap_sq());
        e.add(w_to(k), half);
        return e;
    }

    void add_nf_losses() {
        const VarMap& v = relax_.vars;
        for (std::size_t k = 0; k < net_.branches.size(); ++k) {
            AffineExpr p;
            p.add(v.p_fr[k], 1.0).add(v.p_to[k], 1.0);
            model().add_row(std::move(p), RowSense::kGreaterEqual, 0.0, "nf_loss_p[" + labels_[k] + "]");
            AffineExpr q = charging(k, 1.0);
            q.add(v.q_fr[k], 1.0).add(v.q_to[k], 1.0);
            model().add_row(std::move(q), RowSense::kGreaterEqual, 0.0, "nf_loss_q[" + labels_[k] + "]");
        }
    }

    // b P + g Q = -g (b_charge/2)(w_i/t^2 + w_j)  and
    // g (p_ij - p_ji) - b (q_ij - q_ji) = (g^2 + b^2 + b b_charge/2)(w_i/t^2 - w_j).
    void add_th_equalities() {
        const VarMap& v = relax_.vars;
        for (std::size_t k = 0; k < net_.branches.size(); ++k) {
            const BranchConstants& bc = consts_[k];
            const Branch& br = net_.branches[k];
            AffineExpr sum = charging(k, bc.g);
            sum.add(v.p_fr[k], bc.b).add(v.p_to[k], bc.b).add(v.q_fr[k], bc.g).add(v.q_to[k], bc.g);
            add_row_checked(model(), std::move(sum), RowSense::kEqual, 0.0, "th_loss_eq[" + labels_[k] + "]");

            const double coef = bc.g * bc.g + bc.b * bc.b + bc.b * br.b_charge / 2.0;
            AffineExpr diff;
            diff.add(v.p_fr[k], bc.g).add(v.p_to[k], -bc.g).add(v.q_fr[k], -bc.b).add(v.q_to[k], bc.b);
            diff.add(w_from(k), -coef / bc.tap_sq()).add(w_to(k), coef);
            add_row_checked(model(), std::move(diff), RowSense::kEqual, 0.0, "th_diff_eq[" + labels_[k] + "]");
        }
    }

    // Phase-angle rows written on Re/Im(V_i V_j^*) recovered from the
    // from-side flow: V_i V_j^* = (ZT)^* ((Y^* - i bc/2) w_i/t^2 - S_ij).
    void add_flow_pad() {
        const VarMap& v = relax_.vars;
        for (std::size_t k = 0; k < net_.branches.size(); ++k) {
            const Branch& br = net_.branches[k];
            const BranchConstants& c = consts_[k];
            const double half = br.b_charge / 2.0;
            AffineExpr re;
            re.add(w_from(k), (c.tR - c.tzI * half) / c.tap_sq()).add(v.p_fr[k], -c.tzR).add(v.q_fr[k], -c.tzI);
            AffineExpr im;
            im.add(w_from(k), (-c.tI - c.tzR * half) / c.tap_sq()).add(v.q_fr[k], -c.tzR).add(v.p_fr[k], c.tzI);
            add_pad_pair(k, re, im);
        }
    }

    void add_soc_lifting() {
        VarMap& v = relax_.vars;
        const double sqrt2 = std::sqrt(2.0);
        for (std::size_t k = 0; k < net_.branches.size(); ++k) {
            const Branch& br = net_.branches[k];
            const BranchConstants& c = consts_[k];
            const std::string& label = labels_[k];
            v.wr.push_back(model().add_variable("wr[" + label + "]"));
            v.wi.push_back(model().add_variable("wi[" + label + "]"));
            const VarRef wr = v.wr.back();
            const VarRef wi = v.wi.back();
            const double g = c.g, b = c.b, tR = c.tR, tI = c.tI, t2 = c.tap_sq();
            const double shunt = b + br.b_charge / 2.0;

            AffineExpr pf;
            pf.add(v.p_fr[k], 1.0).add(w_from(k), -g / t2).add(wr, (g * tR + b * tI) / t2).add(wi, (b * tR - g * tI) / t2);
            model().add_row(std::move(pf), RowSense::kEqual, 0.0, "soc_flow_p[" + label + "]");
            AffineExpr qf;
            qf.add(v.q_fr[k], 1.0).add(w_from(k), shunt / t2).add(wr, (g * tI - b * tR) / t2).add(wi, (g * tR + b * tI) / t2);
            model().add_row(std::move(qf), RowSense::kEqual, 0.0, "soc_flow_q[" + label + "]");
            AffineExpr pt;
            pt.add(v.p_to[k], 1.0).add(w_to(k), -g).add(wr, (g * tR - b * tI) / t2).add(wi, (-g * tI - b * tR) / t2);
            model().add_row(std::move(pt), RowSense::kEqual, 0.0, "soc_flow_p[" + reversed_label(br, label) + "]");
            AffineExpr qt;
            qt.add(v.q_to[k], 1.0).add(w_to(k), shunt).add(wr, -(g * tI + b * tR) / t2).add(wi, -(g * tR - b * tI) / t2);
            model().add_row(std::move(qt), RowSense::kEqual, 0.0, "soc_flow_q[" + reversed_label(br, label) + "]");

            AffineExpr m1, m2, m3, m4;
            m1.add(w_from(k), 1.0);
            m2.add(w_to(k), 1.0);
            m3.add(wr, sqrt2);
            m4.add(wi, sqrt2);
            model().add_cone(ConeKind::kRotatedSecondOrder, {m1, m2, m3, m4}, "soc_w[" + label + "]");

            AffineExpr re, im;
            re.add(wr, 1.0);
            im.add(wi, 1.0);
            add_pad_pair(k, re, im);

            if (br.s_max && *br.s_max > 0.0) {
                AffineExpr p1, q1, p2, q2;
                p1.add(v.p_fr[k], 1.0);
                q1.add(v.q_fr[k], 1.0);
                p2.add(v.p_to[k], 1.0);
                q2.add(v.q_to[k], 1.0);
                model().add_cone(ConeKind::kSecondOrder, {AffineExpr(*br.s_max), p1, q1}, "thermal[" + label + "]");
                model().add_cone(ConeKind::kSecondOrder, {AffineExpr(*br.s_max), p2, q2},
                                 "thermal[" + reversed_label(br, label) + "]");
            }
        }
    }

    void add_cp_rows() {
        const VarMap& v = relax_.vars;
        AffineExpr p, q;
        double pd = 0.0, qd = 0.0;
        for (std::size_t g = 0; g < net_.generators.size(); ++g) {
            p.add(v.pg[g], 1.0);
            q.add(v.qg[g], 1.0);
        }
        for (std::size_t i = 0; i < net_.buses.size(); ++i) {
            const Bus& bus = net_.buses[i];
            p.add(v.w[i], -bus.gs);
            q.add(v.w[i], bus.bs);
            pd += bus.pd;
            qd += bus.qd;
        }
        for (std::size_t k = 0; k < net_.branches.size(); ++k) q += charging(k, 1.0);
        add_row_checked(model(), std::move(p), RowSense::kGreaterEqual, pd, "cp_balance_p");
        add_row_checked(model(), std::move(q), RowSense::kGreaterEqual, qd, "cp_balance_q");
    }

    Relaxation take() { return std::move(relax_); }

private:
    OptModel& model() { return relax_.model; }

    VarRef w_from(std::size_t k) const { return relax_.vars.w[net_.bus_index(net_.branches[k].from_bus)]; }
    VarRef w_to(std::size_t k) const { return relax_.vars.w[net_.bus_index(net_.branches[k].to_bus)]; }

    // tan(angle_min) Re <= Im <= tan(angle_max) Re
    void add_pad_pair(std::size_t k, const AffineExpr& re, const AffineExpr& im) {
        const Branch& br = net_.branches[k];
        AffineExpr lo = re;
        lo *= -std::tan(br.angle_min);
        lo += im;
        model().add_row(std::move(lo), RowSense::kGreaterEqual, 0.0, "pad_lo[" + labels_[k] + "]");
        AffineExpr hi = re;
        hi *= -std::tan(br.angle_max);
        hi += im;
        model().add_row(std::move(hi), RowSense::kLessEqual, 0.0, "pad_hi[" + labels_[k] + "]");
    }

    const Network& net_;
    BuildOptions opts_;
    std::vector<std::string> labels_;
    std::vector<BranchConstants> consts_;
    Relaxation relax_;
};

}  // namespace

Relaxation build_cp(const Network& net, const BuildOptions& opts) {
    Builder b(net, RelaxKind::kCp, opts);
    b.add_generators();
    b.add_voltages();
    b.add_cp_rows();
    return b.take();
}

Relaxation build_nf(const Network& net, const BuildOptions& opts) {
    Builder b(net, RelaxKind::kNf, opts);
    b.add_generators();
    b.add_voltages();
    b.add_flows();
    b.add_kcl();
    b.add_nf_losses();
    b.add_flow_pad();
    return b.take();
}

Relaxation build_th(const Network& net, const BuildOptions& opts) {
    Builder b(net, RelaxKind::kTh, opts);
    b.add_generators();
    b.add_voltages();
    b.add_flows();
    b.add_kcl();
    b.add_th_equalities();
    b.add_flow_pad();
    return b.take();
}

Relaxation build_soc(const Network& net, const BuildOptions& opts) {
    Builder b(net, RelaxKind::kSoc, opts);
    b.add_generators();
    b.add_voltages();
    b.add_flows();
    b.add_kcl();
    b.add_soc_lifting();
    return b.take();
}

Relaxation build(RelaxKind kind, const Network& net, const BuildOptions& opts) {
    switch (kind) {
        case RelaxKind::kSoc: return build_soc(net, opts);
        case RelaxKind::kNf: return build_nf(net, opts);
        case RelaxKind::kCp: return build_cp(net, opts);
        case RelaxKind::kTh: return build_th(net, opts);
    }
    throw Error(ErrorCode::kModelUnsound, "unknown relaxation");
}

std::vector<double> embed(const Relaxation& relax, const Network& net, const WPoint& pt) {
    std::vector<double> x(relax.model.num_variables(), 0.0);
    const VarMap& v = relax.vars;
    auto put = [&x](const std::vector<VarRef>& refs, const std::vector<double>& values) {
        for (std::size_t i = 0; i < refs.size() && i < values.size(); ++i) {
            if (refs[i].valid()) x[static_cast<std::size_t>(refs[i].index)] = values[i];
        }
    };
    put(v.pg, pt.pg);
    put(v.qg, pt.qg);
    put(v.w, pt.w);
    put(v.p_fr, pt.p_fr);
    put(v.q_fr, pt.q_fr);
    put(v.p_to, pt.p_to);
    put(v.q_to, pt.q_to);
    put(v.wr, pt.wr);
    put(v.wi, pt.wi);
    for (std::size_t g = 0; g < v.cost_epigraph.size() && g < pt.pg.size(); ++g) {
        if (!v.cost_epigraph[g].valid()) continue;
        const double mw = net.base_mva * pt.pg[g];
        x[static_cast<std::size_t>(v.cost_epigraph[g].index)] = net.generators[g].c2 * mw * mw;
    }
    return x;
}

}  // namespace gridrelax
