#include "gridrelax/ac_engine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "gridrelax/error.hpp"

namespace gridrelax {

using cplx = std::complex<double>;

namespace {

struct BranchData {
    std::size_t fi = 0, ti = 0;
    cplx y_conj;     // Y*
    cplx self;       // Y* - i bc/2
    cplx tap;        // T
    double tap_sq = 1.0;
};

std::vector<BranchData> branch_data(const Network& net) {
    std::vector<BranchData> out;
    out.reserve(net.branches.size());
    for (const Branch& br : net.branches) {
        BranchData d;
        d.fi = net.bus_index(br.from_bus);
        d.ti = net.bus_index(br.to_bus);
        const cplx y = 1.0 / cplx(br.r, br.x);
        d.y_conj = std::conj(y);
        d.self = d.y_conj - cplx(0.0, br.b_charge / 2.0);
        d.tap = std::polar(br.tap, br.shift);
        d.tap_sq = br.tap * br.tap;
        out.push_back(d);
    }
    return out;
}

BranchFlow flow_of(const BranchData& d, cplx vi, cplx vj) {
    const cplx sij = d.self * std::norm(vi) / d.tap_sq - d.y_conj * vi * std::conj(vj) / std::conj(d.tap);
    const cplx sji = d.self * std::norm(vj) - d.y_conj * std::conj(vi) * vj / d.tap;
    return {sij.real(), sij.imag(), sji.real(), sji.imag()};
}

std::string branch_label(const Branch& br, bool reversed) {
    return reversed ? std::to_string(br.to_bus) + "," + std::to_string(br.from_bus)
                    : std::to_string(br.from_bus) + "," + std::to_string(br.to_bus);
}

}  // namespace

std::vector<BranchFlow> eval_flows(const Network& net, const AcPoint& pt) {
    std::vector<BranchFlow> out;
    out.reserve(net.branches.size());
    for (const BranchData& d : branch_data(net)) {
        out.push_back(flow_of(d, std::polar(pt.vm[d.fi], pt.va[d.fi]), std::polar(pt.vm[d.ti], pt.va[d.ti])));
    }
    return out;
}

namespace {

// Net power leaving each bus through its branches.
void branch_injections(const Network& net, const std::vector<BranchFlow>& flows, std::vector<double>& p,
                       std::vector<double>& q) {
    p.assign(net.buses.size(), 0.0);
    q.assign(net.buses.size(), 0.0);
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const std::size_t fi = net.bus_index(net.branches[k].from_bus);
        const std::size_t ti = net.bus_index(net.branches[k].to_bus);
        p[fi] += flows[k].p_fr;
        q[fi] += flows[k].q_fr;
        p[ti] += flows[k].p_to;
        q[ti] += flows[k].q_to;
    }
}

void report(FeasReport& rep, double viol, double tol, std::string tag) {
    rep.max_violation = std::max(rep.max_violation, viol);
    if (viol > tol) {
        rep.feasible = false;
        rep.violations.push_back({std::move(tag), viol});
    }
}

}  // namespace

FeasReport check_feasibility(const Network& net, const AcPoint& pt, double tol) {
    FeasReport rep;
    const auto flows = eval_flows(net, pt);
    std::vector<double> p_out, q_out;
    branch_injections(net, flows, p_out, q_out);

    std::vector<double> pg_bus(net.buses.size(), 0.0), qg_bus(net.buses.size(), 0.0);
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const Generator& gen = net.generators[g];
        const std::size_t i = net.bus_index(gen.bus);
        pg_bus[i] += pt.pg[g];
        qg_bus[i] += pt.qg[g];
        const std::string id = "[" + std::to_string(g) + "]";
        report(rep, pt.pg[g] - gen.pmax, tol, "pg_ub" + id);
        report(rep, gen.pmin - pt.pg[g], tol, "pg_lb" + id);
        report(rep, pt.qg[g] - gen.qmax, tol, "qg_ub" + id);
        report(rep, gen.qmin - pt.qg[g], tol, "qg_lb" + id);
    }

    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const Bus& bus = net.buses[i];
        const double w = pt.vm[i] * pt.vm[i];
        const std::string id = "[" + std::to_string(bus.id) + "]";
        report(rep, std::abs(pg_bus[i] - bus.pd - bus.gs * w - p_out[i]), tol, "kcl_p" + id);
        report(rep, std::abs(qg_bus[i] - bus.qd + bus.bs * w - q_out[i]), tol, "kcl_q" + id);
        report(rep, pt.vm[i] - bus.vmax, tol, "voltage_ub" + id);
        report(rep, bus.vmin - pt.vm[i], tol, "voltage_lb" + id);
        if (bus.id == net.reference_bus) report(rep, std::abs(pt.va[i]), tol, "ref_angle" + id);
    }

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const std::size_t fi = net.bus_index(br.from_bus);
        const std::size_t ti = net.bus_index(br.to_bus);
        if (br.s_max && *br.s_max > 0.0) {
            report(rep, std::hypot(flows[k].p_fr, flows[k].q_fr) - *br.s_max, tol,
                   "thermal[" + branch_label(br, false) + "]");
            report(rep, std::hypot(flows[k].p_to, flows[k].q_to) - *br.s_max, tol,
                   "thermal[" + branch_label(br, true) + "]");
        }
        // angle of V_i V_j^*, wrapped into (-pi, pi]
        const double diff = std::arg(std::polar(1.0, pt.va[fi] - pt.va[ti]));
        report(rep, diff - br.angle_max, tol, "pad_hi[" + branch_label(br, false) + "]");
        report(rep, br.angle_min - diff, tol, "pad_lo[" + branch_label(br, false) + "]");
    }
    return rep;
}

WPoint lift(const Network& net, const AcPoint& pt) {
    WPoint out;
    for (double vm : pt.vm) out.w.push_back(vm * vm);
    const auto flows = eval_flows(net, pt);
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const std::size_t fi = net.bus_index(net.branches[k].from_bus);
        const std::size_t ti = net.bus_index(net.branches[k].to_bus);
        const cplx wij = std::polar(pt.vm[fi] * pt.vm[ti], pt.va[fi] - pt.va[ti]);
        out.wr.push_back(wij.real());
        out.wi.push_back(wij.imag());
        out.p_fr.push_back(flows[k].p_fr);
        out.q_fr.push_back(flows[k].q_fr);
        out.p_to.push_back(flows[k].p_to);
        out.q_to.push_back(flows[k].q_to);
    }
    out.pg = pt.pg;
    out.qg = pt.qg;
    return out;
}

double generation_cost(const Network& net, const AcPoint& pt) { return net.total_cost(pt.pg); }

namespace {

constexpr double kPinnedWidth = 1e-9;

// Splits the AC unknowns into gridded ("free") coordinates and coordinates
// fixed by buses whose injection is not adjustable.
class PointCompleter {
public:
    explicit PointCompleter(const Network& net) : net_(net), data_(branch_data(net)) {
        const std::size_t nb = net.buses.size();
        std::vector<double> p_width(nb, 0.0), q_width(nb, 0.0);
        gens_at_.resize(nb);
        for (std::size_t g = 0; g < net.generators.size(); ++g) {
            const Generator& gen = net.generators[g];
            const std::size_t i = net.bus_index(gen.bus);
            p_width[i] += gen.pmax - gen.pmin;
            q_width[i] += gen.qmax - gen.qmin;
            gens_at_[i].push_back(g);
        }
        for (auto& list : gens_at_) {
            std::stable_sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
                const Generator& ga = net.generators[a];
                const Generator& gb = net.generators[b];
                return std::tie(ga.c1, ga.c2) < std::tie(gb.c1, gb.c2);
            });
        }
        ref_ = net.bus_index(net.reference_bus);

        const std::vector<int> hops = hop_distance();
        double max_angle = 0.0;
        for (const Branch& br : net.branches) {
            max_angle = std::max({max_angle, std::abs(br.angle_min), std::abs(br.angle_max)});
        }
        const double pi = std::acos(-1.0);

        for (std::size_t i = 0; i < nb; ++i) {
            const bool p_pinned = p_width[i] <= kPinnedWidth;
            const bool q_pinned = q_width[i] <= kPinnedWidth;
            if (p_pinned) p_rows_.push_back(i);
            if (q_pinned) q_rows_.push_back(i);
            if (i != ref_) {
                if (p_pinned) {
                    pinned_angle_.push_back(i);
                } else {
                    const double half = std::min(pi, hops[i] * max_angle);
                    free_.push_back({i, true, -half, half});
                }
            }
        }
        for (std::size_t i = 0; i < nb; ++i) {
            const Bus& bus = net.buses[i];
            if (q_width[i] <= kPinnedWidth) {
                pinned_mag_.push_back(i);
            } else {
                free_.push_back({i, false, bus.vmin, bus.vmax});
            }
        }
    }

    struct Coord {
        std::size_t bus;
        bool angle;
        double lower, upper;
    };

    const std::vector<Coord>& free_coords() const { return free_; }

    /// Fills the pinned coordinates and the dispatch of `pt`, whose free
    /// coordinates are already set. False if the projection diverged.
    bool complete(AcPoint& pt) const {
        for (std::size_t i : pinned_angle_) pt.va[i] = 0.0;
        for (std::size_t i : pinned_mag_) pt.vm[i] = std::clamp(1.0, net_.buses[i].vmin, net_.buses[i].vmax);
        pt.va[ref_] = 0.0;
        if (!project(pt)) return false;
        dispatch(pt);
        return true;
    }

    AcPoint blank() const {
        const std::size_t nb = net_.buses.size();
        const std::size_t ng = net_.generators.size();
        return AcPoint{std::vector<double>(nb, 1.0), std::vector<double>(nb, 0.0), std::vector<double>(ng, 0.0),
                       std::vector<double>(ng, 0.0)};
    }

private:
    std::vector<int> hop_distance() const {
        const std::size_t nb = net_.buses.size();
        std::vector<int> hops(nb, -1);
        hops[ref_] = 0;
        std::deque<std::size_t> queue{ref_};
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            for (const BranchData& d : data_) {
                const std::size_t v = d.fi == u ? d.ti : (d.ti == u ? d.fi : u);
                if (v != u && hops[v] < 0) {
                    hops[v] = hops[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (int& h : hops) {
            if (h < 0) h = static_cast<int>(nb);
        }
        return hops;
    }

    void injections(const AcPoint& pt, std::vector<double>& p, std::vector<double>& q) const {
        p.assign(net_.buses.size(), 0.0);
        q.assign(net_.buses.size(), 0.0);
        for (const BranchData& d : data_) {
            const BranchFlow f = flow_of(d, std::polar(pt.vm[d.fi], pt.va[d.fi]), std::polar(pt.vm[d.ti], pt.va[d.ti]));
            p[d.fi] += f.p_fr;
            q[d.fi] += f.q_fr;
            p[d.ti] += f.p_to;
            q[d.ti] += f.q_to;
        }
    }

    // Generation the KCL rows demand at bus i.
    double required_p(std::size_t i, const AcPoint& pt, const std::vector<double>& p_out) const {
        const Bus& bus = net_.buses[i];
        return bus.pd + bus.gs * pt.vm[i] * pt.vm[i] + p_out[i];
    }
    double required_q(std::size_t i, const AcPoint& pt, const std::vector<double>& q_out) const {
        const Bus& bus = net_.buses[i];
        return bus.qd - bus.bs * pt.vm[i] * pt.vm[i] + q_out[i];
    }

    Eigen::VectorXd residual(const AcPoint& pt) const {
        std::vector<double> p_out, q_out;
        injections(pt, p_out, q_out);
        Eigen::VectorXd r(static_cast<Eigen::Index>(p_rows_.size() + q_rows_.size()));
        Eigen::Index k = 0;
        for (std::size_t i : p_rows_) {
            double fixed = 0.0;
            for (std::size_t g : gens_at_[i]) fixed += net_.generators[g].pmin;
            r[k++] = required_p(i, pt, p_out) - fixed;
        }
        for (std::size_t i : q_rows_) {
            double fixed = 0.0;
            for (std::size_t g : gens_at_[i]) fixed += net_.generators[g].qmin;
            r[k++] = required_q(i, pt, q_out) - fixed;
        }
        return r;
    }

    double& unknown(AcPoint& pt, std::size_t k) const {
        return k < pinned_angle_.size() ? pt.va[pinned_angle_[k]] : pt.vm[pinned_mag_[k - pinned_angle_.size()]];
    }

    // Gauss-Newton on the fixed-injection rows (square in the usual case).
    bool project(AcPoint& pt) const {
        const std::size_t n = pinned_angle_.size() + pinned_mag_.size();
        if (n == 0) return true;
        constexpr double kStep = 1e-7;
        for (int iter = 0; iter < 40; ++iter) {
            const Eigen::VectorXd r = residual(pt);
            if (r.size() == 0 || r.lpNorm<Eigen::Infinity>() < 1e-13) return true;
            Eigen::MatrixXd jac(r.size(), static_cast<Eigen::Index>(n));
            for (std::size_t k = 0; k < n; ++k) {
                double& u = unknown(pt, k);
                const double saved = u;
                u = saved + kStep;
                jac.col(static_cast<Eigen::Index>(k)) = (residual(pt) - r) / kStep;
                u = saved;
            }
            const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-r);
            if (!step.allFinite()) return false;
            for (std::size_t k = 0; k < n; ++k) unknown(pt, k) += step[static_cast<Eigen::Index>(k)];
            for (std::size_t i : pinned_mag_) {
                if (pt.vm[i] < 0.05) return false;
            }
            if (step.lpNorm<Eigen::Infinity>() < 1e-15) break;
        }
        const Eigen::VectorXd r = residual(pt);
        return r.allFinite() && r.lpNorm<Eigen::Infinity>() < 1e-9;
    }

    // Cheapest-first fill from pmin upwards; whatever cannot be placed
    // within the limits lands on the last (or first) unit so the feasibility
    // check sees it.
    static void fill(const std::vector<std::size_t>& order, double need, std::vector<double>& out,
                     const std::vector<double>& lo, const std::vector<double>& hi) {
        if (order.empty()) return;
        double remaining = need;
        for (std::size_t g : order) {
            out[g] = lo[g];
            remaining -= lo[g];
        }
        if (remaining < 0.0) {
            out[order.front()] += remaining;
            return;
        }
        for (std::size_t g : order) {
            const double room = hi[g] - lo[g];
            const double take = std::min(room, remaining);
            out[g] += take;
            remaining -= take;
        }
        out[order.back()] += remaining;
    }

    void dispatch(AcPoint& pt) const {
        std::vector<double> p_out, q_out;
        injections(pt, p_out, q_out);
        std::vector<double> pmin, pmax, qmin, qmax;
        for (const Generator& g : net_.generators) {
            pmin.push_back(g.pmin);
            pmax.push_back(g.pmax);
            qmin.push_back(std::isfinite(g.qmin) ? g.qmin : -1e30);
            qmax.push_back(g.qmax);
        }
        for (std::size_t i = 0; i < net_.buses.size(); ++i) {
            fill(gens_at_[i], required_p(i, pt, p_out), pt.pg, pmin, pmax);
            fill(gens_at_[i], required_q(i, pt, q_out), pt.qg, qmin, qmax);
        }
    }

    const Network& net_;
    std::vector<BranchData> data_;
    std::vector<std::vector<std::size_t>> gens_at_;
    std::size_t ref_ = 0;
    std::vector<std::size_t> p_rows_, q_rows_;
    std::vector<std::size_t> pinned_angle_, pinned_mag_;
    std::vector<Coord> free_;
};

struct Axis {
    double lower = 0.0, upper = 0.0;
    std::uint64_t count = 1;

    double at(std::uint64_t k) const {
        return count == 1 ? 0.5 * (lower + upper)
                          : lower + (upper - lower) * static_cast<double>(k) / static_cast<double>(count - 1);
    }
};

struct Candidate {
    double cost = std::numeric_limits<double>::infinity();
    std::uint64_t index = std::numeric_limits<std::uint64_t>::max();
    AcPoint point;
    std::uint64_t feasible = 0;

    bool better_than(const Candidate& other) const {
        return cost < other.cost || (cost == other.cost && index < other.index);
    }
};

Candidate scan(const Network& net, const PointCompleter& pc, const std::vector<Axis>& axes, std::uint64_t begin,
               std::uint64_t end, double tol) {
    Candidate best;
    const auto& coords = pc.free_coords();
    AcPoint pt = pc.blank();
    for (std::uint64_t idx = begin; idx < end; ++idx) {
        std::uint64_t rest = idx;
        for (std::size_t d = axes.size(); d-- > 0;) {
            const double v = axes[d].at(rest % axes[d].count);
            rest /= axes[d].count;
            (coords[d].angle ? pt.va : pt.vm)[coords[d].bus] = v;
        }
        if (!pc.complete(pt)) continue;
        if (!check_feasibility(net, pt, tol).feasible) continue;
        ++best.feasible;
        const double cost = generation_cost(net, pt);
        if (cost < best.cost) {
            best.cost = cost;
            best.index = idx;
            best.point = pt;
        }
    }
    return best;
}

}  // namespace

OracleResult grid_oracle(const Network& net, const OracleOptions& opts) {
    if (net.buses.size() > kOracleMaxBuses) {
        throw Error(ErrorCode::kOracleTooLarge, "grid oracle supports at most " + std::to_string(kOracleMaxBuses) +
                                                    " buses; pass an AC reference instead");
    }
    if (opts.resolution < 2) throw Error(ErrorCode::kOracleNoFeasible, "grid resolution must be at least 2");
    if (has_errors(validate(net))) throw Error(ErrorCode::kInvalidNetwork, "network fails validation");

    const PointCompleter pc(net);
    const auto& coords = pc.free_coords();
    std::vector<Axis> axes;
    for (const auto& c : coords) {
        axes.push_back({c.lower, c.upper, c.upper > c.lower ? static_cast<std::uint64_t>(opts.resolution) : 1});
    }

    unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
    OracleResult result;
    Candidate best;
    for (int round = 0; round <= opts.refine_rounds; ++round) {
        if (round > 0) {
            for (std::size_t d = 0; d < axes.size(); ++d) {
                if (axes[d].count == 1) continue;
                const double half = 0.25 * (axes[d].upper - axes[d].lower);
                const double centre = (coords[d].angle ? best.point.va : best.point.vm)[coords[d].bus];
                axes[d].lower = std::max(coords[d].lower, centre - half);
                axes[d].upper = std::min(coords[d].upper, centre + half);
            }
        }
        std::uint64_t total = 1;
        for (const Axis& a : axes) total *= a.count;

        const std::uint64_t parts = std::min<std::uint64_t>(threads, total);
        std::vector<std::future<Candidate>> jobs;
        for (std::uint64_t t = 0; t < parts; ++t) {
            const std::uint64_t b = total * t / parts;
            const std::uint64_t e = total * (t + 1) / parts;
            jobs.push_back(std::async(parts > 1 ? std::launch::async : std::launch::deferred,
                                      [&, b, e] { return scan(net, pc, axes, b, e, opts.feas_tol); }));
        }
        Candidate round_best;
        for (auto& job : jobs) {
            Candidate c = job.get();
            round_best.feasible += c.feasible;
            if (c.better_than(round_best)) {
                const std::uint64_t feasible = round_best.feasible;
                round_best = std::move(c);
                round_best.feasible = feasible;
            }
        }
        result.evaluated += total;
        result.feasible += round_best.feasible;
        if (round == 0 && round_best.feasible == 0) {
            throw Error(ErrorCode::kOracleNoFeasible,
                        "no grid point is AC feasible; try a higher resolution than " + std::to_string(opts.resolution));
        }
        // Earlier rounds win ties so the incumbent only moves on strict improvement.
        if (round_best.cost < best.cost) best = std::move(round_best);
    }
    result.point = best.point;
    result.objective = best.cost;
    return result;
}

std::vector<AcPoint> sample_feasible_points(const Network& net, std::size_t count, std::uint64_t seed, double tol) {
    std::vector<AcPoint> out;
    if (count == 0) return out;
    const PointCompleter pc(net);
    const auto& coords = pc.free_coords();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    auto accept = [&](AcPoint& pt) { return pc.complete(pt) && check_feasibility(net, pt, tol).feasible; };
    auto coord = [&](AcPoint& pt, std::size_t d) -> double& {
        return (coords[d].angle ? pt.va : pt.vm)[coords[d].bus];
    };

    // Uniform draws over the box first.
    AcPoint pt = pc.blank();
    for (std::size_t attempt = 0; attempt < 20 * count && out.size() < count; ++attempt) {
        for (std::size_t d = 0; d < coords.size(); ++d) {
            coord(pt, d) = coords[d].lower + (coords[d].upper - coords[d].lower) * unit(rng);
        }
        if (accept(pt)) out.push_back(pt);
    }
    if (out.size() >= count || coords.empty()) return out;

    // Thin feasible sets: seed from a grid and continue with an adaptive
    // random walk restricted to feasible points.
    std::vector<AcPoint> pool = out;
    for (int res : {11, 21, 41}) {
        if (!pool.empty()) break;
        std::vector<Axis> axes;
        std::uint64_t total = 1;
        for (const auto& c : coords) {
            axes.push_back({c.lower, c.upper, c.upper > c.lower ? static_cast<std::uint64_t>(res) : 1});
            total *= axes.back().count;
        }
        for (std::uint64_t idx = 0; idx < total; ++idx) {
            std::uint64_t rest = idx;
            for (std::size_t d = axes.size(); d-- > 0;) {
                coord(pt, d) = axes[d].at(rest % axes[d].count);
                rest /= axes[d].count;
            }
            if (accept(pt)) pool.push_back(pt);
        }
    }
    if (pool.empty()) return out;

    double scale = 0.02;
    std::size_t window = 0, window_hits = 0;
    const std::size_t max_steps = count * 2000;
    AcPoint current = pool.front();
    for (std::size_t step = 0; step < max_steps && out.size() < count; ++step) {
        if (step % 25 == 0) current = pool[std::min(pool.size() - 1, static_cast<std::size_t>(unit(rng) * pool.size()))];
        AcPoint cand = current;
        for (std::size_t d = 0; d < coords.size(); ++d) {
            const double span = coords[d].upper - coords[d].lower;
            coord(cand, d) = std::clamp(coord(cand, d) + scale * span * normal(rng), coords[d].lower, coords[d].upper);
        }
        const bool ok = accept(cand);
        ++window;
        if (ok) {
            ++window_hits;
            out.push_back(cand);
            pool.push_back(cand);
            current = std::move(cand);
        }
        if (window == 50) {
            const double rate = static_cast<double>(window_hits) / 50.0;
            if (rate < 0.2) scale = std::max(scale * 0.7, 1e-6);
            if (rate > 0.5) scale = std::min(scale * 1.4, 0.5);
            window = window_hits = 0;
        }
    }
    return out;
}

}  // namespace gridrelax
