#include "gridrelax/conic_solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>

namespace gridrelax {

std::string_view to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::kOptimal: return "optimal";
        case SolveStatus::kInfeasible: return "infeasible";
        case SolveStatus::kUnbounded: return "unbounded";
        case SolveStatus::kNumericFailure: return "numeric_failure";
    }
    return "unknown";
}

SolverOptions SolverOptions::from_environment() {
    SolverOptions opts;
    if (const char* env = std::getenv("GRIDRELAX_TOL")) {
        char* end = nullptr;
        const double tol = std::strtod(env, &end);
        if (end != env && tol > 0.0 && std::isfinite(tol)) {
            opts.feastol = tol;
            opts.abstol = tol;
            opts.reltol = tol;
        }
    }
    return opts;
}

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Cone K = R_+^lp x Q^{soc[0]} x Q^{soc[1]} x ...
struct ConeLayout {
    int lp = 0;
    std::vector<int> soc;
    std::vector<int> soc_offset;

    int dim() const {
        int d = lp;
        for (int q : soc) d += q;
        return d;
    }
    int degree() const { return lp + static_cast<int>(soc.size()); }
};

// min c'x  s.t.  A x = b,  G x + s = h,  s in K.
struct StandardForm {
    int n = 0;
    SpMat A, G;
    Vec b, h, c;
    ConeLayout cones;
};

StandardForm lower(const OptModel& model) {
    StandardForm sf;
    sf.n = static_cast<int>(model.num_variables());
    std::vector<Triplet> at, gt;
    std::vector<double> b, h;

    auto push_eq = [&](const std::vector<LinearTerm>& terms, double rhs) {
        // Row equilibration: scale to unit infinity norm.
        double scale = 0.0;
        for (const auto& t : terms) scale = std::max(scale, std::abs(t.coef));
        const int row = static_cast<int>(b.size());
        for (const auto& t : terms) at.emplace_back(row, t.var, t.coef / scale);
        b.push_back(rhs / scale);
    };
    // Inequality a'x <= rhs, i.e. a'x + s = rhs with s >= 0.
    auto push_le = [&](const std::vector<LinearTerm>& terms, double rhs) {
        double scale = 0.0;
        for (const auto& t : terms) scale = std::max(scale, std::abs(t.coef));
        const int row = static_cast<int>(h.size());
        for (const auto& t : terms) gt.emplace_back(row, t.var, t.coef / scale);
        h.push_back(rhs / scale);
    };

    const auto& vars = model.variables();
    for (int j = 0; j < sf.n; ++j) {
        const Variable& v = vars[static_cast<std::size_t>(j)];
        if (std::isfinite(v.lower) && v.lower == v.upper) push_eq({{j, 1.0}}, v.lower);
    }
    for (const auto& row : model.rows()) {
        if (row.sense == RowSense::kEqual) push_eq(row.terms, row.rhs);
    }

    for (int j = 0; j < sf.n; ++j) {
        const Variable& v = vars[static_cast<std::size_t>(j)];
        if (std::isfinite(v.lower) && v.lower == v.upper) continue;
        if (std::isfinite(v.lower)) push_le({{j, -1.0}}, -v.lower);
        if (std::isfinite(v.upper)) push_le({{j, 1.0}}, v.upper);
    }
    for (const auto& row : model.rows()) {
        if (row.sense == RowSense::kLessEqual) push_le(row.terms, row.rhs);
        if (row.sense == RowSense::kGreaterEqual) {
            std::vector<LinearTerm> neg = row.terms;
            for (auto& t : neg) t.coef = -t.coef;
            push_le(neg, -row.rhs);
        }
    }
    sf.cones.lp = static_cast<int>(h.size());

    // Cone members m_i = a_i'x + c_i become s_i = h_i - G_i x with G_i = -a_i.
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (const auto& cone : model.cones()) {
        std::vector<AffineExpr> members = cone.members;
        if (cone.kind == ConeKind::kRotatedSecondOrder) {
            AffineExpr sum = members[0];
            sum += members[1];
            sum *= inv_sqrt2;
            AffineExpr diff = members[1];
            diff *= -1.0;
            diff += members[0];
            diff *= inv_sqrt2;
            sum.canonicalize();
            diff.canonicalize();
            members[0] = sum;
            members[1] = diff;
        }
        double scale = 0.0;
        for (const auto& m : members) {
            for (const auto& t : m.terms()) scale = std::max(scale, std::abs(t.coef));
        }
        if (scale == 0.0) scale = 1.0;
        sf.cones.soc_offset.push_back(static_cast<int>(h.size()));
        sf.cones.soc.push_back(static_cast<int>(members.size()));
        for (const auto& m : members) {
            const int row = static_cast<int>(h.size());
            for (const auto& t : m.terms()) gt.emplace_back(row, t.var, -t.coef / scale);
            h.push_back(m.constant() / scale);
        }
    }

    sf.A.resize(static_cast<int>(b.size()), sf.n);
    sf.A.setFromTriplets(at.begin(), at.end());
    sf.G.resize(static_cast<int>(h.size()), sf.n);
    sf.G.setFromTriplets(gt.begin(), gt.end());
    sf.b = Eigen::Map<Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
    sf.h = Eigen::Map<Vec>(h.data(), static_cast<Eigen::Index>(h.size()));
    sf.c = Vec::Zero(sf.n);
    for (const auto& t : model.objective().terms()) sf.c[t.var] += t.coef;
    return sf;
}

// Ruiz equilibration: A <- E A D, G <- F G D, with one shared factor per
// second-order block so the cone is preserved. Returns D; the original
// variables are x = D x_scaled.
Vec equilibrate(StandardForm& sf) {
    const int n = sf.n;
    const int p = static_cast<int>(sf.A.rows());
    const int m = static_cast<int>(sf.G.rows());
    Vec D = Vec::Ones(n), E = Vec::Ones(p), F = Vec::Ones(m);
    auto inv_sqrt = [](double v) { return v < 1e-8 ? 1.0 : 1.0 / std::sqrt(v); };
    for (int round = 0; round < 15; ++round) {
        Vec col = Vec::Zero(n), rowa = Vec::Zero(p), rowg = Vec::Zero(m);
        for (int k = 0; k < sf.A.outerSize(); ++k) {
            for (SpMat::InnerIterator it(sf.A, k); it; ++it) {
                const double v = std::abs(it.value());
                col[it.col()] = std::max(col[it.col()], v);
                rowa[it.row()] = std::max(rowa[it.row()], v);
            }
        }
        for (int k = 0; k < sf.G.outerSize(); ++k) {
            for (SpMat::InnerIterator it(sf.G, k); it; ++it) {
                const double v = std::abs(it.value());
                col[it.col()] = std::max(col[it.col()], v);
                rowg[it.row()] = std::max(rowg[it.row()], v);
            }
        }
        for (std::size_t i = 0; i < sf.cones.soc.size(); ++i) {
            auto blk = rowg.segment(sf.cones.soc_offset[i], sf.cones.soc[i]);
            blk.setConstant(blk.maxCoeff());
        }
        Vec d(n), e(p), f(m);
        for (int j = 0; j < n; ++j) d[j] = inv_sqrt(col[j]);
        for (int i = 0; i < p; ++i) e[i] = inv_sqrt(rowa[i]);
        for (int i = 0; i < m; ++i) f[i] = inv_sqrt(rowg[i]);
        sf.A = e.asDiagonal() * sf.A * d.asDiagonal();
        sf.G = f.asDiagonal() * sf.G * d.asDiagonal();
        D.array() *= d.array();
        E.array() *= e.array();
        F.array() *= f.array();
    }
    sf.b.array() *= E.array();
    sf.h.array() *= F.array();
    sf.c.array() *= D.array();
    return D;
}

// --- cone algebra -----------------------------------------------------------

// Nesterov-Todd scaling point for one second-order cone block.
struct SocScaling {
    double eta = 1.0;
    Vec wbar;
};

struct Scaling {
    Vec lp_d;  // W = diag(lp_d) on the orthant
    std::vector<SocScaling> soc;
};

double jnorm_sq(const Vec& u) { return u[0] * u[0] - u.tail(u.size() - 1).squaredNorm(); }

class ConeOps {
public:
    explicit ConeOps(const ConeLayout& layout) : k_(layout) {}

    Vec identity() const {
        Vec e = Vec::Zero(k_.dim());
        e.head(k_.lp).setOnes();
        for (std::size_t i = 0; i < k_.soc.size(); ++i) e[k_.soc_offset[i]] = 1.0;
        return e;
    }

    // Smallest "eigenvalue" of u over all blocks.
    double min_eig(const Vec& u) const {
        double m = std::numeric_limits<double>::infinity();
        for (int i = 0; i < k_.lp; ++i) m = std::min(m, u[i]);
        for (std::size_t i = 0; i < k_.soc.size(); ++i) {
            const auto blk = u.segment(k_.soc_offset[i], k_.soc[i]);
            m = std::min(m, blk[0] - blk.tail(blk.size() - 1).norm());
        }
        return m;
    }

    Scaling scaling(const Vec& s, const Vec& z) const {
        Scaling w;
        w.lp_d = (s.head(k_.lp).array() / z.head(k_.lp).array()).sqrt();
        for (std::size_t i = 0; i < k_.soc.size(); ++i) {
            const Vec sb = s.segment(k_.soc_offset[i], k_.soc[i]);
            const Vec zb = z.segment(k_.soc_offset[i], k_.soc[i]);
            const double sn = std::sqrt(std::max(jnorm_sq(sb), 1e-300));
            const double zn = std::sqrt(std::max(jnorm_sq(zb), 1e-300));
            const Vec sbar = sb / sn;
            Vec zbar = zb / zn;
            const double gamma = std::sqrt(std::max((1.0 + sbar.dot(zbar)) / 2.0, 1e-300));
            zbar.tail(zbar.size() - 1) *= -1.0;  // J zbar
            SocScaling sc;
            sc.wbar = (sbar + zbar) / (2.0 * gamma);
            sc.eta = std::sqrt(sn / zn);
            w.soc.push_back(std::move(sc));
        }
        return w;
    }

    // W v (W is symmetric).
    Vec apply_w(const Scaling& w, const Vec& v, bool inverse) const {
        Vec out(v.size());
        if (inverse) {
            out.head(k_.lp) = (v.head(k_.lp).array() / w.lp_d.array()).matrix();
        } else {
            out.head(k_.lp) = (v.head(k_.lp).array() * w.lp_d.array()).matrix();
        }
        for (std::size_t i = 0; i < k_.soc.size(); ++i) {
            const int off = k_.soc_offset[i];
            const int q = k_.soc[i];
            const SocScaling& sc = w.soc[i];
            const double w0 = sc.wbar[0];
            const auto w1 = sc.wbar.tail(q - 1);
            const double v0 = v[off];
            const auto v1 = v.segment(off + 1, q - 1);
            const double w1v1 = w1.dot(v1);
            const double sign = inverse ? -1.0 : 1.0;
            const double scale = inverse ? 1.0 / sc.eta : sc.eta;
            out[off] = scale * (w0 * v0 + sign * w1v1);
            out.segment(off + 1, q - 1) = scale * (sign * v0 * w1 + v1 + (w1v1 / (1.0 + w0)) * w1);
        }
        return out;
    }

    // Dense W (or W^-1) block for SOC i.
    Mat soc_w_matrix(const Scaling& w, std::size_t i, bool inverse) const {
        const int q = k_.soc[i];
        const SocScaling& sc = w.soc[i];
        Mat W(q, q);
        const double w0 = sc.wbar[0];
        const Vec w1 = sc.wbar.tail(q - 1) * (inverse ? -1.0 : 1.0);
        W(0, 0) = w0;
        W.block(0, 1, 1, q - 1) = w1.transpose();
        W.block(1, 0, q - 1, 1) = w1;
        W.block(1, 1, q - 1, q - 1) = Mat::Identity(q - 1, q - 1) + w1 * w1.transpose() / (1.0 + w0);
        W *= inverse ? 1.0 / sc.eta : sc.eta;
        return W;
    }

    // Jordan product u o v.
    Vec circ(const Vec& u, const Vec& v) const {
        Vec out(u.size());
        out.head(k_.lp) = (u.head(k_.lp).array() * v.head(k_.lp).array()).matrix();
        for (std::size_t i = 0; i < k_.soc.size(); ++i) {
            const int off = k_.soc_offset[i];
            const int q = k_.soc[i];
            out[off] = u.segment(off, q).dot(v.segment(off, q));
            out.segment(off + 1, q - 1) = u[off] * v.segment(off + 1, q - 1) + v[off] * u.segment(off + 1, q - 1);
        }
        return out;
    }

    // Solve lambda o x = v for x.
    Vec circ_inverse(const Vec& lambda, const Vec& v) const {
        Vec out(v.size());
        out.head(k_.lp) = (v.head(k_.lp).array() / lambda.head(k_.lp).array()).matrix();
        for (std::size_t i = 0; i < k_.soc.size(); ++i) {
            const int off = k_.soc_offset[i];
            const int q = k_.soc[i];
            const double l0 = lambda[off];
            const auto l1 = lambda.segment(off + 1, q - 1);
            const double v0 = v[off];
            const auto v1 = v.segment(off + 1, q - 1);
            const double det = l0 * l0 - l1.squaredNorm();
            const double x0 = (l0 * v0 - l1.dot(v1)) / det;
            out[off] = x0;
            out.segment(off + 1, q - 1) = (v1 - x0 * l1) / l0;
        }
        return out;
    }

    // Largest alpha with u + alpha*du in the cone (may be +inf).
    double max_step(const Vec& u, const Vec& du) const {
        double alpha = std::numeric_limits<double>::infinity();
        for (int i = 0; i < k_.lp; ++i) {
            if (du[i] < 0.0) alpha = std::min(alpha, -u[i] / du[i]);
        }
        for (std::size_t i = 0; i < k_.soc.size(); ++i) {
            const int off = k_.soc_offset[i];
            const int q = k_.soc[i];
            const Vec ub = u.segment(off, q);
            const Vec db = du.segment(off, q);
            const double a = jnorm_sq(db);
            const double bq = ub[0] * db[0] - ub.tail(q - 1).dot(db.tail(q - 1));
            const double c = std::max(jnorm_sq(ub), 0.0);
            double blk = std::numeric_limits<double>::infinity();
            const double disc = bq * bq - a * c;
            if (a > 0.0) {
                if (bq < 0.0 && disc >= 0.0) blk = (-bq - std::sqrt(disc)) / a;
            } else if (a < 0.0) {
                blk = (-bq - std::sqrt(std::max(disc, 0.0))) / a;
            } else if (bq < 0.0) {
                blk = -c / (2.0 * bq);
            }
            // The head must also stay nonnegative.
            if (db[0] < 0.0) blk = std::min(blk, -ub[0] / db[0]);
            alpha = std::min(alpha, std::max(blk, 0.0));
        }
        return alpha;
    }

private:
    const ConeLayout& k_;
};

// --- KKT system ---------------------------------------------------------------
//
//   [ 0   A'   G'   ] [dx]   [r1]
//   [ A   0    0    ] [dy] = [r2]
//   [ G   0  -W'W   ] [dz]   [r3]
//
// is solved in the scaled form (u = W dz, Gs = W^-1 G)
//
//   [ 0   A'   Gs'  ] [dx]   [r1      ]
//   [ A   0    0    ] [dy] = [r2      ]
//   [ Gs  0   -I    ] [u ]   [W^-1 r3 ]
//
// whose cone block stays well conditioned near the boundary. The matrix is
// factored with static regularization (+delta, -delta, -delta) and the
// solution is cleaned up by iterative refinement against the unregularized one.
class KktSolver {
public:
    KktSolver(const StandardForm& sf, const ConeLayout& cones) : sf_(sf), cones_(cones) {}

    bool factor(const Scaling* w) {
        const int n = sf_.n;
        const int p = static_cast<int>(sf_.A.rows());
        const int m = static_cast<int>(sf_.G.rows());
        const ConeOps ops(cones_);

        std::vector<Triplet> wt;
        for (int i = 0; i < cones_.lp; ++i) wt.emplace_back(i, i, w ? 1.0 / w->lp_d[i] : 1.0);
        for (std::size_t i = 0; i < cones_.soc.size(); ++i) {
            const int off = cones_.soc_offset[i];
            const int q = cones_.soc[i];
            const Mat winv = w ? ops.soc_w_matrix(*w, i, true) : Mat::Identity(q, q);
            for (int r = 0; r < q; ++r) {
                for (int c = 0; c < q; ++c) {
                    if (winv(r, c) != 0.0) wt.emplace_back(off + r, off + c, winv(r, c));
                }
            }
        }
        winv_.resize(m, m);
        winv_.setFromTriplets(wt.begin(), wt.end());
        gs_ = winv_ * sf_.G;

        std::vector<Triplet> t;
        for (int k = 0; k < sf_.A.outerSize(); ++k) {
            for (SpMat::InnerIterator it(sf_.A, k); it; ++it) {
                t.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
                t.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()), it.value());
            }
        }
        for (int k = 0; k < gs_.outerSize(); ++k) {
            for (SpMat::InnerIterator it(gs_, k); it; ++it) {
                t.emplace_back(n + p + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
                t.emplace_back(static_cast<int>(it.col()), n + p + static_cast<int>(it.row()), it.value());
            }
        }
        for (int i = 0; i < m; ++i) t.emplace_back(n + p + i, n + p + i, -1.0);
        kkt_.resize(n + p + m, n + p + m);
        kkt_.setFromTriplets(t.begin(), t.end());

        std::vector<Triplet> d;
        for (int i = 0; i < n + p + m; ++i) d.emplace_back(i, i, i < n ? kDelta : -kDelta);
        SpMat reg(n + p + m, n + p + m);
        reg.setFromTriplets(d.begin(), d.end());
        // Escalate the regularization if a pivot vanishes anyway.
        for (double delta = kDelta; delta <= 1e-5; delta *= 100.0) {
            ldlt_.compute(SpMat(kkt_ + (delta / kDelta) * reg));
            if (ldlt_.info() == Eigen::Success) return true;
        }
        return false;
    }

    Vec solve(const Vec& rhs_in) const {
        const int m = static_cast<int>(sf_.G.rows());
        Vec rhs = rhs_in;
        rhs.tail(m) = winv_ * rhs_in.tail(m);
        Vec sol = ldlt_.solve(rhs);
        for (int k = 0; k < kRefineSteps; ++k) {
            const Vec res = rhs - kkt_ * sol;
            if (res.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
            sol += ldlt_.solve(res);
        }
        sol.tail(m) = winv_ * Vec(sol.tail(m));
        return sol;
    }

private:
    static constexpr double kDelta = 1e-9;
    static constexpr int kRefineSteps = 10;

    const StandardForm& sf_;
    const ConeLayout& cones_;
    SpMat winv_, gs_, kkt_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

constexpr double kReducedTol = 1e-6;

struct Direction {
    Vec dx, dy, dz, ds;
    double dtau = 0.0;
    double dkappa = 0.0;
};

}  // namespace

SolveResult InteriorPointBackend::solve(const OptModel& model, const SolverOptions& opt) const {
    const auto start = std::chrono::steady_clock::now();
    SolveResult result;
    auto finish = [&](SolveStatus status, std::string message) {
        result.status = status;
        result.message = std::move(message);
        if (!result.primal.empty() || model.num_variables() == 0) {
            result.objective = model.objective_value(result.primal);
        }
        if (result.status == SolveStatus::kOptimal) {
            const double viol = model.max_violation(result.primal);
            if (viol > opt.report_tol) {
                result.status = SolveStatus::kNumericFailure;
                result.message = "solution violates the model by " + std::to_string(viol);
            }
        }
        result.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return result;
    };

    StandardForm sf = lower(model);
    const Vec col_scale = equilibrate(sf);
    const int n = sf.n;
    const int p = static_cast<int>(sf.A.rows());
    const int m = static_cast<int>(sf.G.rows());
    if (n == 0) return finish(SolveStatus::kOptimal, "empty model");

    // Objective scaling; the reported objective is re-evaluated on the model.
    const double cscale = std::max(1.0, sf.c.lpNorm<Eigen::Infinity>());
    sf.c /= cscale;

    const ConeOps ops(sf.cones);
    KktSolver kkt(sf, sf.cones);
    const Vec e = ops.identity();
    const double degree = sf.cones.degree();

    auto split = [&](const Vec& v, Vec& x, Vec& y, Vec& z) {
        x = v.head(n);
        y = v.segment(n, p);
        z = v.tail(m);
    };
    auto stack = [&](const Vec& a, const Vec& b, const Vec& c) {
        Vec v(n + p + m);
        v << a, b, c;
        return v;
    };

    // Starting point.
    if (!kkt.factor(nullptr)) return finish(SolveStatus::kNumericFailure, "initial KKT factorization failed");
    Vec x, y, z, s, tmp_x, tmp_y;
    split(kkt.solve(stack(Vec::Zero(n), sf.b, sf.h)), x, tmp_y, s);
    s = -s;
    Vec zhat;
    split(kkt.solve(stack(-sf.c, Vec::Zero(p), Vec::Zero(m))), tmp_x, y, zhat);
    z = zhat;
    if (m > 0) {
        const double ap = -ops.min_eig(s);
        if (ap >= 0.0) s += (1.0 + ap) * e;
        const double ad = -ops.min_eig(z);
        if (ad >= 0.0) z += (1.0 + ad) * e;
    }
    double tau = 1.0;
    double kappa = 1.0;

    auto set_primal = [&](const Vec& xv, double t) {
        const Vec unscaled = col_scale.cwiseProduct(xv) / t;
        result.primal.assign(unscaled.data(), unscaled.data() + n);
    };

    // Best iterate so far, used when progress stalls before the full
    // tolerances are met.
    struct Incumbent {
        double score = std::numeric_limits<double>::infinity();
        Vec x;
        double tau = 1.0;
    } best;
    auto fallback = [&](std::string why) {
        if (best.score < kReducedTol) {
            set_primal(best.x, best.tau);
            return finish(SolveStatus::kOptimal, "converged to reduced accuracy (" + why + ")");
        }
        set_primal(x, tau);
        return finish(SolveStatus::kNumericFailure, why);
    };

    const double bnorm = std::max(1.0, sf.b.norm());
    const double hnorm = std::max(1.0, sf.h.norm());
    const double cnorm = std::max(1.0, sf.c.norm());

    for (int iter = 0; iter <= opt.max_iterations; ++iter) {
        result.iterations = iter;
        const Vec rx = sf.A.transpose() * y + sf.G.transpose() * z + tau * sf.c;
        const Vec ry = sf.A * x - tau * sf.b;
        const Vec rz = s + sf.G * x - tau * sf.h;
        const double cx = sf.c.dot(x);
        const double by_hz = sf.b.dot(y) + sf.h.dot(z);
        const double rtau = kappa + cx + by_hz;
        const double sz = m > 0 ? s.dot(z) : 0.0;
        const double mu = (sz + tau * kappa) / (degree + 1.0);

        const double pcost = cx / tau;
        const double dcost = -by_hz / tau;
        const double pres = std::max(ry.norm() / bnorm, rz.norm() / hnorm) / tau;
        const double dres = rx.norm() / cnorm / tau;
        const double gap = sz / (tau * tau);
        double relgap = std::numeric_limits<double>::infinity();
        if (pcost < 0.0) relgap = gap / -pcost;
        else if (dcost > 0.0) relgap = gap / dcost;

        if (opt.verbose) {
            std::cerr << "ipm " << iter << " pcost=" << pcost * cscale << " dcost=" << dcost * cscale
                      << " gap=" << gap << " pres=" << pres << " dres=" << dres << " k/t=" << kappa / tau;
            const Vec xs = col_scale.cwiseProduct(x) / tau;
            std::cerr << " viol=" << model.max_violation(std::span<const double>(xs.data(), xs.size())) << "\n";
        }
        if (!std::isfinite(pcost) || !std::isfinite(dcost) || !std::isfinite(mu)) return fallback("non-finite iterate");
        if (const double score = std::max({pres, dres, std::min(gap, relgap)}); score < best.score) {
            best.score = score;
            best.x = x;
            best.tau = tau;
        }

        if (pres < opt.feastol && dres < opt.feastol && (gap < opt.abstol || relgap < opt.reltol)) {
            set_primal(x, tau);
            return finish(SolveStatus::kOptimal, "converged");
        }
        if (by_hz < 0.0) {
            const double hresx = (sf.A.transpose() * y + sf.G.transpose() * z).norm();
            if (hresx / -by_hz < opt.feastol) return finish(SolveStatus::kInfeasible, "primal infeasibility certificate");
        }
        if (cx < 0.0) {
            const double hres = std::max((sf.A * x).norm(), (sf.G * x + s).norm());
            if (hres / -cx < opt.feastol) return finish(SolveStatus::kUnbounded, "dual infeasibility certificate");
        }
        if (iter == opt.max_iterations) break;

        const Scaling w = ops.scaling(s, z);
        const Vec lambda = ops.apply_w(w, z, false);
        if (!kkt.factor(&w)) return fallback("KKT factorization failed");

        Vec x1, y1, z1;
        split(kkt.solve(stack(-sf.c, sf.b, sf.h)), x1, y1, z1);
        const double denom = sf.c.dot(x1) + sf.b.dot(y1) + sf.h.dot(z1) - kappa / tau;

        auto direction = [&](double factor, const Vec& ds_target, double dk_target) {
            Direction d;
            const Vec wl = ops.apply_w(w, ops.circ_inverse(lambda, ds_target), false);
            Vec x2, y2, z2;
            split(kkt.solve(stack(-factor * rx, -factor * ry, -factor * rz + wl)), x2, y2, z2);
            d.dtau = (-factor * rtau + dk_target / tau - sf.c.dot(x2) - sf.b.dot(y2) - sf.h.dot(z2)) / denom;
            d.dx = x2 + d.dtau * x1;
            d.dy = y2 + d.dtau * y1;
            d.dz = z2 + d.dtau * z1;
            // ds from the linearized primal residual row rather than from
            // W(lambda \ target + W dz): the latter loses digits once W is
            // badly conditioned near the optimum.
            d.ds = -factor * rz - sf.G * d.dx + d.dtau * sf.h;
            d.dkappa = (-dk_target - kappa * d.dtau) / tau;
            return d;
        };
        auto step_length = [&](const Direction& d) {
            double a = std::min(ops.max_step(s, d.ds), ops.max_step(z, d.dz));
            if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
            if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
            return a;
        };

        // Predictor.
        const Vec ll = ops.circ(lambda, lambda);
        const Direction aff = direction(1.0, ll, tau * kappa);
        const double alpha_aff = std::min(1.0, step_length(aff));
        const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

        // Corrector.
        const Vec corr = ops.circ(ops.apply_w(w, aff.ds, true), ops.apply_w(w, aff.dz, false));
        const Vec ds_target = ll + corr - sigma * mu * e;
        const double dk_target = tau * kappa + aff.dtau * aff.dkappa - sigma * mu;
        const Direction d = direction(1.0 - sigma, ds_target, dk_target);
        const double alpha = std::min(1.0, 0.99 * step_length(d));
        if (!(alpha > 1e-12)) return fallback("step length collapsed");

        x += alpha * d.dx;
        y += alpha * d.dy;
        z += alpha * d.dz;
        s += alpha * d.ds;
        tau += alpha * d.dtau;
        kappa += alpha * d.dkappa;
    }

    return fallback("iteration limit reached");
}

SolveResult solve(const OptModel& model, const SolverOptions& options) {
    return InteriorPointBackend{}.solve(model, options);
}

}  // namespace gridrelax
