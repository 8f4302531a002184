#include "gridrelax/opt_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "gridrelax/error.hpp"

namespace gridrelax {

AffineExpr& AffineExpr::add(VarRef v, double coef) {
    terms_.push_back({v.index, coef});
    return *this;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    constant_ += other.constant_;
    return *this;
}

AffineExpr& AffineExpr::operator*=(double s) {
    for (auto& t : terms_) t.coef *= s;
    constant_ *= s;
    return *this;
}

void AffineExpr::canonicalize() {
    std::stable_sort(terms_.begin(), terms_.end(),
                     [](const LinearTerm& a, const LinearTerm& b) { return a.var < b.var; });
    std::vector<LinearTerm> merged;
    for (const auto& t : terms_) {
        if (!merged.empty() && merged.back().var == t.var) {
            merged.back().coef += t.coef;
        } else {
            merged.push_back(t);
        }
    }
    std::erase_if(merged, [](const LinearTerm& t) { return t.coef == 0.0; });
    terms_ = std::move(merged);
}

double AffineExpr::evaluate(std::span<const double> x) const {
    double v = constant_;
    for (const auto& t : terms_) v += t.coef * x[static_cast<std::size_t>(t.var)];
    return v;
}

VarRef OptModel::add_variable(std::string name, double lower, double upper) {
    if (lower > upper) throw Error(ErrorCode::kInvalidNetwork, "variable " + name + " has lower > upper");
    const int index = static_cast<int>(variables_.size());
    if (!by_name_.emplace(name, index).second) {
        throw Error(ErrorCode::kInvalidNetwork, "duplicate variable name " + name);
    }
    variables_.push_back({std::move(name), lower, upper});
    return VarRef{index};
}

void OptModel::add_row(AffineExpr expr, RowSense sense, double rhs, std::string tag) {
    expr.canonicalize();
    if (expr.terms().empty()) throw Error(ErrorCode::kInvalidNetwork, "row " + tag + " has no coefficients");
    for (const auto& t : expr.terms()) {
        if (t.var < 0 || static_cast<std::size_t>(t.var) >= variables_.size()) {
            throw Error(ErrorCode::kInvalidNetwork, "row " + tag + " references an undeclared variable");
        }
    }
    rows_.push_back({expr.terms(), sense, rhs - expr.constant(), std::move(tag)});
}

void OptModel::add_cone(ConeKind kind, std::vector<AffineExpr> members, std::string tag) {
    const std::size_t min_size = kind == ConeKind::kSecondOrder ? 1 : 2;
    if (members.size() < min_size) throw Error(ErrorCode::kInvalidNetwork, "cone " + tag + " is too short");
    for (auto& m : members) m.canonicalize();
    cones_.push_back({kind, std::move(members), std::move(tag)});
}

void OptModel::set_objective(AffineExpr obj) {
    obj.canonicalize();
    objective_ = std::move(obj);
}

void OptModel::add_to_objective(const AffineExpr& term) {
    objective_ += term;
    objective_.canonicalize();
}

std::optional<VarRef> OptModel::find_variable(const std::string& name) const {
    if (auto it = by_name_.find(name); it != by_name_.end()) return VarRef{it->second};
    return std::nullopt;
}

double cone_violation(const ConeRow& cone, std::span<const double> x) {
    std::vector<double> v;
    v.reserve(cone.members.size());
    for (const auto& m : cone.members) v.push_back(m.evaluate(x));
    double head = v[0];
    double tail_sq = 0.0;
    std::size_t rest = 1;
    if (cone.kind == ConeKind::kRotatedSecondOrder) {
        head = (v[0] + v[1]) / std::sqrt(2.0);
        const double d = (v[0] - v[1]) / std::sqrt(2.0);
        tail_sq = d * d;
        rest = 2;
    }
    for (std::size_t i = rest; i < v.size(); ++i) tail_sq += v[i] * v[i];
    return std::max(0.0, std::sqrt(tail_sq) - head);
}

std::vector<RowViolation> OptModel::violations(std::span<const double> x, double tol) const {
    std::vector<RowViolation> out;
    for (std::size_t j = 0; j < variables_.size(); ++j) {
        const double viol = std::max({0.0, variables_[j].lower - x[j], x[j] - variables_[j].upper});
        if (viol > tol) out.push_back({"bound:" + variables_[j].name, viol});
    }
    for (const auto& row : rows_) {
        double lhs = 0.0;
        for (const auto& t : row.terms) lhs += t.coef * x[static_cast<std::size_t>(t.var)];
        double viol = 0.0;
        switch (row.sense) {
            case RowSense::kLessEqual: viol = std::max(0.0, lhs - row.rhs); break;
            case RowSense::kEqual: viol = std::abs(lhs - row.rhs); break;
            case RowSense::kGreaterEqual: viol = std::max(0.0, row.rhs - lhs); break;
        }
        if (viol > tol) out.push_back({row.tag, viol});
    }
    for (const auto& cone : cones_) {
        const double viol = cone_violation(cone, x);
        if (viol > tol) out.push_back({cone.tag, viol});
    }
    return out;
}

double OptModel::max_violation(std::span<const double> x) const {
    double worst = 0.0;
    for (const auto& v : violations(x, 0.0)) worst = std::max(worst, v.magnitude);
    return worst;
}

AffineExpr add_quadratic_cost_epigraph(OptModel& m, VarRef p, double c2, double c1, double c0,
                                       double scale_mw) {
    if (c2 < 0.0) throw Error(ErrorCode::kNonconvexCost, "c2 < 0 for " + m.variable(p).name);
    AffineExpr term(c0);
    if (c1 != 0.0) term.add(p, c1 * scale_mw);
    if (c2 == 0.0) return term;

    const VarRef e = m.add_variable("cost_epi[" + m.variable(p).name + "]", 0.0, kInf);
    AffineExpr head;
    head.add(e, 1.0);
    AffineExpr scaled;
    scaled.add(p, std::sqrt(c2) * scale_mw);
    m.add_cone(ConeKind::kRotatedSecondOrder, {head, AffineExpr(0.5), scaled},
               "cost_epigraph[" + m.variable(p).name + "]");
    term.add(e, 1.0);
    return term;
}

namespace {

std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void write_expr(std::ostream& os, const std::vector<LinearTerm>& terms, double constant,
                const std::vector<Variable>& vars) {
    bool first = true;
    for (const auto& t : terms) {
        if (!first) os << ' ';
        os << (t.coef < 0 ? "- " : (first ? "" : "+ ")) << num(std::abs(t.coef)) << ' '
           << vars[static_cast<std::size_t>(t.var)].name;
        first = false;
    }
    if (constant != 0.0 || first) {
        if (!first) os << (constant < 0 ? " - " : " + ") << num(std::abs(constant));
        else os << num(constant);
    }
}

const char* sense_symbol(RowSense s) {
    switch (s) {
        case RowSense::kLessEqual: return "<=";
        case RowSense::kEqual: return "=";
        case RowSense::kGreaterEqual: return ">=";
    }
    return "?";
}

}  // namespace

std::string export_text(const OptModel& m) {
    std::ostringstream os;
    const auto& vars = m.variables();
    os << "# gridrelax conic model v1\n";
    os << "variables " << vars.size() << "\n";
    for (std::size_t j = 0; j < vars.size(); ++j) {
        os << "  " << j << ' ' << vars[j].name << " [" << num(vars[j].lower) << ", " << num(vars[j].upper) << "]\n";
    }
    os << "minimize\n  ";
    write_expr(os, m.objective().terms(), m.objective().constant(), vars);
    os << "\n";
    os << "linear " << m.rows().size() << "\n";
    for (const auto& row : m.rows()) {
        os << "  " << row.tag << ": ";
        write_expr(os, row.terms, 0.0, vars);
        os << ' ' << sense_symbol(row.sense) << ' ' << num(row.rhs) << "\n";
    }
    os << "cones " << m.cones().size() << "\n";
    for (const auto& cone : m.cones()) {
        os << "  " << cone.tag << ": " << (cone.kind == ConeKind::kSecondOrder ? "soc" : "rsoc") << " (";
        for (std::size_t i = 0; i < cone.members.size(); ++i) {
            os << (i ? " ; " : " ");
            write_expr(os, cone.members[i].terms(), cone.members[i].constant(), vars);
        }
        os << " )\n";
    }
    return os.str();
}

}  // namespace gridrelax
