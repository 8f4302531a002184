#pragma once

// Solver-agnostic conic program:
//
//   minimize    objective(x)
//   subject to  lower <= x <= upper
//               a_k' x  {<=, =, >=}  rhs_k          (linear rows)
//               (m_1(x), ..., m_n(x)) in K          (cone rows)
//
// where every m_i is affine and K is either the second-order cone
// m_1 >= ||(m_2, ..., m_n)|| or the rotated cone 2 m_1 m_2 >= sum_{i>=3} m_i^2
// with m_1, m_2 >= 0. Quadratic costs are lowered to rotated cones by
// add_quadratic_cost_epigraph() so a backend only needs linear + SOC support.

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridrelax/network.hpp"

namespace gridrelax {

struct VarRef {
    int index = -1;
    bool valid() const { return index >= 0; }
    friend bool operator==(VarRef, VarRef) = default;
};

struct Variable {
    std::string name;
    double lower = -kInf;
    double upper = kInf;
};

struct LinearTerm {
    int var = 0;
    double coef = 0.0;
    friend bool operator==(const LinearTerm&, const LinearTerm&) = default;
};

class AffineExpr {
public:
    AffineExpr() = default;
    explicit AffineExpr(double constant) : constant_(constant) {}

    AffineExpr& add(VarRef v, double coef);
    AffineExpr& add_constant(double c) {
        constant_ += c;
        return *this;
    }
    AffineExpr& operator+=(const AffineExpr& other);
    AffineExpr& operator*=(double s);

    /// Merge repeated variables, drop exact zeros and sort by index.
    void canonicalize();

    const std::vector<LinearTerm>& terms() const { return terms_; }
    double constant() const { return constant_; }
    double evaluate(std::span<const double> x) const;

private:
    std::vector<LinearTerm> terms_;
    double constant_ = 0.0;
};

enum class RowSense { kLessEqual, kEqual, kGreaterEqual };

struct LinearRow {
    std::vector<LinearTerm> terms;
    RowSense sense = RowSense::kEqual;
    double rhs = 0.0;
    std::string tag;
};

enum class ConeKind { kSecondOrder, kRotatedSecondOrder };

struct ConeRow {
    ConeKind kind = ConeKind::kSecondOrder;
    std::vector<AffineExpr> members;
    std::string tag;
};

struct RowViolation {
    std::string tag;
    double magnitude = 0.0;
};

class OptModel {
public:
    /// Names must be unique; throws Error(kInvalidNetwork) on reuse or on lower > upper.
    VarRef add_variable(std::string name, double lower = -kInf, double upper = kInf);

    /// Adds `expr sense rhs`; the constant part of `expr` is moved to the
    /// right-hand side. Throws if the row has no nonzero coefficient.
    void add_row(AffineExpr expr, RowSense sense, double rhs, std::string tag);
    void add_cone(ConeKind kind, std::vector<AffineExpr> members, std::string tag);

    void set_objective(AffineExpr obj);
    void add_to_objective(const AffineExpr& term);

    const std::vector<Variable>& variables() const { return variables_; }
    const std::vector<LinearRow>& rows() const { return rows_; }
    const std::vector<ConeRow>& cones() const { return cones_; }
    const AffineExpr& objective() const { return objective_; }
    std::size_t num_variables() const { return variables_.size(); }

    const Variable& variable(VarRef v) const { return variables_.at(static_cast<std::size_t>(v.index)); }
    std::optional<VarRef> find_variable(const std::string& name) const;

    double objective_value(std::span<const double> x) const { return objective_.evaluate(x); }

    /// Per-row violations above `tol`, covering bounds, linear rows and cones.
    std::vector<RowViolation> violations(std::span<const double> x, double tol) const;
    double max_violation(std::span<const double> x) const;

private:
    std::vector<Variable> variables_;
    std::unordered_map<std::string, int> by_name_;
    std::vector<LinearRow> rows_;
    std::vector<ConeRow> cones_;
    AffineExpr objective_;
};

/// Violation of a single cone row at x: max(0, ||tail|| - head) after the
/// rotated cone is mapped onto the standard one.
double cone_violation(const ConeRow& cone, std::span<const double> x);

/// Lower c2*(scale_mw*p)^2 + c1*scale_mw*p + c0 into the model. For c2 > 0 an
/// epigraph variable e >= 0 is introduced with the rotated cone
/// (e, 1/2, sqrt(c2)*scale_mw*p), i.e. e >= c2*(scale_mw*p)^2. Returns the
/// affine objective term. Throws Error(kNonconvexCost) for c2 < 0.
AffineExpr add_quadratic_cost_epigraph(OptModel& m, VarRef p, double c2, double c1, double c0,
                                       double scale_mw);

/// Deterministic plain-text listing; see docs/model_format.md.
std::string export_text(const OptModel& m);

}  // namespace gridrelax
