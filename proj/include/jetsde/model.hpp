#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jetsde/expr.hpp"
#include "jetsde/jet.hpp"
#include "jetsde/types.hpp"

namespace jetsde {

/// One scalar coefficient of an SDE: either a parsed expression over the
/// state variables and time, or a numeric callable produced by a
/// representation conversion. Converted coefficients keep no rebuilt
/// expression text; they print a provenance note instead.
class Coefficient {
public:
    Coefficient() = default;
    /*implicit*/ Coefficient(ExprAst ast) : ast_(std::move(ast)) {}
    Coefficient(std::function<double(const Vec&, double)> fn, std::string note)
        : fn_(std::move(fn)), note_(std::move(note)) {}

    double operator()(const Vec& x, double t) const {
        return ast_ ? eval_real(*ast_, x, t) : fn_(x, t);
    }

    bool has_expr() const { return ast_.has_value(); }
    const ExprAst& expr() const { return *ast_; }

    /// Jet in the state variables (value, gradient, Hessian w.r.t. x).
    /// Only expression-backed coefficients support this.
    Jet2 jet(const Vec& x, double t) const;

    std::string display() const { return ast_ ? print(*ast_) : "<" + note_ + ">"; }

private:
    std::optional<ExprAst> ast_;
    std::function<double(const Vec&, double)> fn_;
    std::string note_;
};

enum class SdeForm { Ito, Stratonovich, JetField, VectorPair };

std::string form_name(SdeForm f);

/// An n-dimensional SDE with d drivers in one of four representations.
///  - Ito / Stratonovich: drift (n) and diffusion (n x d) coefficients.
///  - JetField: curve expressions over states, u1..ud and t.
///  - VectorPair: two vector fields (d = 1); the curve is the t-flow of
///    the second followed by the t^2-flow of the first.
struct SdeModel {
    std::string name;
    std::size_t n = 1;
    std::size_t d = 1;
    SdeForm form = SdeForm::Ito;
    std::shared_ptr<const SymbolTable> symbols;
    Vec x0;

    std::vector<Coefficient> drift;                // Ito/Stratonovich: n
    std::vector<std::vector<Coefficient>> diffusion;  // Ito/Stratonovich: n x d
    std::vector<ExprAst> curve;                    // JetField: n
    std::vector<Coefficient> flow_quadratic;       // VectorPair A: n
    std::vector<Coefficient> flow_linear;          // VectorPair B: n

    std::vector<double> floors;  // optional per-state lower clamp; NaN = none

    /// Structural checks plus the curve base-point identity
    /// gamma(x, u=0, t) = x at x0 and 20 random probes.
    void validate() const;

    bool has_floors() const;
    void apply_floors(Vec& x) const;
};

/// Helpers for building models in code.
SdeModel make_ito_model(std::string name, std::size_t n, std::size_t d,
                        const std::vector<std::string>& drift_exprs,
                        const std::vector<std::vector<std::string>>& diffusion_exprs, const Vec& x0,
                        const std::map<std::string, double>& constants = {});
SdeModel make_jet_model(std::string name, std::size_t n, std::size_t d,
                        const std::vector<std::string>& curve_exprs, const Vec& x0,
                        const std::map<std::string, double>& constants = {});

/// Evaluatable view of a model as a field of 2-jets: jet(x, t) is the
/// 2-jet of the curve at u = 0, curve(x, u, t) evaluates the actual curve
/// at a real driver offset (the canonical quadratic when the model gives
/// only coefficients).
struct JetFieldEval {
    std::size_t n = 0;
    std::size_t d = 0;
    bool full_curve = false;
    std::function<JetPoint(const Vec&, double)> jet;
    std::function<Vec(const Vec&, const Vec&, double)> curve;
    std::function<DriftDiffusion(const Vec&, double)> coefficients;
};

JetFieldEval to_jet_field(const SdeModel& model);

/// Ito <-> Stratonovich drift correction: half the diffusion gradient
/// contracted with the diffusion itself, derivatives via jet evaluation.
SdeModel strat_to_ito(const SdeModel& model);
SdeModel ito_to_strat(const SdeModel& model);

/// Vector representation to the standard (Ito) one:
/// a = A + (1/2)(grad B)B, b = B. Requires d = 1.
SdeModel vector_to_standard(const SdeModel& model);

/// Generator via jets: half the driver-space Laplacian of f composed with
/// the curve, computed by pushforward. Equals a.grad(f) + (1/2) sum_a
/// b_a^T Hess(f) b_a.
double backward_operator(const JetFieldEval& field, const ExprAst& f, const Vec& x, double t);

/// The image field under a smooth map: jets compose, which is Ito's lemma.
/// The returned field is still indexed by the source coordinates; its jet
/// values (and curves) live in the image space.
JetFieldEval pushforward_field(const JetFieldEval& base, std::vector<ExprAst> maps);

enum class Equivalence { None, Weak, Strong };

/// Pointwise comparison at probes: weak when drifts and diffusion outer
/// products agree, strong when the diffusion matrices agree entrywise.
Equivalence equivalence(const JetFieldEval& a, const JetFieldEval& b,
                        const std::vector<Vec>& probes, double t = 0.0, double tol = 1e-9);

/// Latin hypercube probe cloud: x0 plus `count` points in the box of the
/// given half width around it.
std::vector<Vec> make_probes(const Vec& x0, std::size_t count = 20, double half_width = 1.0,
                             std::uint64_t seed = 20259);

}  // namespace jetsde
