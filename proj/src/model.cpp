#include "jetsde/model.hpp"

#include <cmath>
#include <memory>
#include <utility>

namespace jetsde {

Jet2 Coefficient::jet(const Vec& x, double t) const {
    if (!ast_)
        throw Error("derivative of a converted coefficient requested; only expression-backed "
                    "coefficients can be differentiated");
    return state_jet(*ast_, x, t);
}

std::string form_name(SdeForm f) {
    switch (f) {
        case SdeForm::Ito: return "ito";
        case SdeForm::Stratonovich: return "stratonovich";
        case SdeForm::JetField: return "jet";
        case SdeForm::VectorPair: return "vector";
    }
    return "?";
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double unit_double(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace

void SdeModel::validate() const {
    if (n == 0 || d == 0) throw ConfigError("model dimensions must be positive");
    if (static_cast<std::size_t>(x0.size()) != n) throw ConfigError("x0 length does not match n");
    if (!symbols) throw ConfigError("model lacks a symbol table");
    switch (form) {
        case SdeForm::Ito:
        case SdeForm::Stratonovich: {
            if (drift.size() != n) throw ConfigError("drift needs one expression per state");
            if (diffusion.size() != n) throw ConfigError("diffusion needs one row per state");
            for (const auto& row : diffusion)
                if (row.size() != d) throw ConfigError("diffusion needs one column per driver");
            break;
        }
        case SdeForm::JetField: {
            if (curve.size() != n) throw ConfigError("curve needs one expression per state");
            // gamma(x, u = 0, t) = x at x0 and at random probes
            const Vec zero_u = Vec::Zero(static_cast<Eigen::Index>(d));
            std::uint64_t h = 0x6a5d9c24u;
            for (int probe = 0; probe <= 20; ++probe) {
                Vec x = x0;
                if (probe > 0)
                    for (std::size_t i = 0; i < n; ++i)
                        x[i] += 2.0 * unit_double(mix64(h = mix64(h))) - 1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double v = eval_real(curve[i], x, zero_u, 0.0);
                    if (std::abs(v - x[i]) > 1e-9)
                        throw ConfigError("curve expression " + std::to_string(i + 1) +
                                          " does not pass through the base point: gamma(x,0) != x");
                }
            }
            break;
        }
        case SdeForm::VectorPair: {
            if (d != 1) throw ConfigError("vector form requires a single driver");
            if (flow_quadratic.size() != n || flow_linear.size() != n)
                throw ConfigError("vector form needs n expressions for each field");
            break;
        }
    }
    if (!floors.empty() && floors.size() != n) throw ConfigError("floors length does not match n");
}

bool SdeModel::has_floors() const {
    for (double f : floors)
        if (!std::isnan(f)) return true;
    return false;
}

void SdeModel::apply_floors(Vec& x) const {
    for (std::size_t i = 0; i < floors.size(); ++i)
        if (!std::isnan(floors[i]) && x[i] < floors[i]) x[i] = floors[i];
}

SdeModel make_ito_model(std::string name, std::size_t n, std::size_t d,
                        const std::vector<std::string>& drift_exprs,
                        const std::vector<std::vector<std::string>>& diffusion_exprs, const Vec& x0,
                        const std::map<std::string, double>& constants) {
    SdeModel m;
    m.name = std::move(name);
    m.n = n;
    m.d = d;
    m.form = SdeForm::Ito;
    SymbolTable table = SymbolTable::for_model(n, 0);
    table.constants = constants;
    m.symbols = std::make_shared<const SymbolTable>(std::move(table));
    m.x0 = x0;
    for (const auto& e : drift_exprs) m.drift.emplace_back(parse(e, m.symbols));
    for (const auto& row : diffusion_exprs) {
        std::vector<Coefficient> r;
        for (const auto& e : row) r.emplace_back(parse(e, m.symbols));
        m.diffusion.push_back(std::move(r));
    }
    m.validate();
    return m;
}

SdeModel make_jet_model(std::string name, std::size_t n, std::size_t d,
                        const std::vector<std::string>& curve_exprs, const Vec& x0,
                        const std::map<std::string, double>& constants) {
    SdeModel m;
    m.name = std::move(name);
    m.n = n;
    m.d = d;
    m.form = SdeForm::JetField;
    SymbolTable table = SymbolTable::for_model(n, d);
    table.constants = constants;
    m.symbols = std::make_shared<const SymbolTable>(std::move(table));
    m.x0 = x0;
    for (const auto& e : curve_exprs) m.curve.push_back(parse(e, m.symbols));
    m.validate();
    return m;
}

namespace {

DriftDiffusion eval_coefficients(const SdeModel& m, const Vec& x, double t) {
    DriftDiffusion ab;
    ab.a = Vec(static_cast<Eigen::Index>(m.n));
    ab.b = Mat(static_cast<Eigen::Index>(m.n), static_cast<Eigen::Index>(m.d));
    for (std::size_t i = 0; i < m.n; ++i) {
        ab.a[i] = m.drift[i](x, t);
        for (std::size_t k = 0; k < m.d; ++k) ab.b(i, k) = m.diffusion[i][k](x, t);
    }
    return ab;
}

JetFieldEval ito_field(std::shared_ptr<const SdeModel> m) {
    JetFieldEval f;
    f.n = m->n;
    f.d = m->d;
    f.full_curve = false;
    f.coefficients = [m](const Vec& x, double t) { return eval_coefficients(*m, x, t); };
    f.jet = [m](const Vec& x, double t) {
        const auto ab = eval_coefficients(*m, x, t);
        return canonical_jet(x, ab.a, ab.b);
    };
    f.curve = [m](const Vec& x, const Vec& u, double t) {
        const auto ab = eval_coefficients(*m, x, t);
        return canonical_curve(x, ab.a, ab.b, u);
    };
    return f;
}

JetFieldEval jet_field(std::shared_ptr<const SdeModel> m) {
    JetFieldEval f;
    f.n = m->n;
    f.d = m->d;
    f.full_curve = true;
    auto jet = [m](const Vec& x, double t) {
        const std::size_t n = m->n, d = m->d;
        std::vector<Jet2> states;
        states.reserve(n);
        for (std::size_t i = 0; i < n; ++i) states.push_back(Jet2::constant(x[i], d));
        std::vector<Jet2> seeds;
        seeds.reserve(d);
        for (std::size_t k = 0; k < d; ++k) seeds.push_back(Jet2::variable(0.0, k, d));
        const Jet2 tj = Jet2::constant(t, d);
        JetBindings env;
        env.states = states.data();
        env.n = n;
        env.drivers = seeds.data();
        env.d = d;
        env.time = &tj;
        env.jet_dim = d;
        JetPoint out;
        out.coords.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.coords.push_back(eval_jet(m->curve[i], env));
        return out;
    };
    f.jet = jet;
    f.coefficients = [jet](const Vec& x, double t) { return extract_ab(jet(x, t)); };
    f.curve = [m](const Vec& x, const Vec& u, double t) {
        Vec out(static_cast<Eigen::Index>(m->n));
        RealBindings env;
        env.states = x.data();
        env.n = m->n;
        env.drivers = u.data();
        env.d = m->d;
        env.time = t;
        for (std::size_t i = 0; i < m->n; ++i) out[i] = eval_real(m->curve[i], env);
        return out;
    };
    return f;
}

// Drift correction shared by both conversion directions:
// sum over drivers k and states h of d(b_{i,k})/dx_h * b_{h,k}.
Vec diffusion_correction(const SdeModel& m, const Vec& x, double t) {
    const std::size_t n = m.n, d = m.d;
    Mat b(n, d);
    std::vector<std::vector<Vec>> db(n);  // db[i][k] = gradient of b_{i,k}
    for (std::size_t i = 0; i < n; ++i) {
        db[i].resize(d);
        for (std::size_t k = 0; k < d; ++k) {
            const Jet2 j = m.diffusion[i][k].jet(x, t);
            b(i, k) = j.value;
            db[i][k] = j.grad;
        }
    }
    Vec corr = Vec::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t h = 0; h < n; ++h) corr[i] += db[i][k][h] * b(h, k);
    return corr;
}

SdeModel converted_drift_model(const SdeModel& model, SdeForm target, double sign,
                               const std::string& note) {
    SdeModel out = model;
    out.form = target;
    out.drift.clear();
    auto base = std::make_shared<const SdeModel>(model);
    for (std::size_t i = 0; i < model.n; ++i) {
        const Coefficient& orig = model.drift[i];
        out.drift.emplace_back(
            [base, orig, sign, i](const Vec& x, double t) {
                return orig(x, t) + sign * 0.5 * diffusion_correction(*base, x, t)[i];
            },
            note);
    }
    return out;
}

}  // namespace

JetFieldEval to_jet_field(const SdeModel& model) {
    model.validate();
    switch (model.form) {
        case SdeForm::Ito:
            return ito_field(std::make_shared<const SdeModel>(model));
        case SdeForm::JetField:
            return jet_field(std::make_shared<const SdeModel>(model));
        case SdeForm::Stratonovich:
            return ito_field(std::make_shared<const SdeModel>(strat_to_ito(model)));
        case SdeForm::VectorPair:
            return ito_field(std::make_shared<const SdeModel>(vector_to_standard(model)));
    }
    throw Error("unhandled model form");
}

SdeModel strat_to_ito(const SdeModel& model) {
    if (model.form != SdeForm::Stratonovich) throw ConfigError("model is not in Stratonovich form");
    return converted_drift_model(model, SdeForm::Ito, +1.0, "ito drift from stratonovich form");
}

SdeModel ito_to_strat(const SdeModel& model) {
    if (model.form != SdeForm::Ito) throw ConfigError("model is not in Ito form");
    return converted_drift_model(model, SdeForm::Stratonovich,
                                 -1.0, "stratonovich drift from ito form");
}

SdeModel vector_to_standard(const SdeModel& model) {
    if (model.form != SdeForm::VectorPair) throw ConfigError("model is not in vector form");
    SdeModel out = model;
    out.form = SdeForm::Ito;
    out.drift.clear();
    out.diffusion.assign(model.n, {});
    auto base = std::make_shared<const SdeModel>(model);
    for (std::size_t i = 0; i < model.n; ++i) {
        out.drift.emplace_back(
            [base, i](const Vec& x, double t) {
                double corr = 0.0;
                const Jet2 bi = base->flow_linear[i].jet(x, t);
                for (std::size_t j = 0; j < base->n; ++j)
                    corr += bi.grad[j] * base->flow_linear[j](x, t);
                return base->flow_quadratic[i](x, t) + 0.5 * corr;
            },
            "ito drift from vector form");
        out.diffusion[i].push_back(model.flow_linear[i]);
    }
    return out;
}

double backward_operator(const JetFieldEval& field, const ExprAst& f, const Vec& x, double t) {
    const JetPoint gamma = field.jet(x, t);
    const Jet2 f_jet = state_jet(f, x, t);
    return 0.5 * pushforward_scalar(gamma, f_jet).hess_trace();
}

JetFieldEval pushforward_field(const JetFieldEval& base, std::vector<ExprAst> maps) {
    auto shared_maps = std::make_shared<const std::vector<ExprAst>>(std::move(maps));
    for (const ExprAst& m : *shared_maps)
        if (m.symbols().states.size() != base.n)
            throw ShapeError("map expression symbol table does not match the field dimension");
    JetFieldEval f;
    f.n = shared_maps->size();
    f.d = base.d;
    f.full_curve = base.full_curve;
    auto jet = [base, shared_maps](const Vec& x, double t) {
        std::vector<Jet2> map_jets;
        map_jets.reserve(shared_maps->size());
        for (const ExprAst& m : *shared_maps) map_jets.push_back(state_jet(m, x, t));
        return pushforward(base.jet(x, t), map_jets);
    };
    f.jet = jet;
    f.coefficients = [jet](const Vec& x, double t) { return extract_ab(jet(x, t)); };
    f.curve = [base, shared_maps](const Vec& x, const Vec& u, double t) {
        const Vec y = base.curve(x, u, t);
        Vec out(static_cast<Eigen::Index>(shared_maps->size()));
        for (std::size_t i = 0; i < shared_maps->size(); ++i)
            out[i] = eval_real((*shared_maps)[i], y, t);
        return out;
    };
    return f;
}

Equivalence equivalence(const JetFieldEval& a, const JetFieldEval& b,
                        const std::vector<Vec>& probes, double t, double tol) {
    if (a.n != b.n || a.d != b.d) throw ShapeError("fields have different dimensions");
    bool strong = true;
    for (const Vec& x : probes) {
        const auto ca = a.coefficients(x, t);
        const auto cb = b.coefficients(x, t);
        if ((ca.a - cb.a).lpNorm<Eigen::Infinity>() > tol) return Equivalence::None;
        const Mat outer_a = ca.b * ca.b.transpose();
        const Mat outer_b = cb.b * cb.b.transpose();
        if ((outer_a - outer_b).lpNorm<Eigen::Infinity>() > tol) return Equivalence::None;
        if ((ca.b - cb.b).lpNorm<Eigen::Infinity>() > tol) strong = false;
    }
    return strong ? Equivalence::Strong : Equivalence::Weak;
}

std::vector<Vec> make_probes(const Vec& x0, std::size_t count, double half_width,
                             std::uint64_t seed) {
    const std::size_t n = static_cast<std::size_t>(x0.size());
    std::vector<Vec> probes;
    probes.reserve(count + 1);
    probes.push_back(x0);
    // Latin hypercube: one stratum per probe and dimension, shuffled.
    std::vector<std::vector<std::size_t>> strata(n, std::vector<std::size_t>(count));
    std::uint64_t h = seed;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < count; ++i) strata[j][i] = i;
        for (std::size_t i = count; i > 1; --i) {
            const std::size_t k = static_cast<std::size_t>(mix64(h = mix64(h)) % i);
            std::swap(strata[j][i - 1], strata[j][k]);
        }
    }
    for (std::size_t i = 0; i < count; ++i) {
        Vec p = x0;
        for (std::size_t j = 0; j < n; ++j) {
            const double frac =
                (static_cast<double>(strata[j][i]) + unit_double(mix64(h = mix64(h)))) /
                static_cast<double>(count);
            p[j] += half_width * (2.0 * frac - 1.0);
        }
        probes.push_back(p);
    }
    return probes;
}

}  // namespace jetsde
