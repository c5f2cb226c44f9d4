#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "jetsde/brownian.hpp"
#include "jetsde/model.hpp"
#include "test_support.hpp"

using namespace jetsde;
using jetsde::testing::TestRng;

namespace {

SdeModel rotor_ito() {
    return make_ito_model("rotor", 2, 1, {"3*x1", "3*x2"}, {{"-x2"}, {"x1"}},
                          (Vec(2) << 1.0, 0.0).finished());
}

SdeModel rotor_curve_model() {
    return make_jet_model("rotor-curve", 2, 1,
                          {"x1 - x2*u1 + 3*x1*u1^2", "x2 + x1*u1 + 3*x2*u1^2"},
                          (Vec(2) << 1.0, 0.0).finished());
}

SdeModel gbm_ito(double mu, double sigma) {
    return make_ito_model("gbm", 1, 1, {"mu*x1"}, {{"sigma*x1"}}, Vec::Ones(1),
                          {{"mu", mu}, {"sigma", sigma}});
}

Vec v1(double x) { return Vec::Constant(1, x); }

}  // namespace

TEST_CASE("to_jet_field") {
    SUBCASE("standard Brownian motion: jet is x + u") {
        const SdeModel m = make_ito_model("bm", 1, 1, {"0"}, {{"1"}}, Vec::Zero(1));
        const JetFieldEval f = to_jet_field(m);
        const JetPoint j = f.jet(v1(0.7), 0.0);
        CHECK(j.coords[0].value == 0.7);
        CHECK(j.coords[0].grad[0] == 1.0);
        CHECK(j.coords[0].hess(0, 0) == 0.0);
        CHECK(f.curve(v1(0.7), v1(0.25), 0.0)[0] == doctest::Approx(0.95));
    }

    SUBCASE("quadratic curve x + u^2 has unit drift and no diffusion") {
        const SdeModel m = make_jet_model("alpha2", 1, 1, {"x1 + u1^2"}, Vec::Zero(1));
        const auto ab = to_jet_field(m).coefficients(v1(0.3), 0.0);
        CHECK(ab.a[0] == doctest::Approx(1.0));
        CHECK(ab.b(0, 0) == doctest::Approx(0.0));
    }

    SUBCASE("Heston coefficients at the reference point") {
        const SdeModel m = make_ito_model(
            "heston", 2, 2, {"mu*x1", "kappa*(theta - x2)"},
            {{"sqrt(x2)*x1", "0"}, {"xi*sqrt(x2)*rho", "xi*sqrt(x2)*sqrt(1 - rho^2)"}},
            (Vec(2) << 1.0, 0.4).finished(),
            {{"mu", 0.1}, {"kappa", 1.0}, {"theta", 0.4}, {"xi", 1.0}, {"rho", 0.5}});
        const auto ab = to_jet_field(m).coefficients(m.x0, 0.0);
        CHECK(ab.a[0] == doctest::Approx(0.1));
        CHECK(ab.a[1] == doctest::Approx(0.0));
        const double s = std::sqrt(0.4);
        CHECK(ab.b(0, 0) == doctest::Approx(s));
        CHECK(ab.b(0, 1) == doctest::Approx(0.0));
        CHECK(ab.b(1, 0) == doctest::Approx(0.5 * s));
        CHECK(ab.b(1, 1) == doctest::Approx(std::sqrt(0.75) * s));
    }

    SUBCASE("full curve differs from the canonical representative off the jet") {
        const JetFieldEval f = to_jet_field(rotor_curve_model());
        CHECK(f.full_curve);
        const Vec x = (Vec(2) << 1.0, 0.0).finished();
        const Vec u = v1(0.3);
        const Vec c = f.curve(x, u, 0.0);
        CHECK(c[0] == doctest::Approx(1.0 - 0.0 + 3 * 0.09));
        CHECK(c[1] == doctest::Approx(0.0 + 0.3 + 0.0));
    }
}

TEST_CASE("jet-field models must pass through the base point") {
    CHECK_THROWS_AS(make_jet_model("bad", 1, 1, {"x1 + 1 + u1"}, Vec::Zero(1)), ConfigError);
}

TEST_CASE("stratonovich/ito conversions") {
    SUBCASE("constant diffusion leaves the drift unchanged") {
        SdeModel m = make_ito_model("add", 1, 1, {"-x1"}, {{"2"}}, Vec::Zero(1));
        m.form = SdeForm::Stratonovich;
        const SdeModel ito = strat_to_ito(m);
        for (double x : {-1.0, 0.0, 2.0}) CHECK(ito.drift[0](v1(x), 0.0) == doctest::Approx(-x));
    }

    SUBCASE("geometric Brownian motion gains half sigma^2 x") {
        SdeModel strat = make_ito_model("gbm-strat", 1, 1, {"0"}, {{"sigma*x1"}}, Vec::Ones(1),
                                        {{"sigma", 0.2}});
        strat.form = SdeForm::Stratonovich;
        const SdeModel ito = strat_to_ito(strat);
        CHECK(ito.form == SdeForm::Ito);
        for (double x : {0.5, 1.0, 2.0})
            CHECK(ito.drift[0](v1(x), 0.0) == doctest::Approx(0.02 * x));

        const SdeModel gbm = gbm_ito(0.0, 0.2);
        const SdeModel back = ito_to_strat(gbm);
        for (double x : {0.5, 1.0, 2.0})
            CHECK(back.drift[0](v1(x), 0.0) == doctest::Approx(-0.02 * x));
    }

    SUBCASE("round trip is the identity on probes") {
        const SdeModel m = make_ito_model(
            "mixed", 2, 2, {"x1*x2", "sin(x1)"},
            {{"1 + x2^2", "x1*x2"}, {"cos(x2)", "exp(x1/4)"}}, (Vec(2) << 0.5, -0.25).finished());
        const SdeModel round = strat_to_ito(ito_to_strat(m));
        for (const Vec& x : make_probes(m.x0, 20, 1.0)) {
            for (std::size_t i = 0; i < 2; ++i)
                CHECK(std::abs(round.drift[i](x, 0.0) - m.drift[i](x, 0.0)) < 1e-10);
        }
    }

    SUBCASE("log coordinates of driftless GBM: ito drift -sigma^2/2") {
        const SdeModel gbm = gbm_ito(0.0, 0.2);
        const JetFieldEval field = to_jet_field(gbm);
        auto logsym = std::make_shared<const SymbolTable>(SymbolTable::for_model(1, 0));
        const ExprAst logf = parse("log(x1)", logsym);
        for (double x : {0.5, 1.0, 1.7}) {
            const JetPoint pushed = pushforward(field.jet(v1(x), 0.0), {state_jet(logf, v1(x))});
            const auto ab = extract_ab(pushed);
            CHECK(ab.a[0] == doctest::Approx(-0.02));
            CHECK(ab.b(0, 0) == doctest::Approx(0.2));
        }
    }

    SUBCASE("wrong input form is rejected") {
        CHECK_THROWS_AS(strat_to_ito(gbm_ito(0.0, 0.2)), ConfigError);
    }
}

namespace {

Vec rk4_flow(const std::function<Vec(const Vec&)>& v, Vec x, double time, int steps) {
    const double h = time / steps;
    for (int i = 0; i < steps; ++i) {
        const Vec k1 = v(x);
        const Vec k2 = v(x + 0.5 * h * k1);
        const Vec k3 = v(x + 0.5 * h * k2);
        const Vec k4 = v(x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

}  // namespace

TEST_CASE("vector representation to standard form") {
    SUBCASE("constant second field: a = A, b = B") {
        SdeModel m;
        m.name = "const-vec";
        m.n = 1;
        m.d = 1;
        m.form = SdeForm::VectorPair;
        m.symbols = std::make_shared<const SymbolTable>(SymbolTable::for_model(1, 0));
        m.x0 = Vec::Zero(1);
        m.flow_quadratic.emplace_back(parse("x1 + 1", m.symbols));
        m.flow_linear.emplace_back(parse("3", m.symbols));
        const SdeModel std_form = vector_to_standard(m);
        CHECK(std_form.drift[0](v1(0.7), 0.0) == doctest::Approx(1.7));
        CHECK(std_form.diffusion[0][0](v1(0.7), 0.0) == doctest::Approx(3.0));
    }

    SUBCASE("A = 0, B = x gives drift x/2") {
        SdeModel m;
        m.name = "linear-vec";
        m.n = 1;
        m.d = 1;
        m.form = SdeForm::VectorPair;
        m.symbols = std::make_shared<const SymbolTable>(SymbolTable::for_model(1, 0));
        m.x0 = Vec::Ones(1);
        m.flow_quadratic.emplace_back(parse("0", m.symbols));
        m.flow_linear.emplace_back(parse("x1", m.symbols));
        const SdeModel std_form = vector_to_standard(m);
        for (double x : {0.5, 1.0, -2.0}) {
            CHECK(std_form.drift[0](v1(x), 0.0) == doctest::Approx(0.5 * x));
            CHECK(std_form.diffusion[0][0](v1(x), 0.0) == doctest::Approx(x));
        }
    }

    SUBCASE("numerical flow-composition oracle on random polynomial fields") {
        TestRng rng(99);
        auto sym = std::make_shared<const SymbolTable>(SymbolTable::for_model(2, 0));
        auto random_poly = [&rng]() {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%.3f + %.3f*x1 + %.3f*x2 + %.3f*x1*x2 + %.3f*x1^2 + %.3f*x2^2",
                          rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                          rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
            return std::string(buf);
        };
        for (int trial = 0; trial < 5; ++trial) {
            SdeModel m;
            m.name = "vec-oracle";
            m.n = 2;
            m.d = 1;
            m.form = SdeForm::VectorPair;
            m.symbols = sym;
            m.x0 = (Vec(2) << rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)).finished();
            for (int i = 0; i < 2; ++i) {
                m.flow_quadratic.emplace_back(parse(random_poly(), sym));
                m.flow_linear.emplace_back(parse(random_poly(), sym));
            }
            const SdeModel std_form = vector_to_standard(m);

            auto field_a = [&](const Vec& x) {
                Vec r(2);
                for (int i = 0; i < 2; ++i) r[i] = m.flow_quadratic[i](x, 0.0);
                return r;
            };
            auto field_b = [&](const Vec& x) {
                Vec r(2);
                for (int i = 0; i < 2; ++i) r[i] = m.flow_linear[i](x, 0.0);
                return r;
            };
            auto curve = [&](double t) {
                const Vec mid = rk4_flow(field_b, m.x0, t, 64);
                return rk4_flow(field_a, mid, t * t, 64);
            };

            // five-point second derivative at t = 0; gamma''(0) = 2a
            const double h = 1e-2;
            const Vec d2 = (-curve(2 * h) + 16.0 * curve(h) - 30.0 * curve(0.0) +
                            16.0 * curve(-h) - curve(-2 * h)) /
                           (12.0 * h * h);
            for (int i = 0; i < 2; ++i) {
                const double a_i = std_form.drift[i](m.x0, 0.0);
                CHECK(std::abs(d2[i] - 2.0 * a_i) < 1e-4);
            }
        }
    }
}

TEST_CASE("backward operator") {
    const JetFieldEval rotor = to_jet_field(rotor_ito());
    auto sym = std::make_shared<const SymbolTable>(SymbolTable::for_model(2, 0));

    SUBCASE("linear function under a driftless field") {
        const SdeModel m =
            make_ito_model("drift-free", 2, 1, {"0", "0"}, {{"-x2"}, {"x1"}}, Vec::Ones(2));
        const ExprAst f = parse("2*x1 + 3*x2", sym);
        CHECK(backward_operator(to_jet_field(m), f, (Vec(2) << 1.0, 1.0).finished(), 0.0) ==
              doctest::Approx(0.0));
    }

    SUBCASE("rotor field on the squared radius") {
        const ExprAst f = parse("x1^2 + x2^2", sym);
        CHECK(backward_operator(rotor, f, (Vec(2) << 1.0, 0.0).finished(), 0.0) ==
              doctest::Approx(7.0));
    }

    SUBCASE("linearity in the test function") {
        const ExprAst f = parse("x1^2 + x2^2", sym);
        const ExprAst g = parse("sin(x1)*x2", sym);
        const ExprAst combo = parse("2.5*(x1^2 + x2^2) - 1.25*(sin(x1)*x2)", sym);
        for (const Vec& x : make_probes((Vec(2) << 1.0, 0.0).finished(), 5)) {
            const double lf = backward_operator(rotor, f, x, 0.0);
            const double lg = backward_operator(rotor, g, x, 0.0);
            const double lc = backward_operator(rotor, combo, x, 0.0);
            CHECK(std::abs(lc - (2.5 * lf - 1.25 * lg)) < 1e-12);
        }
    }

    SUBCASE("one-step Monte Carlo expectation matches L f dt") {
        // E[f(X_dt)] for the full rotor curve and f = |x|^2 is exactly
        // 1 + 7 dt + 27 dt^2 (E[s^2] = dt, E[s^4] = 3 dt^2).
        const JetFieldEval field = to_jet_field(rotor_curve_model());
        const ExprAst f = parse("x1^2 + x2^2", sym);
        const Vec x0 = (Vec(2) << 1.0, 0.0).finished();
        const double dt = 1e-3;
        const std::size_t m_paths = 1000000;
        const double sqrt_dt = std::sqrt(dt);
        std::vector<double> samples(m_paths);
        Vec u(1);
        for (std::size_t p = 0; p < m_paths; ++p) {
            u[0] = sqrt_dt * rng::normal01(321, p, 0, 0);
            const Vec x = field.curve(x0, u, 0.0);
            samples[p] = x[0] * x[0] + x[1] * x[1];
        }
        const double mean = jetsde::testing::pairwise_mean(samples);
        double var = 0.0;
        for (double s : samples) var += (s - mean) * (s - mean);
        var /= static_cast<double>(m_paths - 1);
        const double se = std::sqrt(var / static_cast<double>(m_paths));

        const double exact = 1.0 + 7.0 * dt + 27.0 * dt * dt;
        CHECK(std::abs(mean - exact) < 3.0 * se);

        const double lf = backward_operator(field, f, x0, 0.0);
        CHECK(lf == doctest::Approx(7.0));
        // first-order claim: the dt^2 remainder is the exact 27 dt^2 term
        CHECK(std::abs((mean - 1.0) - lf * dt) < 27.0 * dt * dt + 3.0 * se);
    }
}

TEST_CASE("equivalence classification") {
    const auto probes = make_probes(Vec::Zero(2), 20, 1.0);

    SUBCASE("a field is strongly equivalent to itself") {
        const JetFieldEval f = to_jet_field(rotor_ito());
        CHECK(equivalence(f, f, probes) == Equivalence::Strong);
    }

    SUBCASE("the three quadratic representatives define the same SDE") {
        const Vec x0 = Vec::Zero(2);
        const SdeModel a = make_jet_model("jet-a", 2, 2, {"x1 + u1 + 2*u1^2", "x2 + 2*u2"}, x0);
        const SdeModel b = make_jet_model("jet-b", 2, 2, {"x1 + u1 + 2*u2^2", "x2 + 2*u2"}, x0);
        const SdeModel c =
            make_jet_model("jet-c", 2, 2, {"x1 + u1 + u1^2 + u2^2", "x2 + 2*u2"}, x0);
        const JetFieldEval fa = to_jet_field(a), fb = to_jet_field(b), fc = to_jet_field(c);
        CHECK(equivalence(fa, fb, probes) == Equivalence::Strong);
        CHECK(equivalence(fa, fc, probes) == Equivalence::Strong);
        CHECK(equivalence(fb, fc, probes) == Equivalence::Strong);

        const auto ab = fa.coefficients(x0, 0.0);
        CHECK(ab.a[0] == doctest::Approx(2.0));
        CHECK(ab.a[1] == doctest::Approx(0.0));
    }

    SUBCASE("sign-flipped diffusion is weakly but not strongly equivalent") {
        const auto p1 = make_probes(Vec::Ones(1), 20, 0.5);
        const SdeModel plus = make_ito_model("plus", 1, 1, {"x1"}, {{"1 + x1^2"}}, Vec::Ones(1));
        const SdeModel minus =
            make_ito_model("minus", 1, 1, {"x1"}, {{"-(1 + x1^2)"}}, Vec::Ones(1));
        CHECK(equivalence(to_jet_field(plus), to_jet_field(minus), p1) == Equivalence::Weak);
    }

    SUBCASE("different drifts are not equivalent") {
        const SdeModel a = make_ito_model("a", 1, 1, {"x1"}, {{"1"}}, Vec::Zero(1));
        const SdeModel b = make_ito_model("b", 1, 1, {"0"}, {{"1"}}, Vec::Zero(1));
        const auto p1 = make_probes(Vec::Ones(1), 20, 0.5);
        CHECK(equivalence(to_jet_field(a), to_jet_field(b), p1) == Equivalence::None);
    }

    SUBCASE("canonicalization preserves the SDE") {
        // the coefficient form of the full-curve model is its canonical field
        const JetFieldEval full = to_jet_field(rotor_curve_model());
        const JetFieldEval canonical = to_jet_field(rotor_ito());
        const auto p = make_probes((Vec(2) << 1.0, 0.0).finished(), 20, 0.8);
        CHECK(equivalence(full, canonical, p) == Equivalence::Strong);
    }
}

TEST_CASE("converted coefficients print a provenance note") {
    const SdeModel strat = ito_to_strat(gbm_ito(0.05, 0.2));
    CHECK(strat.drift[0].display().find("<") == 0);
    CHECK(strat.diffusion[0][0].display().find("sigma") == std::string::npos);  // folded constant
    CHECK(strat.drift[0].has_expr() == false);
    CHECK_THROWS_AS(strat.drift[0].jet(Vec::Ones(1), 0.0), Error);
}

TEST_CASE("latin hypercube probes stay in the requested box") {
    const Vec x0 = (Vec(3) << 1.0, -2.0, 0.5).finished();
    const auto probes = make_probes(x0, 20, 0.75);
    CHECK(probes.size() == 21);
    CHECK(probes[0] == x0);
    for (const auto& p : probes)
        for (int i = 0; i < 3; ++i) CHECK(std::abs(p[i] - x0[i]) <= 0.75);
    // deterministic
    const auto again = make_probes(x0, 20, 0.75);
    for (std::size_t i = 0; i < probes.size(); ++i) CHECK((probes[i] - again[i]).norm() == 0.0);
}
