#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "jetsde/jet.hpp"
#include "test_support.hpp"

using namespace jetsde;
using jetsde::testing::TestRng;

namespace {

// gamma at (x1,x2): value x + t(-x2,x1) + 3t^2(x1,x2), one driver.
JetPoint rotor_jet(double x1, double x2) {
    JetPoint jet;
    Jet2 c1(1), c2(1);
    c1.value = x1;
    c1.grad[0] = -x2;
    c1.hess(0, 0) = 6.0 * x1;
    c2.value = x2;
    c2.grad[0] = x1;
    c2.hess(0, 0) = 6.0 * x2;
    jet.coords = {c1, c2};
    return jet;
}

Vec rotor_curve(double x1, double x2, double t) {
    Vec v(2);
    v << x1 - t * x2 + 3.0 * t * t * x1, x2 + t * x1 + 3.0 * t * t * x2;
    return v;
}

// angle/log-radius map: (atan(x2/x1), log sqrt(x1^2+x2^2))
Vec polar_log(const Vec& x) {
    Vec v(2);
    v << std::atan(x[1] / x[0]), std::log(std::sqrt(x[0] * x[0] + x[1] * x[1]));
    return v;
}

std::vector<Jet2> polar_log_jets(const Vec& x) {
    const double x1 = x[0], x2 = x[1];
    const double r2 = x1 * x1 + x2 * x2;
    Jet2 theta(2), lr(2);
    theta.value = std::atan(x2 / x1);
    theta.grad << -x2 / r2, x1 / r2;
    theta.hess(0, 0) = 2.0 * x1 * x2 / (r2 * r2);
    theta.hess(0, 1) = (x2 * x2 - x1 * x1) / (r2 * r2);
    theta.hess(1, 1) = -2.0 * x1 * x2 / (r2 * r2);
    lr.value = 0.5 * std::log(r2);
    lr.grad << x1 / r2, x2 / r2;
    lr.hess(0, 0) = (x2 * x2 - x1 * x1) / (r2 * r2);
    lr.hess(0, 1) = -2.0 * x1 * x2 / (r2 * r2);
    lr.hess(1, 1) = (x1 * x1 - x2 * x2) / (r2 * r2);
    return {theta, lr};
}

}  // namespace

TEST_CASE("jet arithmetic on constants and seeds") {
    const Jet2 two = Jet2::constant(2.0, 2);
    const Jet2 three = Jet2::constant(3.0, 2);
    const Jet2 prod = two * three;
    CHECK(prod.value == 6.0);
    CHECK(prod.derivatives_zero());

    // u1^2 in two drivers: value 0, zero gradient, d^2/du1^2 = 2
    const Jet2 u1 = Jet2::variable(0.0, 0, 2);
    const Jet2 sq = u1 * u1;
    CHECK(sq.value == 0.0);
    CHECK(sq.grad.norm() == 0.0);
    CHECK(sq.hess(0, 0) == 2.0);
    CHECK(sq.hess(0, 1) == 0.0);
    CHECK(sq.hess(1, 1) == 0.0);

    // (u1 + 1) / 2: hand Taylor expansion
    const Jet2 half = (u1 + 1.0) / Jet2::constant(2.0, 2);
    CHECK(half.value == doctest::Approx(0.5));
    CHECK(half.grad[0] == doctest::Approx(0.5));
    CHECK(half.grad[1] == 0.0);
    CHECK(half.hess(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("division by zero-valued jet is rejected") {
    const Jet2 a = Jet2::constant(1.0, 1);
    const Jet2 z = Jet2::variable(0.0, 0, 1);
    CHECK_THROWS_AS(a / z, DomainError);
}

TEST_CASE("mismatched driver dimensions are rejected") {
    CHECK_THROWS_AS(Jet2::constant(1.0, 1) + Jet2::constant(1.0, 2), ShapeError);
}

TEST_CASE("elementary functions to second order") {
    const Jet2 zero = Jet2::constant(0.0, 1);
    const Jet2 e0 = jet_apply(FuncTag::Exp, zero);
    CHECK(e0.value == 1.0);
    CHECK(e0.derivatives_zero());

    // log(1 + u): Taylor series 0 + u - u^2/2, second derivative -1
    const Jet2 u = Jet2::variable(0.0, 0, 1);
    const Jet2 lg = jet_apply(FuncTag::Log, u + 1.0);
    CHECK(lg.value == doctest::Approx(0.0));
    CHECK(lg.grad[0] == doctest::Approx(1.0));
    CHECK(lg.hess(0, 0) == doctest::Approx(-1.0));

    // sqrt(4 + u): f'(4) = 1/4, f''(4) = -1/32 (checked against central
    // differences below as well)
    const Jet2 sq = jet_apply(FuncTag::Sqrt, u + 4.0);
    CHECK(sq.value == doctest::Approx(2.0));
    CHECK(sq.grad[0] == doctest::Approx(0.25));
    CHECK(sq.hess(0, 0) == doctest::Approx(-1.0 / 32.0));

    const double h = 1e-4;
    const double fd2 = (std::sqrt(4.0 + h) - 2.0 * 2.0 + std::sqrt(4.0 - h)) / (h * h);
    CHECK(sq.hess(0, 0) == doctest::Approx(fd2).epsilon(1e-5));

    CHECK_THROWS_AS(jet_apply(FuncTag::Log, zero), DomainError);
    CHECK_THROWS_AS(jet_apply(FuncTag::Sqrt, Jet2::constant(-1.0, 1)), DomainError);
}

TEST_CASE("jet_pow handles integer and fractional exponents") {
    const Jet2 u = Jet2::variable(0.0, 0, 1);
    const Jet2 p2 = jet_pow(u, 2.0);  // valid at base 0
    CHECK(p2.value == 0.0);
    CHECK(p2.hess(0, 0) == 2.0);

    const Jet2 v = Jet2::variable(2.0, 0, 1);
    const Jet2 inv = jet_pow(v, -1.0);
    CHECK(inv.value == doctest::Approx(0.5));
    CHECK(inv.grad[0] == doctest::Approx(-0.25));

    const Jet2 frac = jet_pow(v, 0.5);
    CHECK(frac.value == doctest::Approx(std::sqrt(2.0)));
    CHECK_THROWS_AS(jet_pow(Jet2::constant(-2.0, 1), 0.5), DomainError);
}

TEST_CASE("jet arithmetic matches central differences on a composed expression") {
    auto f = [](const Vec& x) {
        return std::sin(x[0] * x[1]) + std::exp(x[0]) / (1.0 + x[1] * x[1]);
    };
    const Vec x0 = (Vec(2) << 0.7, -0.4).finished();
    const auto fd = jetsde::testing::fd_jet(f, x0);

    const Jet2 a = Jet2::variable(x0[0], 0, 2);
    const Jet2 b = Jet2::variable(x0[1], 1, 2);
    const Jet2 j = jet_apply(FuncTag::Sin, a * b) + jet_apply(FuncTag::Exp, a) / (b * b + 1.0);

    CHECK(j.value == doctest::Approx(fd.value));
    for (int i = 0; i < 2; ++i) CHECK(j.grad[i] == doctest::Approx(fd.grad[i]).epsilon(1e-5));
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k)
            CHECK(j.hess(i, k) == doctest::Approx(fd.hess(i, k)).epsilon(1e-5));
}

TEST_CASE("extract_ab") {
    SUBCASE("constant curve gives zero coefficients") {
        JetPoint jet;
        jet.coords = {Jet2::constant(1.0, 2), Jet2::constant(-2.0, 2)};
        const auto ab = extract_ab(jet);
        CHECK(ab.a.norm() == 0.0);
        CHECK(ab.b.norm() == 0.0);
    }

    SUBCASE("rotor field coefficients") {
        const auto ab = extract_ab(rotor_jet(1.5, -0.5));
        CHECK(ab.a[0] == doctest::Approx(4.5));
        CHECK(ab.a[1] == doctest::Approx(-1.5));
        CHECK(ab.b(0, 0) == doctest::Approx(0.5));
        CHECK(ab.b(1, 0) == doctest::Approx(1.5));
    }

    SUBCASE("quadratic map x(1,0)+2y(0,1)+(x^2+y^2)(1,0)") {
        // drift (2,0), diffusion [[1,0],[0,2]]
        JetPoint jet;
        Jet2 c1(2), c2(2);
        c1.grad << 1.0, 0.0;
        c1.hess(0, 0) = 2.0;
        c1.hess(1, 1) = 2.0;
        c2.grad << 0.0, 2.0;
        jet.coords = {c1, c2};
        const auto ab = extract_ab(jet);
        CHECK(ab.a[0] == doctest::Approx(2.0));
        CHECK(ab.a[1] == doctest::Approx(0.0));
        CHECK(ab.b(0, 0) == 1.0);
        CHECK(ab.b(0, 1) == 0.0);
        CHECK(ab.b(1, 0) == 0.0);
        CHECK(ab.b(1, 1) == 2.0);
    }
}

TEST_CASE("canonical_jet") {
    SUBCASE("zero drift, identity diffusion gives a pure linear jet") {
        const JetPoint jet = canonical_jet(Vec::Zero(2), Mat::Identity(2, 2));
        for (const auto& c : jet.coords)
            for (int i = 0; i < 2; ++i)
                for (int k = i; k < 2; ++k) CHECK(c.hess(i, k) == 0.0);
        CHECK(jet.coords[0].grad[0] == 1.0);
        CHECK(jet.coords[1].grad[1] == 1.0);
    }

    SUBCASE("drift spread over the Hessian diagonal") {
        Vec a(2);
        a << 2.0, 0.0;
        Mat b(2, 2);
        b << 1.0, 0.0, 0.0, 2.0;
        const JetPoint jet = canonical_jet(a, b);
        CHECK(jet.coords[0].hess(0, 0) == doctest::Approx(2.0));
        CHECK(jet.coords[0].hess(1, 1) == doctest::Approx(2.0));
        CHECK(jet.coords[0].hess(0, 1) == 0.0);
        CHECK(jet.coords[1].hess(0, 0) == 0.0);
    }

    SUBCASE("round trip over random coefficient pairs") {
        TestRng rng(41);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t n = 1 + rng.index(3);
            const std::size_t d = 1 + rng.index(3);
            Vec a(n);
            Mat b(n, d);
            for (std::size_t i = 0; i < n; ++i) {
                a[i] = rng.uniform(-5.0, 5.0);
                for (std::size_t k = 0; k < d; ++k) b(i, k) = rng.uniform(-5.0, 5.0);
            }
            const auto ab = extract_ab(canonical_jet(a, b));
            CHECK((ab.a - a).lpNorm<Eigen::Infinity>() == 0.0);
            CHECK((ab.b - b).lpNorm<Eigen::Infinity>() == 0.0);
        }
    }
}

TEST_CASE("pushforward through the identity returns the input") {
    const JetPoint jet = rotor_jet(1.0, 0.0);
    std::vector<Jet2> id;
    id.push_back(Jet2::variable(1.0, 0, 2));
    id.push_back(Jet2::variable(0.0, 1, 2));
    const JetPoint out = pushforward(jet, id);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(out.coords[i].value == jet.coords[i].value);
        CHECK((out.coords[i].grad - jet.coords[i].grad).norm() == 0.0);
        CHECK(out.coords[i].hess(0, 0) == jet.coords[i].hess(0, 0));
    }
}

TEST_CASE("pushforward realizes the transformation rule for coefficients") {
    SUBCASE("rotor field in Cartesian coordinates") {
        const auto ab = extract_ab(rotor_jet(1.0, 0.0));
        CHECK(ab.a[0] == doctest::Approx(3.0));
        CHECK(ab.a[1] == doctest::Approx(0.0));
        CHECK(ab.b(0, 0) == doctest::Approx(0.0));
        CHECK(ab.b(1, 0) == doctest::Approx(1.0));
    }

    SUBCASE("rotor field through the angle/log-radius map at (1,0)") {
        const Vec x = (Vec(2) << 1.0, 0.0).finished();
        const JetPoint out = pushforward(rotor_jet(x[0], x[1]), polar_log_jets(x));
        const auto ab = extract_ab(out);
        CHECK(ab.a[0] == doctest::Approx(0.0));
        CHECK(ab.a[1] == doctest::Approx(3.5));
        CHECK(ab.b(0, 0) == doctest::Approx(1.0));
        CHECK(ab.b(1, 0) == doctest::Approx(0.0));
    }

    SUBCASE("agreement with the finite-difference oracle at random probes") {
        TestRng rng(7);
        for (int trial = 0; trial < 20; ++trial) {
            const double r = rng.uniform(0.7, 1.5);
            const double phi = rng.uniform(-1.0, 1.0);
            const Vec x = (Vec(2) << r * std::cos(phi), r * std::sin(phi)).finished();

            const JetPoint out = pushforward(rotor_jet(x[0], x[1]), polar_log_jets(x));
            const auto ab = extract_ab(out);

            Vec d1, d2;
            jetsde::testing::fd_curve(
                [&](double t) { return polar_log(rotor_curve(x[0], x[1], t)); }, 1e-4, d1, d2);
            CHECK(std::abs(ab.b(0, 0) - d1[0]) < 1e-6);
            CHECK(std::abs(ab.b(1, 0) - d1[1]) < 1e-6);
            CHECK(std::abs(ab.a[0] - 0.5 * d2[0]) < 1e-6);
            CHECK(std::abs(ab.a[1] - 0.5 * d2[1]) < 1e-6);

            // the transformed coefficients are the same at every probe
            CHECK(ab.a[0] == doctest::Approx(0.0));
            CHECK(ab.a[1] == doctest::Approx(3.5));
            CHECK(ab.b(0, 0) == doctest::Approx(1.0));
            CHECK(ab.b(1, 0) == doctest::Approx(0.0));
        }
    }
}

TEST_CASE("pushforward by a linear map commutes with extract_ab") {
    TestRng rng(11);
    Mat J(2, 2);
    J << 2.0, -1.0, 0.5, 3.0;
    for (int trial = 0; trial < 10; ++trial) {
        const JetPoint jet = rotor_jet(rng.uniform(-2, 2), rng.uniform(-2, 2));
        std::vector<Jet2> lin;
        for (int i = 0; i < 2; ++i) {
            Jet2 f(2);
            const auto vals = jet.values();
            f.value = J(i, 0) * vals[0] + J(i, 1) * vals[1];
            f.grad = J.row(i).transpose();
            lin.push_back(f);
        }
        const auto before = extract_ab(jet);
        const auto after = extract_ab(pushforward(jet, lin));
        CHECK((after.a - J * before.a).lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK((after.b - J * before.b).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("pushforward chains like composition") {
    // Applying f then g equals applying the jet of g after f, for random
    // quadratic maps. Map jets are themselves JetPoints over the state
    // variables, so composition reuses the same operation.
    TestRng rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 2;
        auto random_quadratic = [&](const Vec& at) {
            std::vector<Jet2> jets;
            for (std::size_t i = 0; i < n; ++i) {
                Jet2 f(n);
                f.grad = Vec::Zero(n);
                Vec lin(n);
                Mat quad(n, n);
                for (std::size_t k = 0; k < n; ++k) {
                    lin[k] = rng.uniform(-1, 1);
                    for (std::size_t l = 0; l < n; ++l) quad(k, l) = rng.uniform(-0.5, 0.5);
                }
                const Mat sym = 0.5 * (quad + quad.transpose());
                f.value = rng.uniform(-1, 1) + lin.dot(at) + at.dot(sym * at);
                f.grad = lin + 2.0 * sym * at;
                for (std::size_t k = 0; k < n; ++k)
                    for (std::size_t l = k; l < n; ++l) f.hess(k, l) = 2.0 * sym(k, l);
                jets.push_back(f);
            }
            return jets;
        };

        const Vec x = (Vec(2) << rng.uniform(-1, 1), rng.uniform(-1, 1)).finished();
        const JetPoint gamma = rotor_jet(x[0], x[1]);
        const auto f_jets = random_quadratic(x);

        JetPoint f_point;
        f_point.coords = f_jets;
        const auto g_jets = random_quadratic(f_point.values());

        const JetPoint via_two_steps = pushforward(pushforward(gamma, f_jets), g_jets);
        JetPoint composed_map = pushforward(f_point, g_jets);
        const JetPoint via_composed = pushforward(gamma, composed_map.coords);

        for (std::size_t i = 0; i < n; ++i) {
            CHECK(via_two_steps.coords[i].value ==
                  doctest::Approx(via_composed.coords[i].value).epsilon(1e-12));
            CHECK((via_two_steps.coords[i].grad - via_composed.coords[i].grad)
                      .lpNorm<Eigen::Infinity>() < 1e-12);
            CHECK(std::abs(via_two_steps.coords[i].hess(0, 0) - via_composed.coords[i].hess(0, 0)) <
                  1e-12);
            CHECK(std::abs(via_two_steps.coords[i].hess(0, 1) - via_composed.coords[i].hess(0, 1)) <
                  1e-12);
        }
    }
}

TEST_CASE("canonical_curve evaluates the quadratic representative") {
    Vec a(1), x(1), u(2);
    a << 4.0;
    x << 1.0;
    Mat b(1, 2);
    b << 2.0, -1.0;
    u << 0.3, 0.4;
    // x + b.u + a |u|^2 / d = 1 + (0.6 - 0.4) + 4 * 0.25 / 2
    CHECK(canonical_curve(x, a, b, u)[0] == doctest::Approx(1.0 + 0.2 + 0.5));
}
