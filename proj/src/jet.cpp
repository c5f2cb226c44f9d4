#include "jetsde/jet.hpp"

#include <cmath>
#include <string>

namespace jetsde {

Jet2 operator+(const Jet2& a, const Jet2& b) {
    detail::require_same_dim(a, b);
    Jet2 r(a.dim());
    r.value = a.value + b.value;
    r.grad = a.grad + b.grad;
    const std::size_t d = a.dim();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) r.hess(i, j) = a.hess(i, j) + b.hess(i, j);
    return r;
}

Jet2 operator-(const Jet2& a, const Jet2& b) {
    detail::require_same_dim(a, b);
    Jet2 r(a.dim());
    r.value = a.value - b.value;
    r.grad = a.grad - b.grad;
    const std::size_t d = a.dim();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) r.hess(i, j) = a.hess(i, j) - b.hess(i, j);
    return r;
}

Jet2 operator*(const Jet2& a, const Jet2& b) {
    detail::require_same_dim(a, b);
    Jet2 r(a.dim());
    r.value = a.value * b.value;
    r.grad = a.value * b.grad + b.value * a.grad;
    const std::size_t d = a.dim();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j)
            r.hess(i, j) = a.value * b.hess(i, j) + b.value * a.hess(i, j) +
                           a.grad[i] * b.grad[j] + a.grad[j] * b.grad[i];
    return r;
}

namespace {

// f, f', f'' evaluated at a.value -> chain rule to second order.
Jet2 chain(const Jet2& a, double f, double fp, double fpp) {
    Jet2 r(a.dim());
    r.value = f;
    r.grad = fp * a.grad;
    const std::size_t d = a.dim();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j)
            r.hess(i, j) = fp * a.hess(i, j) + fpp * a.grad[i] * a.grad[j];
    return r;
}

Jet2 reciprocal(const Jet2& b) {
    if (b.value == 0.0) throw DomainError("division by a jet with zero value");
    const double v = b.value;
    return chain(b, 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
}

}  // namespace

Jet2 operator/(const Jet2& a, const Jet2& b) { return a * reciprocal(b); }

Jet2 operator-(const Jet2& a) {
    Jet2 r(a.dim());
    r.value = -a.value;
    r.grad = -a.grad;
    const std::size_t d = a.dim();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) r.hess(i, j) = -a.hess(i, j);
    return r;
}

Jet2 operator+(const Jet2& a, double c) {
    Jet2 r = a;
    r.value += c;
    return r;
}
Jet2 operator+(double c, const Jet2& a) { return a + c; }
Jet2 operator-(const Jet2& a, double c) { return a + (-c); }
Jet2 operator-(double c, const Jet2& a) { return (-a) + c; }

Jet2 operator*(const Jet2& a, double c) { return chain(a, a.value * c, c, 0.0); }
Jet2 operator*(double c, const Jet2& a) { return a * c; }
Jet2 operator/(const Jet2& a, double c) {
    if (c == 0.0) throw DomainError("division by zero");
    return a * (1.0 / c);
}
Jet2 operator/(double c, const Jet2& a) { return reciprocal(a) * c; }

Jet2 jet_apply(FuncTag f, const Jet2& a) {
    const double v = a.value;
    switch (f) {
        case FuncTag::Sin:
            return chain(a, std::sin(v), std::cos(v), -std::sin(v));
        case FuncTag::Cos:
            return chain(a, std::cos(v), -std::sin(v), -std::cos(v));
        case FuncTag::Tan: {
            const double c = std::cos(v);
            if (c == 0.0) throw DomainError("tan at a pole, value " + std::to_string(v));
            const double t = std::tan(v);
            const double sec2 = 1.0 / (c * c);
            return chain(a, t, sec2, 2.0 * t * sec2);
        }
        case FuncTag::Exp: {
            const double e = std::exp(v);
            return chain(a, e, e, e);
        }
        case FuncTag::Log:
            if (v <= 0.0) throw DomainError("log of non-positive value " + std::to_string(v));
            return chain(a, std::log(v), 1.0 / v, -1.0 / (v * v));
        case FuncTag::Sqrt: {
            if (v <= 0.0) throw DomainError("sqrt of non-positive value " + std::to_string(v));
            const double s = std::sqrt(v);
            return chain(a, s, 0.5 / s, -0.25 / (v * s));
        }
        case FuncTag::Atan: {
            const double w = 1.0 + v * v;
            return chain(a, std::atan(v), 1.0 / w, -2.0 * v / (w * w));
        }
        case FuncTag::Tanh: {
            const double t = std::tanh(v);
            const double sech2 = 1.0 - t * t;
            return chain(a, t, sech2, -2.0 * t * sech2);
        }
    }
    throw Error("unhandled function tag");
}

namespace {

Jet2 int_pow(const Jet2& a, long long e) {
    if (e < 0) return reciprocal(int_pow(a, -e));
    Jet2 acc = Jet2::constant(1.0, a.dim());
    Jet2 base = a;
    while (e > 0) {
        if (e & 1) acc = acc * base;
        base = base * base;
        e >>= 1;
    }
    return acc;
}

}  // namespace

Jet2 jet_pow(const Jet2& a, double c) {
    if (c == std::floor(c) && std::abs(c) <= 1024.0) return int_pow(a, static_cast<long long>(c));
    if (a.value <= 0.0)
        throw DomainError("fractional power of non-positive base " + std::to_string(a.value));
    const double f = std::pow(a.value, c);
    const double fp = c * std::pow(a.value, c - 1.0);
    const double fpp = c * (c - 1.0) * std::pow(a.value, c - 2.0);
    return chain(a, f, fp, fpp);
}

DriftDiffusion extract_ab(const JetPoint& jet) {
    const std::size_t n = jet.states();
    const std::size_t d = jet.drivers();
    DriftDiffusion r;
    r.a = Vec::Zero(static_cast<Eigen::Index>(n));
    r.b = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        r.a[static_cast<Eigen::Index>(i)] = 0.5 * jet.coords[i].hess_trace();
        r.b.row(static_cast<Eigen::Index>(i)) = jet.coords[i].grad.transpose();
    }
    return r;
}

JetPoint canonical_jet(const Vec& x, const Vec& a, const Mat& b) {
    if (a.size() != b.rows()) throw ShapeError("drift length does not match diffusion rows");
    if (x.size() != a.size()) throw ShapeError("base point length does not match drift length");
    const std::size_t n = static_cast<std::size_t>(a.size());
    const std::size_t d = static_cast<std::size_t>(b.cols());
    JetPoint jet;
    jet.coords.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Jet2 j(d);
        j.value = x[static_cast<Eigen::Index>(i)];
        j.grad = b.row(static_cast<Eigen::Index>(i)).transpose();
        const double diag = 2.0 * a[static_cast<Eigen::Index>(i)] / static_cast<double>(d);
        for (std::size_t k = 0; k < d; ++k) j.hess(k, k) = diag;
        jet.coords.push_back(std::move(j));
    }
    return jet;
}

JetPoint canonical_jet(const Vec& a, const Mat& b) { return canonical_jet(Vec::Zero(a.size()), a, b); }

Vec canonical_curve(const Vec& x, const Vec& a, const Mat& b, const Vec& u) {
    if (b.cols() != u.size()) throw ShapeError("driver offset length does not match diffusion columns");
    return x + b * u + a * (u.squaredNorm() / static_cast<double>(u.size()));
}

JetPoint pushforward(const JetPoint& gamma, const std::vector<Jet2>& map_jets) {
    const std::size_t n = gamma.states();
    const std::size_t d = gamma.drivers();
    JetPoint out;
    out.coords.reserve(map_jets.size());
    for (const Jet2& f : map_jets) {
        if (f.dim() != n) throw ShapeError("map jet dimension does not match state count");
        Jet2 r(d);
        r.value = f.value;
        for (std::size_t k = 0; k < n; ++k) r.grad += f.grad[k] * gamma.coords[k].grad;
        for (std::size_t al = 0; al < d; ++al) {
            for (std::size_t be = al; be < d; ++be) {
                double h = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    for (std::size_t l = 0; l < n; ++l)
                        h += f.hess(k, l) * gamma.coords[k].grad[al] * gamma.coords[l].grad[be];
                    h += f.grad[k] * gamma.coords[k].hess(al, be);
                }
                r.hess(al, be) = h;
            }
        }
        out.coords.push_back(std::move(r));
    }
    return out;
}

Jet2 pushforward_scalar(const JetPoint& gamma, const Jet2& map_jet) {
    return pushforward(gamma, {map_jet}).coords.front();
}

}  // namespace jetsde
