#pragma once

#include <cstddef>
#include <vector>

#include "jetsde/errors.hpp"
#include "jetsde/types.hpp"

namespace jetsde {

/// Scalar 2-jet in `dim` driving variables: the value, gradient and
/// symmetric Hessian of a smooth map R^d -> R at the origin. The Hessian
/// is stored as a packed upper triangle, so the (i,j) and (j,i) entries
/// share one slot and symmetry holds by construction.
class Jet2 {
public:
    explicit Jet2(std::size_t dim)
        : value(0.0), grad(Vec::Zero(static_cast<Eigen::Index>(dim))), hess_(packed_size(dim), 0.0) {}

    static Jet2 constant(double v, std::size_t dim) {
        Jet2 j(dim);
        j.value = v;
        return j;
    }

    /// Seed jet for driving variable `index`: value v, unit gradient slot.
    static Jet2 variable(double v, std::size_t index, std::size_t dim) {
        Jet2 j(dim);
        j.value = v;
        j.grad[static_cast<Eigen::Index>(index)] = 1.0;
        return j;
    }

    std::size_t dim() const { return static_cast<std::size_t>(grad.size()); }

    double hess(std::size_t i, std::size_t j) const { return hess_[packed_index(i, j)]; }
    double& hess(std::size_t i, std::size_t j) { return hess_[packed_index(i, j)]; }

    /// Full symmetric Hessian, expanded from the packed triangle.
    Mat hess_matrix() const {
        const std::size_t d = dim();
        Mat h(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) h(i, j) = hess(i, j);
        return h;
    }

    double hess_trace() const {
        double s = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) s += hess(i, i);
        return s;
    }

    bool derivatives_zero(double tol = 0.0) const {
        for (Eigen::Index i = 0; i < grad.size(); ++i)
            if (std::abs(grad[i]) > tol) return false;
        for (double h : hess_)
            if (std::abs(h) > tol) return false;
        return true;
    }

    double value;
    Vec grad;

    static std::size_t packed_size(std::size_t dim) { return dim * (dim + 1) / 2; }

private:
    std::size_t packed_index(std::size_t i, std::size_t j) const {
        if (i > j) std::swap(i, j);
        const std::size_t d = dim();
        return i * d - i * (i - 1) / 2 + (j - i);
    }

    std::vector<double> hess_;  // packed upper triangle, row by row
};

namespace detail {
inline void require_same_dim(const Jet2& a, const Jet2& b) {
    if (a.dim() != b.dim()) throw ShapeError("jet operands have different driver dimension");
}
}  // namespace detail

Jet2 operator+(const Jet2& a, const Jet2& b);
Jet2 operator-(const Jet2& a, const Jet2& b);
Jet2 operator*(const Jet2& a, const Jet2& b);
Jet2 operator/(const Jet2& a, const Jet2& b);
Jet2 operator-(const Jet2& a);

Jet2 operator+(const Jet2& a, double c);
Jet2 operator+(double c, const Jet2& a);
Jet2 operator-(const Jet2& a, double c);
Jet2 operator-(double c, const Jet2& a);
Jet2 operator*(const Jet2& a, double c);
Jet2 operator*(double c, const Jet2& a);
Jet2 operator/(const Jet2& a, double c);
Jet2 operator/(double c, const Jet2& a);

enum class FuncTag { Sin, Cos, Tan, Exp, Log, Sqrt, Atan, Tanh };

/// Second-order chain rule: f applied to a jet. Throws DomainError when the
/// jet value sits outside the domain of f.
Jet2 jet_apply(FuncTag f, const Jet2& a);

/// a^c for a real exponent. Integer exponents are evaluated by repeated
/// multiplication (valid for any base); fractional exponents require a
/// positive base.
Jet2 jet_pow(const Jet2& a, double c);

/// 2-jet of a map R^d -> R^n at u = 0: one scalar jet per state coordinate.
struct JetPoint {
    std::vector<Jet2> coords;

    std::size_t states() const { return coords.size(); }
    std::size_t drivers() const { return coords.empty() ? 0 : coords.front().dim(); }

    Vec values() const {
        Vec v(static_cast<Eigen::Index>(coords.size()));
        for (std::size_t i = 0; i < coords.size(); ++i) v[static_cast<Eigen::Index>(i)] = coords[i].value;
        return v;
    }
};

/// Drift/diffusion pair read off a jet: b is the gradient matrix (n x d),
/// a_i is half the trace of coordinate i's Hessian.
struct DriftDiffusion {
    Vec a;  // n
    Mat b;  // n x d
};

DriftDiffusion extract_ab(const JetPoint& jet);

/// The canonical quadratic representative of the 2-jet with coefficients
/// (a, b): coordinate i has gradient b.row(i) and Hessian (2 a_i / d) * I,
/// anchored at base point x. extract_ab inverts this exactly.
JetPoint canonical_jet(const Vec& x, const Vec& a, const Mat& b);
JetPoint canonical_jet(const Vec& a, const Mat& b);  // base point zero

/// Evaluate the canonical representative at a real driver offset u.
Vec canonical_curve(const Vec& x, const Vec& a, const Mat& b, const Vec& u);

/// Composition of 2-jets: given the jet of a curve gamma (d drivers,
/// n states) and the 2-jet of a map f at gamma(0) (one Jet2 over the n
/// state variables per output), returns the 2-jet of f
/// composed with gamma. Extracting (a, b) from the result is Ito's lemma.
JetPoint pushforward(const JetPoint& gamma, const std::vector<Jet2>& map_jets);

/// Single-output variant.
Jet2 pushforward_scalar(const JetPoint& gamma, const Jet2& map_jet);

}  // namespace jetsde
