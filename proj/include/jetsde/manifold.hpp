#pragma once

#include <cstddef>
#include <vector>

#include "jetsde/expr.hpp"
#include "jetsde/jet.hpp"
#include "jetsde/simulate.hpp"
#include "jetsde/types.hpp"

namespace jetsde {

/// Hypersurface F(y) = 0 in ambient coordinates y1..y_{m+1}. The defining
/// expression is jet-evaluated for gradients and Hessians, so charts get
/// exact implicit derivatives.
class ImplicitSurface {
public:
    ImplicitSurface(ExprAst f, std::size_t ambient_dim);

    double value(const Vec& y) const;
    Vec gradient(const Vec& y) const;
    Jet2 jet(const Vec& y) const;

    std::size_t ambient_dim() const { return ambient_dim_; }
    std::size_t chart_dim() const { return ambient_dim_ - 1; }
    const ExprAst& expr() const { return f_; }

private:
    ExprAst f_;
    std::size_t ambient_dim_;
};

/// Metric value and its first derivatives at one chart point:
/// dg[k](i,j) is the derivative of g_ij along chart coordinate k.
struct MetricEval {
    Mat g;
    std::vector<Mat> dg;
};

/// Projection chart of an implicit surface: the `axis` coordinate is
/// recovered from the remaining (free) coordinates by a 1-D root find on F
/// seeded at the previous value; `sign` labels the sheet.
struct Chart {
    const ImplicitSurface* surface = nullptr;
    std::size_t axis = 0;
    int sign = +1;
    std::vector<std::size_t> free_axes;

    Vec chart_coords(const Vec& y) const;
    Vec ambient_point(const Vec& chart_x, double axis_value) const;

    /// Safeguarded Newton with bisection fallback; |F| <= 1e-12 at the
    /// returned value. Throws DomainError when no root is found near the
    /// seed or the root lands on the wrong sheet.
    double solve(const Vec& chart_x, double axis_seed) const;

    /// 2-jet of the chart -> ambient map at chart_x (one jet per ambient
    /// coordinate, over the chart variables), by implicit differentiation.
    std::vector<Jet2> map_jets(const Vec& chart_x, double axis_value) const;
};

/// First fundamental form (and derivatives) from the chart-map jets.
MetricEval induced_metric(const std::vector<Jet2>& map_jets);

/// One chart per (axis, sign) combination.
std::vector<Chart> build_atlas(const ImplicitSurface& surface);

/// Axis with the largest normal component, lowest index on ties; sheet by
/// the sign of the coordinate. Requires |F(y)| <= 1e-8.
const Chart& select_chart(const std::vector<Chart>& atlas, const Vec& y);

/// Brownian-motion coefficients in a chart: b is the Cholesky factor of
/// the inverse metric, the drift spreads the divergence term equally over
/// the Hessian diagonal. Throws MetricError when the metric (or its
/// inverse) is not positive definite.
DriftDiffusion brownian_coefficients(const MetricEval& metric);
JetPoint brownian_jet(const MetricEval& metric, const Vec& chart_x);

/// Saturating radius map: identity below eps/2, smooth and increasing,
/// bounded by eps. Composing the curve argument with it never changes the
/// 2-jet at the origin.
double clamp_radius(double r, double eps);
Vec clamp_arg(const Vec& u, double eps);

/// Explicit metric given as expressions over the chart coordinates.
class ExplicitMetric {
public:
    explicit ExplicitMetric(std::vector<std::vector<ExprAst>> entries);
    std::size_t dim() const { return entries_.size(); }
    MetricEval eval(const Vec& x) const;

private:
    std::vector<std::vector<ExprAst>> entries_;
};

/// Generator of the chart-constructed Brownian jet applied to an ambient
/// test function, evaluated at an on-surface point.
double surface_generator(const Chart& chart, const Vec& y, const ExprAst& f_ambient);

struct ManifoldWalkOptions {
    double clamp_eps = 0.1;       // chart-safety radius for the argument clamp
    double surface_tol = 1e-8;    // |F| bound every emitted point must satisfy
    SimOptions sim;
};

/// Brownian motion on an implicit surface: per step select a chart, build
/// the Brownian jet there, clamp, step, and re-solve onto the surface.
/// Output states are ambient coordinates.
TrajectorySet simulate_surface_bm(const ImplicitSurface& surface, const Vec& y0,
                                  const BrownianGrid& grid, std::size_t steps,
                                  const ManifoldWalkOptions& opts = {});

/// Brownian motion in a fixed global chart with an explicit metric.
TrajectorySet simulate_chart_bm(const ExplicitMetric& metric, const Vec& x0,
                                const BrownianGrid& grid, std::size_t steps,
                                const ManifoldWalkOptions& opts = {});

}  // namespace jetsde
