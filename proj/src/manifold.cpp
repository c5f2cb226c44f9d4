#include "jetsde/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>

namespace jetsde {

ImplicitSurface::ImplicitSurface(ExprAst f, std::size_t ambient_dim)
    : f_(std::move(f)), ambient_dim_(ambient_dim) {
    if (ambient_dim < 2) throw ConfigError("implicit surface needs ambient dimension >= 2");
    if (f_.symbols().states.size() != ambient_dim)
        throw ConfigError("surface expression symbol table does not match the ambient dimension");
}

double ImplicitSurface::value(const Vec& y) const { return eval_real(f_, y, 0.0); }

Vec ImplicitSurface::gradient(const Vec& y) const { return state_jet(f_, y).grad; }

Jet2 ImplicitSurface::jet(const Vec& y) const { return state_jet(f_, y); }

Vec Chart::chart_coords(const Vec& y) const {
    Vec x(static_cast<Eigen::Index>(free_axes.size()));
    for (std::size_t i = 0; i < free_axes.size(); ++i) x[i] = y[free_axes[i]];
    return x;
}

Vec Chart::ambient_point(const Vec& chart_x, double axis_value) const {
    Vec y(static_cast<Eigen::Index>(surface->ambient_dim()));
    for (std::size_t i = 0; i < free_axes.size(); ++i) y[free_axes[i]] = chart_x[i];
    y[axis] = axis_value;
    return y;
}

namespace {

struct LineFn {
    const Chart& chart;
    Vec y;  // scratch ambient point

    double f(double t) {
        y[chart.axis] = t;
        return chart.surface->value(y);
    }
    double df(double t) {
        y[chart.axis] = t;
        return chart.surface->gradient(y)[chart.axis];
    }
};

constexpr double kRootTol = 1e-12;

}  // namespace

double Chart::solve(const Vec& chart_x, double axis_seed) const {
    LineFn line{*this, ambient_point(chart_x, axis_seed)};

    // plain Newton from the seed
    double t = axis_seed;
    for (int it = 0; it < 12; ++it) {
        const double v = line.f(t);
        if (std::abs(v) <= kRootTol) break;
        const double d = line.df(t);
        if (d == 0.0 || !std::isfinite(d)) break;
        const double step = v / d;
        t -= step;
        if (!std::isfinite(t) || std::abs(t - axis_seed) > 1.0 + std::abs(axis_seed)) break;
    }

    if (std::abs(line.f(t)) > kRootTol) {
        // bracket around the seed, then bisection with Newton inside
        double h = 1e-3;
        double lo = axis_seed, hi = axis_seed;
        double flo = line.f(lo), fhi = flo;
        bool bracketed = false;
        for (int it = 0; it < 60 && !bracketed; ++it) {
            lo = axis_seed - h;
            hi = axis_seed + h;
            flo = line.f(lo);
            fhi = line.f(hi);
            const double fseed = line.f(axis_seed);
            if (flo * fseed < 0.0) {
                hi = axis_seed;
                fhi = fseed;
                bracketed = true;
            } else if (fhi * fseed < 0.0) {
                lo = axis_seed;
                flo = fseed;
                bracketed = true;
            } else if (flo * fhi < 0.0) {
                bracketed = true;
            }
            h *= 2.0;
            if (h > 4.0) break;
        }
        if (!bracketed) throw DomainError("no root of F along the chart axis near the seed");
        t = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
            const double v = line.f(t);
            if (std::abs(v) <= kRootTol) break;
            if (flo * v < 0.0)
                hi = t;
            else {
                lo = t;
                flo = v;
            }
            const double d = line.df(t);
            double next = d != 0.0 ? t - v / d : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            t = next;
            if (hi - lo < 1e-16 * (1.0 + std::abs(t))) break;
        }
        if (std::abs(line.f(t)) > kRootTol)
            throw DomainError("root refinement on F did not reach tolerance");
    }

    if (sign > 0 ? t < -1e-9 : t > 1e-9)
        throw DomainError("root lies on the other sheet of the chart");
    return t;
}

std::vector<Jet2> Chart::map_jets(const Vec& chart_x, double axis_value) const {
    const std::size_t m = free_axes.size();
    const Vec y = ambient_point(chart_x, axis_value);
    const Jet2 F = surface->jet(y);
    const double fs = F.grad[axis];
    if (fs == 0.0) throw DomainError("chart axis is tangent to the surface at this point");

    // implicit first derivatives of the solved coordinate
    Vec dys(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) dys[i] = -F.grad[free_axes[i]] / fs;

    std::vector<Jet2> jets;
    jets.reserve(surface->ambient_dim());
    for (std::size_t a = 0; a < surface->ambient_dim(); ++a) {
        if (a != axis) {
            const std::size_t slot =
                static_cast<std::size_t>(std::find(free_axes.begin(), free_axes.end(), a) -
                                         free_axes.begin());
            jets.push_back(Jet2::variable(y[a], slot, m));
            continue;
        }
        Jet2 ys(m);
        ys.value = axis_value;
        ys.grad = dys;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i; j < m; ++j) {
                const std::size_t fi = free_axes[i], fj = free_axes[j];
                const double second = F.hess(fi, fj) + F.hess(fi, axis) * dys[j] +
                                      F.hess(fj, axis) * dys[i] + F.hess(axis, axis) * dys[i] * dys[j];
                ys.hess(i, j) = -second / fs;
            }
        }
        jets.push_back(std::move(ys));
    }
    return jets;
}

MetricEval induced_metric(const std::vector<Jet2>& map_jets) {
    const std::size_t m = map_jets.front().dim();
    MetricEval out;
    out.g = Mat::Zero(m, m);
    out.dg.assign(m, Mat::Zero(m, m));
    for (const Jet2& ya : map_jets) {
        out.g += ya.grad * ya.grad.transpose();
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    out.dg[k](i, j) += ya.hess(k, i) * ya.grad[j] + ya.grad[i] * ya.hess(k, j);
    }
    return out;
}

std::vector<Chart> build_atlas(const ImplicitSurface& surface) {
    std::vector<Chart> atlas;
    for (std::size_t axis = 0; axis < surface.ambient_dim(); ++axis) {
        for (int sign : {+1, -1}) {
            Chart c;
            c.surface = &surface;
            c.axis = axis;
            c.sign = sign;
            for (std::size_t a = 0; a < surface.ambient_dim(); ++a)
                if (a != axis) c.free_axes.push_back(a);
            atlas.push_back(std::move(c));
        }
    }
    return atlas;
}

const Chart& select_chart(const std::vector<Chart>& atlas, const Vec& y) {
    if (atlas.empty()) throw AtlasError("empty atlas");
    const ImplicitSurface& surface = *atlas.front().surface;
    if (std::abs(surface.value(y)) > 1e-8)
        throw AtlasError("point is not on the surface (|F| > 1e-8)");
    const Vec grad = surface.gradient(y);
    if (grad.lpNorm<Eigen::Infinity>() == 0.0)
        throw AtlasError("surface normal vanishes at the point");
    std::size_t best_axis = 0;
    double best = -1.0;
    for (std::size_t a = 0; a < static_cast<std::size_t>(grad.size()); ++a) {
        if (std::abs(grad[a]) > best) {  // strict: lowest index wins ties
            best = std::abs(grad[a]);
            best_axis = a;
        }
    }
    const int sign = y[best_axis] >= 0.0 ? +1 : -1;
    for (const Chart& c : atlas)
        if (c.axis == best_axis && c.sign == sign) return c;
    throw AtlasError("no chart for the selected axis and sheet");
}

DriftDiffusion brownian_coefficients(const MetricEval& metric) {
    const Eigen::Index m = metric.g.rows();
    const Eigen::LLT<Mat> llt_g(metric.g);
    if (llt_g.info() != Eigen::Success)
        throw MetricError("metric is not positive definite at the evaluation point");
    const Mat g_inv = llt_g.solve(Mat::Identity(m, m));
    const Eigen::LLT<Mat> llt_inv(g_inv);
    if (llt_inv.info() != Eigen::Success)
        throw MetricError("inverse metric has no Cholesky factor at the evaluation point");

    DriftDiffusion ab;
    ab.b = llt_inv.matrixL();
    ab.a = Vec::Zero(m);
    // a = (1 / (2 sqrt|g|)) d_j(sqrt|g| g^{ij}), via
    // d_j sqrt|g| = (1/2) sqrt|g| tr(g^{-1} d_j g) and
    // d_j g^{-1} = -g^{-1} (d_j g) g^{-1}
    for (Eigen::Index j = 0; j < m; ++j) {
        const Mat gj = g_inv * metric.dg[static_cast<std::size_t>(j)];
        const double trace_term = 0.5 * gj.trace();
        const Mat dinv = -gj * g_inv;
        for (Eigen::Index i = 0; i < m; ++i)
            ab.a[i] += 0.5 * (trace_term * g_inv(i, j) + dinv(i, j));
    }
    return ab;
}

JetPoint brownian_jet(const MetricEval& metric, const Vec& chart_x) {
    const auto ab = brownian_coefficients(metric);
    return canonical_jet(chart_x, ab.a, ab.b);
}

double clamp_radius(double r, double eps) {
    if (r <= 0.5 * eps) return r;
    // saturates strictly below eps; slope 1 and zero curvature at the splice
    return 0.5 * eps + 0.45 * eps * std::tanh((r - 0.5 * eps) / (0.45 * eps));
}

Vec clamp_arg(const Vec& u, double eps) {
    const double r = u.norm();
    if (r <= 0.5 * eps || r == 0.0) return u;
    return u * (clamp_radius(r, eps) / r);
}

ExplicitMetric::ExplicitMetric(std::vector<std::vector<ExprAst>> entries)
    : entries_(std::move(entries)) {
    const std::size_t m = entries_.size();
    if (m == 0) throw ConfigError("metric needs at least one entry");
    for (const auto& row : entries_)
        if (row.size() != m) throw ConfigError("metric entry matrix must be square");
}

MetricEval ExplicitMetric::eval(const Vec& x) const {
    const std::size_t m = dim();
    MetricEval out;
    out.g = Mat(m, m);
    out.dg.assign(m, Mat::Zero(m, m));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const Jet2 e = state_jet(entries_[i][j], x);
            out.g(i, j) = e.value;
            for (std::size_t k = 0; k < m; ++k) out.dg[k](i, j) = e.grad[k];
        }
    }
    if ((out.g - out.g.transpose()).lpNorm<Eigen::Infinity>() > 1e-12)
        throw MetricError("metric expressions are not symmetric");
    return out;
}

double surface_generator(const Chart& chart, const Vec& y, const ExprAst& f_ambient) {
    const Vec x = chart.chart_coords(y);
    const auto jets = chart.map_jets(x, y[chart.axis]);
    const JetPoint chart_jet = brownian_jet(induced_metric(jets), x);
    const JetPoint ambient_jet = pushforward(chart_jet, jets);
    const Jet2 f_jet = state_jet(f_ambient, y);
    return 0.5 * pushforward_scalar(ambient_jet, f_jet).hess_trace();
}

namespace {

Vec surface_step(const ImplicitSurface& surface, const std::vector<Chart>& atlas, const Vec& y,
                 const Vec& dw, const ManifoldWalkOptions& opts) {
    // charts ordered by normal component, the selection-rule winner first
    const Vec grad = surface.gradient(y);
    std::vector<std::size_t> order(static_cast<std::size_t>(grad.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&grad](std::size_t a, std::size_t b) {
        if (std::abs(grad[a]) != std::abs(grad[b])) return std::abs(grad[a]) > std::abs(grad[b]);
        return a < b;
    });

    for (std::size_t axis : order) {
        const int sign = y[axis] >= 0.0 ? +1 : -1;
        const Chart* chart = nullptr;
        for (const Chart& c : atlas)
            if (c.axis == axis && c.sign == sign) chart = &c;
        if (!chart) continue;
        try {
            const Vec x = chart->chart_coords(y);
            const auto jets = chart->map_jets(x, y[axis]);
            const auto ab = brownian_coefficients(induced_metric(jets));
            const Vec x_new = canonical_curve(x, ab.a, ab.b, clamp_arg(dw, opts.clamp_eps));
            const double axis_new = chart->solve(x_new, y[axis]);
            const Vec y_new = chart->ambient_point(x_new, axis_new);
            if (std::abs(surface.value(y_new)) > opts.surface_tol)
                throw DomainError("stepped point left the surface tolerance");
            return y_new;
        } catch (const DomainError&) {
            continue;  // try the next-best chart
        } catch (const MetricError&) {
            continue;
        }
    }
    throw DomainError("chart exhaustion: no chart could take the step");
}

}  // namespace

TrajectorySet simulate_surface_bm(const ImplicitSurface& surface, const Vec& y0,
                                  const BrownianGrid& grid, std::size_t steps,
                                  const ManifoldWalkOptions& opts) {
    if (std::abs(surface.value(y0)) > opts.surface_tol)
        throw ConfigError("starting point is not on the surface");
    if (grid.drivers() != surface.chart_dim())
        throw ShapeError("grid driver count must equal the chart dimension");
    const auto atlas = build_atlas(surface);
    const StepFn step = [&surface, &atlas, &opts](const Vec& y, const Vec& dw, double, double) {
        return surface_step(surface, atlas, y, dw, opts);
    };
    return simulate_custom(step, grid, y0, steps, opts.sim, "manifold-bm");
}

TrajectorySet simulate_chart_bm(const ExplicitMetric& metric, const Vec& x0,
                                const BrownianGrid& grid, std::size_t steps,
                                const ManifoldWalkOptions& opts) {
    if (grid.drivers() != metric.dim())
        throw ShapeError("grid driver count must equal the chart dimension");
    const StepFn step = [&metric, &opts](const Vec& x, const Vec& dw, double, double) {
        const auto ab = brownian_coefficients(metric.eval(x));
        return canonical_curve(x, ab.a, ab.b, clamp_arg(dw, opts.clamp_eps));
    };
    return simulate_custom(step, grid, x0, steps, opts.sim, "chart-bm");
}

}  // namespace jetsde
