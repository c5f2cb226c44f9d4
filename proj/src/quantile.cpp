#include "jetsde/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "json.hpp"

#include "jetsde/brownian.hpp"
#include "jetsde/simulate.hpp"

namespace jetsde {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

// Peter Acklam's rational approximation for the normal quantile.
double inverse_normal_guess(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile level must lie strictly in (0,1)");
    double x = inverse_normal_guess(p);
    // one Halley step against the exact CDF
    const double e = normal_cdf(x) - p;
    if (e != 0.0) {
        const double u = e * 2.506628274631000502416 * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

double percentile_expansion(double alpha, double t, double x0, double a0, double b0,
                            double b0prime) {
    if (t < 0.0) throw DomainError("percentile expansion needs t >= 0");
    const double z = inverse_normal_cdf(alpha);
    return x0 + b0 * std::sqrt(t) * z + (a0 - 0.5 * b0 * b0prime * (1.0 - z * z)) * t;
}

double lamperti_drift(const SdeModel& model, double x) {
    if (model.form != SdeForm::Ito) throw ConfigError("lamperti drift expects an Ito-form model");
    if (model.n != 1 || model.d != 1) throw ConfigError("lamperti drift is one dimensional");
    const double x0 = model.x0[0];
    const double lo = std::min(x0, x), hi = std::max(x0, x);
    double sign = 0.0;
    for (int i = 0; i <= 32; ++i) {
        const double xi = lo + (hi - lo) * static_cast<double>(i) / 32.0;
        const double bi = model.diffusion[0][0](Vec::Constant(1, xi), 0.0);
        if (bi == 0.0 || (sign != 0.0 && bi * sign < 0.0))
            throw DomainError("diffusion coefficient vanishes on the transform segment");
        sign = bi > 0.0 ? 1.0 : -1.0;
    }
    const Vec xv = Vec::Constant(1, x);
    const Jet2 b = model.diffusion[0][0].jet(xv, 0.0);
    const double a = model.drift[0](xv, 0.0);
    return a / b.value - 0.5 * b.grad[0];
}

namespace {

// type-7 quantile: linear interpolation of order statistics
double quantile_type7(const std::vector<double>& sorted, double alpha) {
    const std::size_t m = sorted.size();
    const double h = alpha * static_cast<double>(m - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, m - 1);
    const double frac = h - std::floor(h);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// one-standard-error order-statistic interval around the alpha quantile
double quantile_ci(const std::vector<double>& sorted, double alpha) {
    const double m = static_cast<double>(sorted.size());
    const double spread = std::sqrt(m * alpha * (1.0 - alpha));
    const auto clampi = [&](double v) {
        return static_cast<std::size_t>(std::clamp(v, 0.0, m - 1.0));
    };
    const double lo = sorted[clampi(alpha * m - spread)];
    const double hi = sorted[clampi(alpha * m + spread)];
    return 0.5 * (hi - lo);
}

// KDE argmax on a 512-point grid via a binned kernel sum
double kde_mode(const std::vector<double>& sorted, double bandwidth) {
    const double lo = sorted.front() - bandwidth, hi = sorted.back() + bandwidth;
    if (!(hi > lo)) return sorted.front();
    constexpr std::size_t kBins = 4096, kGrid = 512;
    std::vector<double> bins(kBins, 0.0);
    const double scale = static_cast<double>(kBins) / (hi - lo);
    for (double s : sorted) {
        const std::size_t b = static_cast<std::size_t>(
            std::clamp((s - lo) * scale, 0.0, static_cast<double>(kBins - 1)));
        bins[b] += 1.0;
    }
    double best = lo, best_density = -1.0;
    for (std::size_t g = 0; g < kGrid; ++g) {
        const double xg =
            lo + (hi - lo) * (static_cast<double>(g) + 0.5) / static_cast<double>(kGrid);
        double density = 0.0;
        for (std::size_t b = 0; b < kBins; ++b) {
            if (bins[b] == 0.0) continue;
            const double xb = lo + (static_cast<double>(b) + 0.5) / scale;
            const double u = (xg - xb) / bandwidth;
            if (std::abs(u) > 8.0) continue;
            density += bins[b] * std::exp(-0.5 * u * u);
        }
        if (density > best_density) {
            best_density = density;
            best = xg;
        }
    }
    return best;
}

}  // namespace

FanReport mc_percentiles(const PercentileSpec& spec, std::uint64_t seed) {
    if (!spec.model) throw ConfigError("percentile spec needs a model");
    const SdeModel& model = *spec.model;
    if (model.n != 1 || model.d != 1)
        throw ConfigError("percentile analytics are one dimensional");
    if (spec.alphas.empty() || spec.times.empty())
        throw ConfigError("percentile spec needs quantile levels and times");
    for (double a : spec.alphas)
        if (!(a > 0.0 && a < 1.0)) throw DomainError("quantile level must lie strictly in (0,1)");
    for (std::size_t i = 1; i < spec.times.size(); ++i)
        if (spec.times[i] <= spec.times[i - 1]) throw ConfigError("times must be ascending");
    if (spec.times.front() <= 0.0) throw ConfigError("times must be positive");

    const JetFieldEval field = to_jet_field(model);
    const double x0 = model.x0[0];
    const auto ab0 = field.coefficients(model.x0, 0.0);
    if (ab0.b(0, 0) == 0.0)
        throw DomainError("diffusion coefficient vanishes at x0; percentile expansion requires "
                          "a non-degenerate diffusion");

    // drift/diffusion data for the expansion and the mode line
    double a0 = ab0.a[0], b0 = ab0.b(0, 0), b0p = 0.0;
    if (model.form == SdeForm::Ito) {
        b0p = model.diffusion[0][0].jet(model.x0, 0.0).grad[0];
    } else {
        // derivative of the extracted diffusion by a symmetric difference
        const double h = 1e-6 * std::max(1.0, std::abs(x0));
        b0p = (field.coefficients(Vec::Constant(1, x0 + h), 0.0).b(0, 0) -
               field.coefficients(Vec::Constant(1, x0 - h), 0.0).b(0, 0)) /
              (2.0 * h);
    }

    const double t_end = spec.times.back();
    const std::size_t steps = static_cast<std::size_t>(std::llround(t_end / spec.dt));
    if (steps == 0) throw ConfigError("fine step exceeds the horizon");
    std::vector<std::size_t> snap_steps;
    for (double t : spec.times) {
        const double exact = t / (t_end / static_cast<double>(steps));
        const std::size_t k = static_cast<std::size_t>(std::llround(exact));
        if (k == 0 || std::abs(exact - static_cast<double>(k)) > 1e-6)
            throw ConfigError("every requested time must sit on the fine grid");
        snap_steps.push_back(k);
    }

    BrownianGrid grid(seed, 1, t_end, steps, spec.paths);
    const double dt = grid.fine_dt();

    const std::size_t K = spec.times.size();
    std::vector<std::vector<double>> samples(K);
    for (auto& s : samples) s.reserve(spec.paths);
    std::size_t diverged = 0;

    std::vector<double> fine;
    std::vector<double> snaps(K);
    Vec u(1);
    for (std::size_t p = 0; p < spec.paths; ++p) {
        if (p & 1)
            for (double& v : fine) v = -v;  // antithetic partner path
        else
            grid.fill_fine(p, fine);
        Vec x = model.x0;
        bool bad = false;
        std::size_t snap = 0;
        for (std::size_t k = 0; k < steps && snap < K; ++k) {
            u[0] = fine[k];
            try {
                x = field.curve(x, u, static_cast<double>(k) * dt);
            } catch (const DomainError&) {
                bad = true;
            }
            if (bad || !x.allFinite()) {
                bad = true;
                break;
            }
            if (k + 1 == snap_steps[snap]) snaps[snap++] = x[0];
        }
        if (bad || snap < K) {
            ++diverged;
            continue;
        }
        for (std::size_t s = 0; s < K; ++s) samples[s].push_back(snaps[s]);
    }

    FanReport report;
    report.model = model.name;
    report.seed = seed;
    report.paths = spec.paths;
    report.x0 = x0;
    report.diverged = diverged;

    std::vector<double> medians(K);
    for (std::size_t s = 0; s < K; ++s) {
        std::sort(samples[s].begin(), samples[s].end());
        if (samples[s].empty()) throw ConfigError("all paths diverged before the first time");
        medians[s] = quantile_type7(samples[s], 0.5);
    }

    for (double alpha : spec.alphas) {
        for (std::size_t s = 0; s < K; ++s) {
            FanEntry e;
            e.alpha = alpha;
            e.time = spec.times[s];
            e.expansion = percentile_expansion(alpha, e.time, x0, a0, b0, b0p);
            e.mc = quantile_type7(samples[s], alpha);
            e.ci = quantile_ci(samples[s], alpha);
            report.entries.push_back(e);
        }
    }

    for (std::size_t s = 0; s < K; ++s) {
        ModeEntry m;
        m.time = spec.times[s];
        const std::size_t msz = samples[s].size();
        double mean = 0.0;
        for (double v : samples[s]) mean += v;
        mean /= static_cast<double>(msz);
        double var = 0.0;
        for (double v : samples[s]) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / static_cast<double>(msz - 1));
        const double bandwidth = 1.06 * sd * std::pow(static_cast<double>(msz), -0.2);
        m.kde_mode = kde_mode(samples[s], bandwidth);
        m.mode_line = x0 + a0 * m.time - 1.5 * b0 * b0p * m.time;
        m.band_low = m.mode_line - bandwidth;
        m.band_high = m.mode_line + bandwidth;
        report.modes.push_back(m);
    }

    report.median_tangent_mc = fit_line(spec.times, medians).first;
    if (model.form == SdeForm::Ito) {
        report.strat_drift_x0 = ito_to_strat(model).drift[0](model.x0, 0.0);
    } else {
        report.strat_drift_x0 = a0 - 0.5 * b0 * b0p;
    }
    return report;
}

std::string FanReport::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["model"] = model;
    j["seed"] = seed;
    j["paths"] = paths;
    j["x0"] = x0;
    j["median_tangent_mc"] = median_tangent_mc;
    j["stratonovich_drift_x0"] = strat_drift_x0;
    j["diverged"] = diverged;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json je;
        je["alpha"] = e.alpha;
        je["t"] = e.time;
        je["expansion"] = e.expansion;
        je["mc"] = e.mc;
        je["ci"] = e.ci;
        j["entries"].push_back(je);
    }
    j["modes"] = nlohmann::json::array();
    for (const auto& m : modes) {
        nlohmann::json jm;
        jm["t"] = m.time;
        jm["kde_mode"] = m.kde_mode;
        jm["mode_line"] = m.mode_line;
        jm["band_low"] = m.band_low;
        jm["band_high"] = m.band_high;
        j["modes"].push_back(jm);
    }
    return j.dump(2);
}

std::vector<FanCurveRow> fan_curves(const JetFieldEval& field, double x0,
                                    const std::vector<double>& alphas,
                                    const std::vector<double>& times) {
    if (field.n != 1 || field.d != 1) throw ConfigError("fan curves are one dimensional");
    std::vector<FanCurveRow> rows;
    const Vec x = Vec::Constant(1, x0);
    Vec u(1);
    for (double alpha : alphas) {
        const double z = inverse_normal_cdf(alpha);
        for (double t : times) {
            if (t < 0.0) throw DomainError("fan curves need t >= 0");
            FanCurveRow r;
            r.alpha = alpha;
            r.time = t;
            u[0] = z * std::sqrt(t);
            r.value = field.curve(x, u, 0.0)[0];
            rows.push_back(r);
        }
    }
    return rows;
}

void write_fan_curves_csv(const std::vector<FanCurveRow>& rows, std::ostream& os) {
    os << "alpha,t,value\n";
    char buf[40];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.alpha);
        os << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", r.time);
        os << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", r.value);
        os << buf << '\n';
    }
}

}  // namespace jetsde
