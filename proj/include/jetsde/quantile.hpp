#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "jetsde/model.hpp"
#include "jetsde/types.hpp"

namespace jetsde {

/// Inverse standard normal CDF. Rational initial guess refined by one
/// Halley step against erfc; absolute error well below 1e-9 and exactly
/// zero at one half.
double inverse_normal_cdf(double p);

/// Short-time percentile curve of a scalar SDE:
/// x0 + b0 sqrt(t) z + (a0 - (1/2) b0 b0' (1 - z^2)) t with z the normal
/// quantile of alpha. The alpha = 1/2 line is the Stratonovich drift ray.
double percentile_expansion(double alpha, double t, double x0, double a0, double b0,
                            double b0prime);

/// Drift of the unit-diffusion coordinate z with dz = dx / b(x):
/// a(x)/b(x) - b'(x)/2. Requires the diffusion to keep one sign between
/// the model's x0 and x.
double lamperti_drift(const SdeModel& model, double x);

struct PercentileSpec {
    const SdeModel* model = nullptr;   // scalar model
    std::vector<double> alphas;        // each in (0,1)
    std::vector<double> times;         // ascending, positive
    std::size_t paths = 100000;
    double dt = 1e-4;                  // fine simulation step
};

struct FanEntry {
    double alpha = 0.0;
    double time = 0.0;
    double expansion = 0.0;   // percentile_expansion value
    double mc = 0.0;          // empirical quantile (type-7)
    double ci = 0.0;          // one-standard-error order-statistic half width
};

struct ModeEntry {
    double time = 0.0;
    double kde_mode = 0.0;    // argmax of the Gaussian-kernel density
    double mode_line = 0.0;   // x0 + a0 t - (3/2) b0 b0' t
    double band_low = 0.0;    // mode_line +- the KDE bandwidth
    double band_high = 0.0;
};

struct FanReport {
    std::string model;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    double x0 = 0.0;
    std::vector<FanEntry> entries;          // alpha-major, time-minor
    std::vector<ModeEntry> modes;           // one per time
    double median_tangent_mc = 0.0;         // least-squares slope of the MC median
    double strat_drift_x0 = 0.0;            // Stratonovich drift at (x0, 0)
    std::size_t diverged = 0;

    std::string to_json() const;
};

/// Monte Carlo percentiles of a scalar model under the 2-jet scheme with
/// antithetic path pairs, compared against the short-time expansion.
FanReport mc_percentiles(const PercentileSpec& spec, std::uint64_t seed);

struct FanCurveRow {
    double alpha = 0.0;
    double time = 0.0;
    double value = 0.0;  // gamma_{x0}(z sqrt(t)) on the model's curve
};

/// Fan-diagram curves through the curve family itself: the alpha
/// percentile ray is the curve evaluated at z(alpha) sqrt(t).
std::vector<FanCurveRow> fan_curves(const JetFieldEval& field, double x0,
                                    const std::vector<double>& alphas,
                                    const std::vector<double>& times);

void write_fan_curves_csv(const std::vector<FanCurveRow>& rows, std::ostream& os);

}  // namespace jetsde
