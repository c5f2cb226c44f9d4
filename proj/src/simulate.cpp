#include "jetsde/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

#include "json.hpp"

namespace jetsde {

TrajectorySet::TrajectorySet(std::size_t paths, std::vector<double> times, std::size_t n)
    : paths_(paths),
      times_(std::move(times)),
      n_(n),
      data_(paths * times_.size() * n, 0.0),
      diverged_step_(paths, -1) {}

Vec TrajectorySet::state_vec(std::size_t path, std::size_t record) const {
    Vec v(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) v[i] = state(path, record, i);
    return v;
}

std::size_t TrajectorySet::diverged_count() const {
    std::size_t c = 0;
    for (auto s : diverged_step_)
        if (s >= 0) ++c;
    return c;
}

void TrajectorySet::write_csv(std::ostream& os) const {
    os << "path,step,time";
    for (std::size_t i = 1; i <= n_; ++i) os << ",x" << i;
    os << ",diverged\n";
    char buf[40];
    for (std::size_t p = 0; p < paths_; ++p) {
        for (std::size_t r = 0; r < times_.size(); ++r) {
            os << p << ',' << r << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", times_[r]);
            os << buf;
            for (std::size_t i = 0; i < n_; ++i) {
                std::snprintf(buf, sizeof(buf), "%.17g", state(p, r, i));
                os << ',' << buf;
            }
            os << ',' << (diverged(p) ? 1 : 0) << '\n';
        }
    }
}

namespace {

using Stepper = std::function<Vec(const Vec&, const Vec&, double, double)>;

struct PathRun {
    Vec endpoint;
    std::int64_t diverged_step = -1;
};

bool finite(const Vec& x) { return x.allFinite(); }

// One path driven by pre-filled fine increments, coarsened on the fly by
// summing `factor` consecutive fine increments per step.
PathRun run_path(const Stepper& step, const Vec& x0, const std::vector<double>& fine,
                 std::size_t d, std::size_t factor, std::size_t steps, double dt,
                 const SdeModel* floors, TrajectorySet* record, std::size_t path,
                 const SimOptions& opts, const JetFieldEval* dense_field) {
    PathRun run;
    Vec x = x0;
    Vec dw(static_cast<Eigen::Index>(d));
    const std::size_t sub = opts.dense_substeps;
    std::size_t rec_cursor = 1;  // slot 0 holds the initial state
    for (std::size_t k = 0; k < steps; ++k) {
        for (std::size_t j = 0; j < d; ++j) dw[j] = exact_block_sum(fine, k * factor, factor, d, j);
        const double t = static_cast<double>(k) * dt;
        const std::size_t n = static_cast<std::size_t>(x.size());
        if (run.diverged_step < 0) {
            bool bad = false;
            Vec next;
            try {
                if (record && sub > 0 && dense_field) {
                    // intra-step interpolation: same increment, scaled time fraction
                    for (std::size_t s = 1; s <= sub; ++s) {
                        const double frac = static_cast<double>(s) / static_cast<double>(sub + 1);
                        const Vec xi = dense_field->curve(x, (frac * dw).eval(), t);
                        for (std::size_t i = 0; i < n; ++i)
                            record->state(path, rec_cursor + s - 1, i) = xi[i];
                    }
                }
                next = step(x, dw, t, dt);
                if (floors) floors->apply_floors(next);
                bad = !finite(next);
            } catch (const DomainError&) {
                bad = true;
            }
            if (bad)
                run.diverged_step = static_cast<std::int64_t>(k);
            else
                x = next;
        } else if (record && sub > 0) {
            for (std::size_t s = 1; s <= sub; ++s)
                for (std::size_t i = 0; i < n; ++i) record->state(path, rec_cursor + s - 1, i) = x[i];
        }
        if (record) {
            const std::size_t stride = std::max<std::size_t>(opts.record_every, 1);
            const bool want = opts.record_every == 0 ? (k + 1 == steps)
                                                     : ((k + 1) % stride == 0 || k + 1 == steps);
            if (want) {
                for (std::size_t i = 0; i < n; ++i) record->state(path, rec_cursor + sub, i) = x[i];
                rec_cursor += sub + 1;
            }
        }
    }
    run.endpoint = x;
    return run;
}

std::vector<double> record_times(std::size_t steps, double dt, const SimOptions& opts) {
    std::vector<double> times;
    times.push_back(0.0);
    const std::size_t stride = std::max<std::size_t>(opts.record_every, 1);
    for (std::size_t k = 0; k < steps; ++k) {
        const bool want =
            opts.record_every == 0 ? (k + 1 == steps) : ((k + 1) % stride == 0 || k + 1 == steps);
        if (!want) continue;
        if (opts.dense_substeps > 0)
            for (std::size_t s = 1; s <= opts.dense_substeps; ++s)
                times.push_back((static_cast<double>(k) +
                                 static_cast<double>(s) / static_cast<double>(opts.dense_substeps + 1)) *
                                dt);
        times.push_back(static_cast<double>(k + 1) * dt);
    }
    return times;
}

TrajectorySet simulate(const JetFieldEval& field, const BrownianGrid& grid, const Vec& x0,
                       std::size_t steps, const Stepper& stepper, const SimOptions& opts,
                       const SdeModel* floors_from, const char* scheme_name,
                       const JetFieldEval* dense_field) {
    if (static_cast<std::size_t>(x0.size()) != field.n)
        throw ShapeError("initial state length does not match the model");
    if (grid.drivers() != field.d) throw ShapeError("grid driver count does not match the model");
    grid.validate_levels({steps});
    if (opts.dense_substeps > 0 && opts.record_every > 1)
        throw ConfigError("dense output requires recording every step");

    const double dt = grid.horizon() / static_cast<double>(steps);
    TrajectorySet out(grid.paths(), record_times(steps, dt, opts), field.n);
    out.scheme = scheme_name;
    out.seed = grid.seed();
    for (std::size_t p = 0; p < grid.paths(); ++p)
        for (std::size_t i = 0; i < field.n; ++i) out.state(p, 0, i) = x0[i];

    const std::size_t factor = grid.finest_steps() / steps;
    std::vector<double> fine;
    const SdeModel* floors = (floors_from && floors_from->has_floors()) ? floors_from : nullptr;
    for (std::size_t p = 0; p < grid.paths(); ++p) {
        if (opts.antithetic && (p & 1))
            for (double& v : fine) v = -v;  // reuse the previous path's buffer
        else
            grid.fill_fine(p, fine);
        const PathRun run = run_path(stepper, x0, fine, grid.drivers(), factor, steps, dt, floors,
                                     &out, p, opts, dense_field);
        if (run.diverged_step >= 0) out.flag_diverged(p, run.diverged_step);
    }
    return out;
}

Stepper jet_stepper(const JetFieldEval& field) {
    return [&field](const Vec& x, const Vec& dw, double t, double) {
        return field.curve(x, dw, t);
    };
}

Stepper euler_stepper(const JetFieldEval& field) {
    return [&field](const Vec& x, const Vec& dw, double t, double dt) {
        const auto ab = field.coefficients(x, t);
        return (x + ab.a * dt + ab.b * dw).eval();
    };
}

}  // namespace

TrajectorySet simulate_2jet(const JetFieldEval& field, const BrownianGrid& grid, const Vec& x0,
                            std::size_t steps, const SimOptions& opts,
                            const SdeModel* floors_from) {
    return simulate(field, grid, x0, steps, jet_stepper(field), opts, floors_from, "2jet", &field);
}

TrajectorySet simulate_euler(const JetFieldEval& field, const BrownianGrid& grid, const Vec& x0,
                             std::size_t steps, const SimOptions& opts,
                             const SdeModel* floors_from) {
    return simulate(field, grid, x0, steps, euler_stepper(field), opts, floors_from, "euler",
                    nullptr);
}

TrajectorySet simulate_custom(const StepFn& step, const BrownianGrid& grid, const Vec& x0,
                              std::size_t steps, const SimOptions& opts, const char* scheme_name) {
    grid.validate_levels({steps});
    if (opts.dense_substeps > 0) throw ConfigError("dense output is not available for custom steps");
    const double dt = grid.horizon() / static_cast<double>(steps);
    TrajectorySet out(grid.paths(), record_times(steps, dt, opts), static_cast<std::size_t>(x0.size()));
    out.scheme = scheme_name;
    out.seed = grid.seed();
    for (std::size_t p = 0; p < grid.paths(); ++p)
        for (Eigen::Index i = 0; i < x0.size(); ++i) out.state(p, 0, i) = x0[i];
    const std::size_t factor = grid.finest_steps() / steps;
    std::vector<double> fine;
    for (std::size_t p = 0; p < grid.paths(); ++p) {
        if (opts.antithetic && (p & 1))
            for (double& v : fine) v = -v;
        else
            grid.fill_fine(p, fine);
        const PathRun run =
            run_path(step, x0, fine, grid.drivers(), factor, steps, dt, nullptr, &out, p, opts, nullptr);
        if (run.diverged_step >= 0) out.flag_diverged(p, run.diverged_step);
    }
    return out;
}

double pairwise_sum(const std::vector<double>& values) {
    std::function<double(std::size_t, std::size_t)> sum = [&](std::size_t lo,
                                                              std::size_t hi) -> double {
        if (hi - lo <= 8) {
            double s = 0.0;
            for (std::size_t i = lo; i < hi; ++i) s += values[i];
            return s;
        }
        const std::size_t mid = lo + (hi - lo) / 2;
        return sum(lo, mid) + sum(mid, hi);
    };
    return values.empty() ? 0.0 : sum(0, values.size());
}

std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {slope, (sy - slope * sx) / n};
}

std::optional<Vec> closed_form_endpoint(const SdeModel& model, const std::vector<double>& fine,
                                        std::size_t fine_steps, double dt, double horizon) {
    const auto& consts = model.symbols->constants;
    auto get = [&consts](const char* name, double fallback) {
        auto it = consts.find(name);
        return it == consts.end() ? fallback : it->second;
    };
    if (model.name == "gbm") {
        const double sigma = get("sigma", 0.0);
        const double mu = get("mu", 0.0);
        double w = 0.0;
        for (std::size_t k = 0; k < fine_steps; ++k) w += fine[k];
        Vec r(1);
        r[0] = model.x0[0] * std::exp((mu - 0.5 * sigma * sigma) * horizon + sigma * w);
        return r;
    }
    if (model.name == "ou") {
        const double kappa = get("kappa", 1.0);
        const double theta = get("theta", 0.0);
        const double sigma = get("sigma", 1.0);
        double integral = 0.0;
        for (std::size_t k = 0; k < fine_steps; ++k)
            integral += std::exp(-kappa * (horizon - static_cast<double>(k) * dt)) * fine[k];
        Vec r(1);
        r[0] = theta + (model.x0[0] - theta) * std::exp(-kappa * horizon) + sigma * integral;
        return r;
    }
    return std::nullopt;
}

ConvergenceReport convergence_study(const SdeModel& model, const std::vector<std::size_t>& levels,
                                    std::size_t paths, ReferenceKind reference, std::uint64_t seed,
                                    double horizon, Scheme scheme) {
    if (levels.empty()) throw ConfigError("convergence study needs at least one level");
    const std::size_t finest_level = levels.back();
    // reference runs at four times the finest study level on the same grid
    const std::size_t ref_steps = reference == ReferenceKind::ClosedForm ? finest_level
                                                                         : 4 * finest_level;
    BrownianGrid grid(seed, model.d, horizon, ref_steps, paths);
    grid.validate_levels(levels);

    const JetFieldEval field = to_jet_field(model);
    const Stepper stepper = scheme == Scheme::TwoJet ? jet_stepper(field) : euler_stepper(field);
    const Stepper ref_stepper =
        reference == ReferenceKind::FinestEuler ? euler_stepper(field) : jet_stepper(field);

    ConvergenceReport report;
    report.model = model.name;
    report.seed = seed;
    report.paths = paths;
    report.horizon = horizon;
    report.level_steps = levels;
    switch (reference) {
        case ReferenceKind::Finest2Jet:
            report.reference = "2jet scheme at 4x the finest level";
            break;
        case ReferenceKind::FinestEuler:
            report.reference = "euler scheme at 4x the finest level";
            break;
        case ReferenceKind::ClosedForm:
            report.reference = "closed form (" + model.name + ")";
            break;
    }

    const std::size_t L = levels.size();
    std::vector<std::vector<double>> sq_err(L);  // per level, per usable path
    report.diverged.assign(L, 0);
    SimOptions opts;

    std::vector<double> fine;
    const SdeModel* floors = model.has_floors() ? &model : nullptr;
    for (std::size_t p = 0; p < paths; ++p) {
        grid.fill_fine(p, fine);
        const double fine_dt = grid.fine_dt();

        Vec ref;
        bool ref_ok = true;
        if (reference == ReferenceKind::ClosedForm) {
            auto cf = closed_form_endpoint(model, fine, grid.finest_steps(), fine_dt, horizon);
            if (!cf)
                throw ConfigError("no closed form registered for model '" + model.name + "'");
            ref = *cf;
        } else {
            const PathRun run = run_path(ref_stepper, model.x0, fine, model.d, 1, ref_steps,
                                         grid.horizon() / static_cast<double>(ref_steps), floors,
                                         nullptr, p, opts, nullptr);
            ref = run.endpoint;
            ref_ok = run.diverged_step < 0;
        }

        for (std::size_t li = 0; li < L; ++li) {
            const std::size_t steps = levels[li];
            const std::size_t factor = grid.finest_steps() / steps;
            const PathRun run = run_path(stepper, model.x0, fine, model.d, factor, steps,
                                         horizon / static_cast<double>(steps), floors, nullptr, p,
                                         opts, nullptr);
            if (!ref_ok || run.diverged_step >= 0) {
                ++report.diverged[li];
                continue;
            }
            sq_err[li].push_back((run.endpoint - ref).squaredNorm());
        }
    }

    std::vector<double> log_dt, log_rms;
    for (std::size_t li = 0; li < L; ++li) {
        const double dt = horizon / static_cast<double>(levels[li]);
        report.level_dt.push_back(dt);
        const double mean = sq_err[li].empty()
                                ? std::numeric_limits<double>::quiet_NaN()
                                : pairwise_sum(sq_err[li]) / static_cast<double>(sq_err[li].size());
        report.rms.push_back(std::sqrt(mean));
        if (std::isfinite(report.rms.back()) && report.rms.back() > 0.0) {
            log_dt.push_back(std::log2(dt));
            log_rms.push_back(std::log2(report.rms.back()));
        }
    }
    if (log_dt.size() >= 2) {
        const auto [slope, intercept] = fit_line(log_dt, log_rms);
        report.slope = slope;
        report.intercept = intercept;
    }
    return report;
}

std::string ConvergenceReport::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["model"] = model;
    j["reference"] = reference;
    j["seed"] = seed;
    j["paths"] = paths;
    j["horizon"] = horizon;
    j["slope"] = slope;
    j["intercept"] = intercept;
    j["levels"] = nlohmann::json::array();
    for (std::size_t i = 0; i < level_steps.size(); ++i) {
        nlohmann::json level;
        level["steps"] = level_steps[i];
        level["dt"] = level_dt[i];
        level["rms"] = rms[i];
        level["diverged"] = diverged[i];
        j["levels"].push_back(level);
    }
    return j.dump(2);
}

}  // namespace jetsde
