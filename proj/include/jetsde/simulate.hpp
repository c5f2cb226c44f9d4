#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jetsde/brownian.hpp"
#include "jetsde/model.hpp"
#include "jetsde/types.hpp"

namespace jetsde {

/// States of a batch of simulated paths on a recorded time grid. A path
/// that produced a non-finite state (or a coefficient domain error) is
/// flagged at the first bad step; its last good state is carried forward
/// and it is excluded from statistics.
class TrajectorySet {
public:
    TrajectorySet(std::size_t paths, std::vector<double> times, std::size_t n);

    std::size_t paths() const { return paths_; }
    std::size_t records() const { return times_.size(); }
    std::size_t states() const { return n_; }
    const std::vector<double>& times() const { return times_; }

    double state(std::size_t path, std::size_t record, std::size_t coord) const {
        return data_[(path * times_.size() + record) * n_ + coord];
    }
    double& state(std::size_t path, std::size_t record, std::size_t coord) {
        return data_[(path * times_.size() + record) * n_ + coord];
    }
    Vec state_vec(std::size_t path, std::size_t record) const;

    bool diverged(std::size_t path) const { return diverged_step_[path] >= 0; }
    void flag_diverged(std::size_t path, std::int64_t step) { diverged_step_[path] = step; }
    std::int64_t diverged_step(std::size_t path) const { return diverged_step_[path]; }
    std::size_t diverged_count() const;

    std::string scheme;
    std::string model;
    std::uint64_t seed = 0;

    /// CSV columns: path, step, time, x1..xn, diverged.
    void write_csv(std::ostream& os) const;

private:
    std::size_t paths_;
    std::vector<double> times_;
    std::size_t n_;
    std::vector<double> data_;
    std::vector<std::int64_t> diverged_step_;
};

struct SimOptions {
    std::size_t record_every = 1;   // record every k-th step (plus start and end)
    std::size_t dense_substeps = 0; // extra curve-interpolated points per step
    bool antithetic = false;        // odd paths reuse the previous path's increments, negated
};

/// The 2-jet scheme: step along the model's curve by the Brownian
/// increment. JetField models step the full curve; coefficient models step
/// the canonical quadratic representative.
TrajectorySet simulate_2jet(const JetFieldEval& field, const BrownianGrid& grid, const Vec& x0,
                            std::size_t steps, const SimOptions& opts = {},
                            const SdeModel* floors_from = nullptr);

/// Euler scheme on the extracted coefficients: x + a dt + b dW.
TrajectorySet simulate_euler(const JetFieldEval& field, const BrownianGrid& grid, const Vec& x0,
                             std::size_t steps, const SimOptions& opts = {},
                             const SdeModel* floors_from = nullptr);

/// Generic driver for custom step rules (used by the manifold walks).
/// The step function may throw DomainError to flag the path as diverged.
using StepFn = std::function<Vec(const Vec& x, const Vec& dw, double t, double dt)>;
TrajectorySet simulate_custom(const StepFn& step, const BrownianGrid& grid, const Vec& x0,
                              std::size_t steps, const SimOptions& opts = {},
                              const char* scheme_name = "custom");

enum class Scheme { TwoJet, Euler };

enum class ReferenceKind { Finest2Jet, FinestEuler, ClosedForm };

struct ConvergenceReport {
    std::string model;
    std::string reference;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    double horizon = 0.0;
    std::vector<std::size_t> level_steps;
    std::vector<double> level_dt;
    std::vector<double> rms;       // error at the horizon vs the reference
    std::vector<std::size_t> diverged;
    double slope = 0.0;            // least squares fit of log2 rms vs log2 dt
    double intercept = 0.0;

    std::string to_json() const;
};

/// Strong-error measurement on coupled grids: all levels and the reference
/// consume the same fine Brownian path per path index.
ConvergenceReport convergence_study(const SdeModel& model, const std::vector<std::size_t>& levels,
                                    std::size_t paths, ReferenceKind reference, std::uint64_t seed,
                                    double horizon, Scheme scheme = Scheme::TwoJet);

/// Closed-form endpoint for registered models ("gbm", "ou"), evaluated on
/// the fine increments of one path. Returns nothing for other models.
std::optional<Vec> closed_form_endpoint(const SdeModel& model, const std::vector<double>& fine,
                                        std::size_t fine_steps, double dt, double horizon);

/// Numerically stable pairwise (tree) summation; the reduction order is
/// fixed, independent of how path results were produced.
double pairwise_sum(const std::vector<double>& values);

/// Least-squares slope and intercept of y against x.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace jetsde
