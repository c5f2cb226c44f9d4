#pragma once

#include <cstdint>
#include <vector>

#include "jetsde/errors.hpp"

namespace jetsde {

namespace rng {

/// Stateless counter-keyed generator. Every draw is a pure function of
/// (seed, path, step, driver), so parallel path generation is
/// deterministic regardless of scheduling or thread count.
std::uint64_t counter_mix(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                          std::uint64_t driver);

/// Standard normal via Box-Muller on two counter-derived uniforms.
double normal01(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t driver);

double uniform01(std::uint64_t key);

}  // namespace rng

/// Pairwise sum of `count` consecutive fine increments of one driver,
/// starting at `start`. Recursive halving makes coarsening consistent
/// across levels bit for bit. `count` must be a power of two.
double exact_block_sum(const std::vector<double>& fine, std::size_t start, std::size_t count,
                       std::size_t d, std::size_t driver);

/// Seeded Brownian increments at one fine resolution. Coarser step counts
/// are served by summing fine increments exactly, never by re-sampling, so
/// every level of a refinement ladder sees the same underlying path.
class BrownianGrid {
public:
    BrownianGrid(std::uint64_t seed, std::size_t drivers, double horizon, std::size_t finest_steps,
                 std::size_t paths);

    std::uint64_t seed() const { return seed_; }
    std::size_t drivers() const { return d_; }
    double horizon() const { return horizon_; }
    std::size_t finest_steps() const { return finest_; }
    std::size_t paths() const { return paths_; }
    double fine_dt() const { return horizon_ / static_cast<double>(finest_); }

    /// Increments of one path at the finest resolution; out[step * d + k].
    void fill_fine(std::size_t path, std::vector<double>& out) const;

    /// Increments at a coarser level; `steps` must divide the finest count
    /// by a power of two. Exact pairwise re-summation of fine increments.
    void fill_level(std::size_t path, std::size_t steps, std::vector<double>& out) const;

    /// Sum of all increments (the endpoint W_T), one entry per driver.
    std::vector<double> endpoint(std::size_t path) const;

    /// Check a level ladder: strictly increasing step counts, each dividing
    /// the next and the finest count by powers of two.
    void validate_levels(const std::vector<std::size_t>& levels) const;

private:
    std::uint64_t seed_;
    std::size_t d_;
    double horizon_;
    std::size_t finest_;
    std::size_t paths_;
};

}  // namespace jetsde
