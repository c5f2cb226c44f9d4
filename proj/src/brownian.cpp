#include "jetsde/brownian.hpp"

#include <cmath>

namespace jetsde {

namespace rng {

namespace {

inline std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t counter_mix(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                          std::uint64_t driver) {
    std::uint64_t k = splitmix(seed);
    k = splitmix(k ^ (path * 0xC2B2AE3D27D4EB4FULL));
    k = splitmix(k ^ (step * 0x165667B19E3779F9ULL));
    k = splitmix(k ^ (driver * 0x27D4EB2F165667C5ULL));
    return k;
}

double uniform01(std::uint64_t key) { return static_cast<double>(key >> 11) * 0x1.0p-53; }

double normal01(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t driver) {
    const std::uint64_t k = counter_mix(seed, path, step, driver);
    // (0,1] for the log argument, [0,1) for the angle
    const double u1 = uniform01(splitmix(k ^ 0x5851F42D4C957F2DULL)) + 0x1.0p-53;
    const double u2 = uniform01(splitmix(k ^ 0x14057B7EF767814FULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace rng

BrownianGrid::BrownianGrid(std::uint64_t seed, std::size_t drivers, double horizon,
                           std::size_t finest_steps, std::size_t paths)
    : seed_(seed), d_(drivers), horizon_(horizon), finest_(finest_steps), paths_(paths) {
    if (drivers == 0) throw ConfigError("grid needs at least one driver");
    if (finest_steps == 0) throw ConfigError("grid needs at least one step");
    if (horizon <= 0.0) throw ConfigError("grid horizon must be positive");
}

void BrownianGrid::fill_fine(std::size_t path, std::vector<double>& out) const {
    const double s = std::sqrt(fine_dt());
    out.resize(finest_ * d_);
    for (std::size_t step = 0; step < finest_; ++step)
        for (std::size_t k = 0; k < d_; ++k)
            out[step * d_ + k] = s * rng::normal01(seed_, path, step, k);
}

double exact_block_sum(const std::vector<double>& fine, std::size_t start, std::size_t count,
                       std::size_t d, std::size_t driver) {
    if (count == 1) return fine[start * d + driver];
    const std::size_t half = count / 2;
    return exact_block_sum(fine, start, half, d, driver) +
           exact_block_sum(fine, start + half, half, d, driver);
}

void BrownianGrid::fill_level(std::size_t path, std::size_t steps, std::vector<double>& out) const {
    validate_levels({steps});
    std::vector<double> fine;
    fill_fine(path, fine);
    const std::size_t factor = finest_ / steps;
    out.resize(steps * d_);
    for (std::size_t step = 0; step < steps; ++step)
        for (std::size_t k = 0; k < d_; ++k)
            out[step * d_ + k] = exact_block_sum(fine, step * factor, factor, d_, k);
}

std::vector<double> BrownianGrid::endpoint(std::size_t path) const {
    std::vector<double> fine;
    fill_fine(path, fine);
    std::vector<double> w(d_, 0.0);
    for (std::size_t step = 0; step < finest_; ++step)
        for (std::size_t k = 0; k < d_; ++k) w[k] += fine[step * d_ + k];
    return w;
}

void BrownianGrid::validate_levels(const std::vector<std::size_t>& levels) const {
    std::size_t prev = 0;
    for (std::size_t steps : levels) {
        if (steps == 0 || steps > finest_ || finest_ % steps != 0)
            throw ConfigError("level step count must divide the finest count");
        const std::size_t factor = finest_ / steps;
        if ((factor & (factor - 1)) != 0)
            throw ConfigError("level refinement factors must be powers of two");
        if (prev != 0 && (steps <= prev || steps % prev != 0))
            throw ConfigError("levels must be strictly increasing and nested");
        prev = steps;
    }
}

}  // namespace jetsde
