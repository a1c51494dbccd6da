#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "hazesep/grid.hpp"

namespace hazesep {

/// Deterministic random stream: xoshiro256** (Blackman & Vigna, 2018) seeded
/// through SplitMix64. Output depends only on the seed, never on the platform.
///
/// Normal draws use the Box-Muller transform on pairs of uniforms; the second
/// value of each pair is cached. A generator is single-owner: parallel work
/// derives independent children with child().
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }
    double normal() noexcept;

    /// Independent generator for task `index`: seeded with seed XOR index.
    SeededRng child(std::uint64_t index) const { return SeededRng(seed_ ^ index); }

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> s_{};
    std::optional<double> cached_normal_;
};

/// SplitMix64 finalizer; used for seeding and for deriving sub-seeds.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Grid of i.i.d. standard normal draws; consumes generator state.
RFGrid gaussian_grid(SeededRng& rng, std::size_t rows, std::size_t cols);

}  // namespace hazesep
