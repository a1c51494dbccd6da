#pragma once

#include <cstddef>
#include <functional>

#include "hazesep/grid.hpp"
#include "hazesep/rng.hpp"

namespace hazesep::sde {

/// Variance-exploding schedule: drift f(t) = 0, diffusion g(t) = sigma^t,
/// kernel mean scale alpha(t) = 1, kernel variance
/// beta(t) = (sigma^{2t} - 1) / (2 ln sigma).
struct SdeSchedule {
    double sigma = 25.0;
    std::size_t steps = 200;  // T; the uniform grid is t_k = k / T
    double tau = 0.8;         // CCDF start time

    void validate() const;

    double dt() const noexcept { return 1.0 / static_cast<double>(steps); }
    double diffusion(double t) const noexcept;  // g(t)
    double beta(double t) const noexcept;
    /// Number of reverse steps taken from t = tau down to 0.
    std::size_t start_step() const noexcept;
    /// Time of grid index k.
    double time_at(std::size_t k) const noexcept { return static_cast<double>(k) * dt(); }
};

/// sqrt(beta(t)); throws std::invalid_argument for t outside [0, 1].
double kernel_std(const SdeSchedule& s, double t);

/// x0 + kernel_std(t) * z with fresh z ~ N(0, I).
RFGrid forward_perturb(const RFGrid& x0, double t, const SdeSchedule& s, SeededRng& rng);

/// x_t together with its diffusion time.
struct DiffusionState {
    RFGrid x;
    double t = 1.0;
};

/// One Euler-Maruyama step of the reverse-time SDE:
///   x <- x + g(t)^2 score dt + g(t) sqrt(dt) z,   t <- t - dt.
/// The step that lands on t = 0 skips the noise term. `noise` supplies z, which
/// lets tests inject deterministic draws.
DiffusionState reverse_step_with_noise(const DiffusionState& state, const RFGrid& score,
                                       const SdeSchedule& s, const RFGrid& noise);
DiffusionState reverse_step(const DiffusionState& state, const RFGrid& score,
                            const SdeSchedule& s, SeededRng& rng);
/// True when a step from t lands on the final time 0.
bool is_final_step(double t, const SdeSchedule& s) noexcept;

/// Score of the Gaussian perturbation kernel at xt: -(xt - x0) / beta(t).
/// Throws std::invalid_argument for t <= 0.
RFGrid dsm_target(const RFGrid& x0, const RFGrid& xt, double t, const SdeSchedule& s);

using ScoreFn = std::function<RFGrid(const RFGrid&, double)>;

/// Unconditional reverse sampling from pure noise at t = 1 down to 0.
RFGrid sample_unconditional(const ScoreFn& score, std::size_t rows, std::size_t cols,
                            const SdeSchedule& s, SeededRng& rng);

}  // namespace hazesep::sde
