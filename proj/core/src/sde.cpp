#include "hazesep/sde.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hazesep::sde {

void SdeSchedule::validate() const {
    if (!(sigma > 1.0)) throw std::invalid_argument("sde: sigma must exceed 1");
    if (steps == 0) throw std::invalid_argument("sde: steps_T must be positive");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("sde: tau must lie in (0, 1]");
}

double SdeSchedule::diffusion(double t) const noexcept { return std::pow(sigma, t); }

double SdeSchedule::beta(double t) const noexcept {
    // expm1 keeps beta accurate for small t where sigma^{2t} - 1 cancels.
    return std::expm1(2.0 * t * std::log(sigma)) / (2.0 * std::log(sigma));
}

std::size_t SdeSchedule::start_step() const noexcept {
    return static_cast<std::size_t>(std::llround(tau * static_cast<double>(steps)));
}

double kernel_std(const SdeSchedule& s, double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("kernel_std: t must lie in [0, 1], got " + std::to_string(t));
    }
    return std::sqrt(s.beta(t));
}

RFGrid forward_perturb(const RFGrid& x0, double t, const SdeSchedule& s, SeededRng& rng) {
    const double sd = kernel_std(s, t);
    RFGrid out = x0;
    for (double& v : out.values()) v += sd * rng.normal();
    return out;
}

bool is_final_step(double t, const SdeSchedule& s) noexcept { return t - s.dt() < 0.5 * s.dt(); }

DiffusionState reverse_step_with_noise(const DiffusionState& state, const RFGrid& score,
                                       const SdeSchedule& s, const RFGrid& noise) {
    if (!(state.t > 0.0)) throw std::invalid_argument("reverse_step: t must be positive");
    require_same_shape(state.x, score, "reverse_step(score)");
    require_same_shape(state.x, noise, "reverse_step(noise)");
    const double dt = s.dt();
    const double g = s.diffusion(state.t);
    const double drift = g * g * dt;
    const bool final_step = is_final_step(state.t, s);
    const double noise_scale = final_step ? 0.0 : g * std::sqrt(dt);

    DiffusionState next{state.x, final_step ? 0.0 : state.t - dt};
    auto x = next.x.values();
    auto sc = score.values();
    auto z = noise.values();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += drift * sc[i] + noise_scale * z[i];
    return next;
}

DiffusionState reverse_step(const DiffusionState& state, const RFGrid& score,
                            const SdeSchedule& s, SeededRng& rng) {
    if (is_final_step(state.t, s)) {
        return reverse_step_with_noise(state, score, s,
                                       RFGrid(state.x.rows(), state.x.cols(), 0.0));
    }
    return reverse_step_with_noise(state, score, s,
                                   gaussian_grid(rng, state.x.rows(), state.x.cols()));
}

RFGrid dsm_target(const RFGrid& x0, const RFGrid& xt, double t, const SdeSchedule& s) {
    if (!(t > 0.0)) throw std::invalid_argument("dsm_target: undefined at t = 0");
    require_same_shape(x0, xt, "dsm_target");
    const double b = s.beta(t);
    RFGrid out = xt;
    auto o = out.values();
    auto a = x0.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = -(o[i] - a[i]) / b;
    return out;
}

RFGrid sample_unconditional(const ScoreFn& score, std::size_t rows, std::size_t cols,
                            const SdeSchedule& s, SeededRng& rng) {
    DiffusionState state{gaussian_grid(rng, rows, cols), 1.0};
    const double sd = kernel_std(s, 1.0);
    for (double& v : state.x.values()) v *= sd;
    for (std::size_t k = s.steps; k > 0; --k) {
        state.t = s.time_at(k);
        state = reverse_step(state, score(state.x, state.t), s, rng);
    }
    return state.x;
}

}  // namespace hazesep::sde
