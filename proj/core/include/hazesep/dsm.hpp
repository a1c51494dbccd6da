#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hazesep/rng.hpp"
#include "hazesep/score_net.hpp"

namespace hazesep::dsm {

inline constexpr double kDefaultTMin = 0.01;

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Denoising score matching with weighting w(t) = beta(t):
///   loss = mean_i mean_pixels beta(t_i) (s(x0_i + std z_i, t_i) + z_i / std)^2
/// which for the network equals mean (raw + z)^2. t_i ~ U[t_min, 1].
LossAndGrad dsm_loss_and_grad(const TrainableScoreNet& net, std::span<const RFGrid> batch,
                              const sde::SdeSchedule& s, SeededRng& rng,
                              double t_min = kDefaultTMin, std::size_t threads = 1);

/// Same objective with caller-supplied times and noise draws.
LossAndGrad dsm_loss_and_grad(const TrainableScoreNet& net, std::span<const RFGrid> batch,
                              std::span<const double> times, std::span<const RFGrid> noise,
                              std::size_t threads = 1);

/// Objective value for any score model (no gradient).
double dsm_loss(const ScoreModel& model, std::span<const RFGrid> batch,
                std::span<const double> times, std::span<const RFGrid> noise,
                const sde::SdeSchedule& s);

/// Forces the random choices of augment(); unset fields are drawn.
struct AugmentOverride {
    std::optional<bool> flip;
    std::optional<double> offset;
};

/// Lateral flip with probability 1/2, brightness offset U(-0.1, 0.1), then
/// clipping to [-1, 1].
RFGrid augment(const RFGrid& patch, SeededRng& rng, const AugmentOverride& force = {});

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 8;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double t_min = kDefaultTMin;
    bool augment = true;
    /// Cosine decay of the learning rate to 0 over the run; off by default.
    bool cosine_decay = false;
    std::size_t threads = 1;

    void validate() const;
};

struct TrainResult {
    std::vector<double> loss_curve;  // one entry per optimizer step
    std::size_t steps = 0;
};

using TrainProgress = std::function<void(std::size_t step, std::size_t total, double loss)>;

/// Adam over shuffled mini-batches; epochs x ceil(n / batch_size) steps.
/// Throws NumericError if the loss becomes non-finite.
TrainResult train(TrainableScoreNet& net, std::span<const RFGrid> dataset, const TrainConfig& cfg,
                  SeededRng& rng, const TrainProgress& progress = {});

}  // namespace hazesep::dsm
