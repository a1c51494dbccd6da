#include "hazesep/dsm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hazesep/errors.hpp"
#include "hazesep/parallel.hpp"

namespace hazesep::dsm {

LossAndGrad dsm_loss_and_grad(const TrainableScoreNet& net, std::span<const RFGrid> batch,
                              std::span<const double> times, std::span<const RFGrid> noise,
                              std::size_t threads) {
    if (batch.empty()) throw std::invalid_argument("dsm_loss_and_grad: empty batch");
    if (times.size() != batch.size() || noise.size() != batch.size()) {
        throw std::invalid_argument("dsm_loss_and_grad: times/noise do not match the batch");
    }
    const std::size_t n = batch.size();
    const std::size_t np = net.parameters().size();
    std::vector<std::vector<double>> grads(n, std::vector<double>(np, 0.0));
    std::vector<double> sq(n, 0.0);
    parallel_for(n, threads, [&](std::size_t i) {
        const double sd = sde::kernel_std(net.schedule(), times[i]);
        RFGrid xt = grid_axpy(batch[i], sd, noise[i]);
        const double weight = 1.0 / (static_cast<double>(n) * static_cast<double>(xt.size()));
        sq[i] = net.accumulate_dsm_grad(xt, noise[i], times[i], weight, grads[i]) * weight;
    });
    // Reduce in index order so the result does not depend on the thread count.
    LossAndGrad out;
    out.grad.assign(np, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        out.loss += sq[i];
        for (std::size_t k = 0; k < np; ++k) out.grad[k] += grads[i][k];
    }
    return out;
}

LossAndGrad dsm_loss_and_grad(const TrainableScoreNet& net, std::span<const RFGrid> batch,
                              const sde::SdeSchedule& s, SeededRng& rng, double t_min,
                              std::size_t threads) {
    if (batch.empty()) throw std::invalid_argument("dsm_loss_and_grad: empty batch");
    std::vector<double> times(batch.size());
    std::vector<RFGrid> noise;
    noise.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        times[i] = rng.uniform(t_min, 1.0);
        noise.push_back(gaussian_grid(rng, batch[i].rows(), batch[i].cols()));
    }
    if (s.sigma != net.schedule().sigma) {
        throw std::invalid_argument("dsm_loss_and_grad: schedule differs from the network's");
    }
    return dsm_loss_and_grad(net, batch, times, noise, threads);
}

double dsm_loss(const ScoreModel& model, std::span<const RFGrid> batch,
                std::span<const double> times, std::span<const RFGrid> noise,
                const sde::SdeSchedule& s) {
    if (batch.empty()) throw std::invalid_argument("dsm_loss: empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double sd = sde::kernel_std(s, times[i]);
        const RFGrid xt = grid_axpy(batch[i], sd, noise[i]);
        const RFGrid score = model.evaluate(xt, times[i]);
        const RFGrid target = sde::dsm_target(batch[i], xt, times[i], s);
        total += s.beta(times[i]) * grid_sum_squares(grid_sub(score, target)) /
                 static_cast<double>(xt.size());
    }
    return total / static_cast<double>(batch.size());
}

RFGrid augment(const RFGrid& patch, SeededRng& rng, const AugmentOverride& force) {
    // Both draws are always consumed so overriding one does not shift the other.
    const bool drawn_flip = rng.bernoulli(0.5);
    const double drawn_offset = rng.uniform(-0.1, 0.1);
    const bool flip = force.flip.value_or(drawn_flip);
    const double offset = force.offset.value_or(drawn_offset);
    RFGrid out = flip ? flip_lateral(patch) : patch;
    for (double& v : out.values()) v = std::clamp(v + offset, -1.0, 1.0);
    return out;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("training: batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("training: learning_rate must be positive");
    if (!(t_min > 0.0 && t_min < 1.0)) throw ConfigError("training: t_min must lie in (0, 1)");
}

TrainResult train(TrainableScoreNet& net, std::span<const RFGrid> dataset, const TrainConfig& cfg,
                  SeededRng& rng, const TrainProgress& progress) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    auto& params = net.parameters();
    const std::size_t np = params.size();
    std::vector<double> m(np, 0.0), v(np, 0.0);
    const std::size_t per_epoch = (dataset.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total = cfg.epochs * per_epoch;

    TrainResult result;
    result.loss_curve.reserve(total);
    std::vector<std::size_t> order(dataset.size());
    double last_finite = std::nan("");
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        for (std::size_t b = 0; b < per_epoch; ++b) {
            const std::size_t begin = b * cfg.batch_size;
            const std::size_t end = std::min(dataset.size(), begin + cfg.batch_size);
            std::vector<RFGrid> batch;
            batch.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                const RFGrid& item = dataset[order[i]];
                batch.push_back(cfg.augment ? augment(item, rng) : item);
            }
            const LossAndGrad lg = dsm_loss_and_grad(net, batch, net.schedule(), rng, cfg.t_min,
                                                     cfg.threads);
            if (!std::isfinite(lg.loss)) {
                std::ostringstream msg;
                msg << "training diverged at step " << result.steps << "; last finite loss "
                    << last_finite;
                throw NumericError(msg.str());
            }
            last_finite = lg.loss;
            ++result.steps;
            const auto step = static_cast<double>(result.steps);
            double lr = cfg.learning_rate;
            if (cfg.cosine_decay) {
                lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * (step - 1.0) /
                                            static_cast<double>(total)));
            }
            const double c1 = 1.0 - std::pow(cfg.beta1, step);
            const double c2 = 1.0 - std::pow(cfg.beta2, step);
            for (std::size_t k = 0; k < np; ++k) {
                const double g = lg.grad[k];
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
                params[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.epsilon);
            }
            result.loss_curve.push_back(lg.loss);
            if (progress) progress(result.steps, total, lg.loss);
        }
    }
    return result;
}

}  // namespace hazesep::dsm
