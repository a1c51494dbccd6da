#include "hazesep/score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hazesep {

namespace {

void check_variance(double v) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("analytic score: variance must be positive and finite");
    }
}

}  // namespace

AnalyticGaussianScore::AnalyticGaussianScore(double mean, double variance,
                                             sde::SdeSchedule schedule)
    : scalar_mean_(mean), variance_(variance), schedule_(schedule) {
    check_variance(variance);
}

AnalyticGaussianScore::AnalyticGaussianScore(RFGrid mean, double variance,
                                             sde::SdeSchedule schedule)
    : grid_mean_(std::move(mean)), has_grid_mean_(true), variance_(variance),
      schedule_(schedule) {
    check_variance(variance);
}

RFGrid AnalyticGaussianScore::evaluate(const RFGrid& x, double t) const {
    const double denom = variance_ + schedule_.beta(t);
    RFGrid out = x;
    auto o = out.values();
    if (has_grid_mean_) {
        require_same_shape(x, grid_mean_, "AnalyticGaussianScore");
        auto m = grid_mean_.values();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = -(o[i] - m[i]) / denom;
    } else {
        for (double& v : o) v = -(v - scalar_mean_) / denom;
    }
    return out;
}

RFGrid analytic_gaussian_score(const RFGrid& x, double t, double mean, double variance,
                               const sde::SdeSchedule& s) {
    return AnalyticGaussianScore(mean, variance, s).evaluate(x, t);
}

AnalyticGmmScore::AnalyticGmmScore(std::vector<GmmComponent> components,
                                   sde::SdeSchedule schedule)
    : components_(std::move(components)), schedule_(schedule) {
    if (components_.empty()) throw std::invalid_argument("AnalyticGmmScore: no components");
    double total = 0.0;
    for (const auto& c : components_) {
        if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
            throw std::invalid_argument("AnalyticGmmScore: weights must be positive");
        }
        check_variance(c.variance);
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("AnalyticGmmScore: weights must sum to 1");
    }
}

double AnalyticGmmScore::score_value(double x, double t) const {
    const double b = schedule_.beta(t);
    // Responsibilities via log-sum-exp so far tails do not underflow to 0/0.
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(components_.size());
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const auto& c = components_[i];
        const double v = c.variance + b;
        logs[i] = std::log(c.weight) - 0.5 * std::log(v) - 0.5 * (x - c.mean) * (x - c.mean) / v;
        max_log = std::max(max_log, logs[i]);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const auto& c = components_[i];
        const double w = std::exp(logs[i] - max_log);
        num += w * (-(x - c.mean) / (c.variance + b));
        den += w;
    }
    return num / den;
}

double AnalyticGmmScore::log_density(double x, double t) const {
    const double b = schedule_.beta(t);
    double p = 0.0;
    for (const auto& c : components_) {
        const double v = c.variance + b;
        p += c.weight * std::exp(-0.5 * (x - c.mean) * (x - c.mean) / v) /
             std::sqrt(2.0 * std::numbers::pi * v);
    }
    return std::log(p);
}

RFGrid AnalyticGmmScore::evaluate(const RFGrid& x, double t) const {
    RFGrid out = x;
    for (double& v : out.values()) v = score_value(v, t);
    return out;
}

RFGrid analytic_gmm_score(const RFGrid& x, double t, const std::vector<GmmComponent>& components,
                          const sde::SdeSchedule& s) {
    return AnalyticGmmScore(components, s).evaluate(x, t);
}

}  // namespace hazesep
