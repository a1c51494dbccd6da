#pragma once

#include <vector>

#include "hazesep/grid.hpp"
#include "hazesep/sde.hpp"

namespace hazesep {

/// s(x_t, t): approximation of the gradient of log p(x_t).
class ScoreModel {
public:
    virtual ~ScoreModel() = default;
    /// Output has the shape of x. t must lie in (0, 1] for learned models.
    virtual RFGrid evaluate(const RFGrid& x, double t) const = 0;
};

/// Exact perturbed score of a Gaussian prior N(mean, variance I) under the
/// VE kernel: -(x - mean) / (variance + beta(t)).
class AnalyticGaussianScore final : public ScoreModel {
public:
    AnalyticGaussianScore(double mean, double variance, sde::SdeSchedule schedule);
    AnalyticGaussianScore(RFGrid mean, double variance, sde::SdeSchedule schedule);

    RFGrid evaluate(const RFGrid& x, double t) const override;

    double variance() const noexcept { return variance_; }

private:
    double scalar_mean_ = 0.0;
    RFGrid grid_mean_;
    bool has_grid_mean_ = false;
    double variance_;
    sde::SdeSchedule schedule_;
};

RFGrid analytic_gaussian_score(const RFGrid& x, double t, double mean, double variance,
                               const sde::SdeSchedule& s);

struct GmmComponent {
    double weight;
    double mean;
    double variance;
};

/// Elementwise mixture prior; the score of the beta(t)-convolved mixture is
/// evaluated with log-sum-exp responsibilities.
class AnalyticGmmScore final : public ScoreModel {
public:
    AnalyticGmmScore(std::vector<GmmComponent> components, sde::SdeSchedule schedule);

    RFGrid evaluate(const RFGrid& x, double t) const override;
    double score_value(double x, double t) const;
    double log_density(double x, double t) const;

    const std::vector<GmmComponent>& components() const noexcept { return components_; }

private:
    std::vector<GmmComponent> components_;
    sde::SdeSchedule schedule_;
};

RFGrid analytic_gmm_score(const RFGrid& x, double t, const std::vector<GmmComponent>& components,
                          const sde::SdeSchedule& s);

}  // namespace hazesep
