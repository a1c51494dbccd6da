#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "hazesep/compand.hpp"
#include "hazesep/patchwork.hpp"
#include "hazesep/rng.hpp"
#include "hazesep/score.hpp"
#include "hazesep/sde.hpp"

namespace hazesep::dehaze {

/// Noise level used for the per-step corrupted measurement y_hat.
enum class MeasurementLevel {
    current,  // y_hat ~ q(y_t | y) at the time of the step
    next,     // y_hat ~ q(y_{t - dt} | y), the level the step lands on
};

struct DehazeConfig {
    double lambda_x = 0.5;
    double kappa_h = 0.5;
    double gamma = 1.0;
    compand::CompandParams compand;
    sde::SdeSchedule schedule;
    patch::PatchLayout patch;
    std::uint64_t seed = 0;

    /// Draw h from its own noise instead of copying x at initialization.
    bool independent_init = false;
    /// Reuse one noise draw for every y_hat instead of a fresh one per step.
    bool frozen_path = false;
    MeasurementLevel measurement_level = MeasurementLevel::current;
    /// Per-sample bound on how far a data-consistency update may move the
    /// linearized prediction C(u), as a multiple of the local residual |r|.
    /// 0 disables the bound.
    double dc_trust = 1.0;
    std::size_t threads = 1;

    void validate() const;
};

struct JointState {
    RFGrid x;
    RFGrid h;
    double t = 0.0;
};

JointState ccdf_init(const RFGrid& y, const DehazeConfig& cfg, SeededRng& rng);

struct Residual {
    RFGrid residual;
    double sq_norm = 0.0;
};

/// r = y_hat - C(C^-1(x) + gamma C^-1(h)), with C evaluated on the whole real
/// line so iterates outside [-1, 1] stay differentiable.
Residual dc_residual(const RFGrid& y_hat, const RFGrid& x, const RFGrid& h,
                     const DehazeConfig& cfg);

struct DcGradients {
    RFGrid grad_x;
    RFGrid grad_h;
};

/// Gradients of log p(y_hat | x, h) = -||r||^2 / 2:
///   grad_x = r C'(u) (C^-1)'(x),  grad_h = gamma r C'(u) (C^-1)'(h).
/// An ascent step along them lowers the residual norm.
DcGradients dc_gradients(const RFGrid& y_hat, const RFGrid& x, const RFGrid& h,
                         const DehazeConfig& cfg);

/// Data-consistency update of one state: both gradients are taken at the
/// incoming (x, h), then x += lambda grad_x and h += kappa grad_h, the pair
/// scaled down per sample where it would overshoot by more than dc_trust |r|.
JointState dc_update(const JointState& state, const RFGrid& y_hat, const DehazeConfig& cfg);

/// One iteration: data consistency, then a reverse step of each chain with
/// its own score model and noise draw.
JointState joint_step(const JointState& state, const RFGrid& y_hat, const ScoreModel& tissue,
                      const ScoreModel& haze, const DehazeConfig& cfg, SeededRng& rng);
/// Same with caller-supplied noise for both chains.
JointState joint_step_with_noise(const JointState& state, const RFGrid& y_hat,
                                 const ScoreModel& tissue, const ScoreModel& haze,
                                 const DehazeConfig& cfg, const RFGrid& noise_x,
                                 const RFGrid& noise_h);

/// Joint sampling of a single grid already in the companded domain: CCDF
/// initialization, then tau*T joint steps with a freshly corrupted y_hat per
/// step (or the frozen draw when cfg.frozen_path is set). No patching.
JointState sample_joint(const RFGrid& y, const ScoreModel& tissue, const ScoreModel& haze,
                        const DehazeConfig& cfg, SeededRng& rng);

struct StepDiagnostics {
    std::size_t step = 0;
    double t = 0.0;
    double residual_sq_norm = 0.0;   // summed over patches, before the update
    std::size_t out_of_range_x = 0;  // samples with |x| > 1 after the step
    std::size_t out_of_range_h = 0;
};

struct DehazeResult {
    RFGrid x_rf;  // tissue estimate in measurement units
    RFGrid h_rf;  // haze contribution gamma * C^-1(h) in measurement units
    double scale = 1.0;
    std::vector<StepDiagnostics> diagnostics;
};

/// State of all patches right after the interleave of one step.
struct StepView {
    std::size_t step;
    double t;
    const patch::PatchPlan& plan;
    const std::vector<RFGrid>& x_patches;
    const std::vector<RFGrid>& h_patches;
};
using StepObserver = std::function<void(const StepView&)>;

/// Full pipeline: normalize by max |y_rf|, compand, split into patches,
/// tau*T joint steps with interleaving after each, stitch, expand.
DehazeResult dehaze(const RFGrid& y_rf, const ScoreModel& tissue, const ScoreModel& haze,
                    const DehazeConfig& cfg, const StepObserver& observer = {});

void write_diagnostics_csv(const std::filesystem::path& path,
                           const std::vector<StepDiagnostics>& diagnostics);

}  // namespace hazesep::dehaze
