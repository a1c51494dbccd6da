#include "hazesep/dehazer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hazesep/errors.hpp"
#include "hazesep/parallel.hpp"

namespace hazesep::dehaze {

namespace {

using compand::decode_deriv_value;
using compand::decode_value;
using compand::encode_deriv_value;
using compand::encode_value;

std::size_t count_out_of_range(const RFGrid& g) {
    return static_cast<std::size_t>(
        std::count_if(g.values().begin(), g.values().end(), [](double v) { return std::abs(v) > 1.0; }));
}

RFGrid perturbed_measurement(const RFGrid& y, double t, const RFGrid& z, const sde::SdeSchedule& s) {
    return grid_axpy(y, sde::kernel_std(s, std::max(t, 0.0)), z);
}

}  // namespace

void DehazeConfig::validate() const {
    if (!(lambda_x >= 0.0) || !(kappa_h >= 0.0) || !(gamma >= 0.0)) {
        throw ConfigError("dehaze: lambda, kappa and gamma must be non-negative");
    }
    if (!(dc_trust >= 0.0)) throw ConfigError("dehaze: dc_trust must be non-negative");
    try {
        compand.validate();
        schedule.validate();
        patch.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (schedule.start_step() == 0) throw ConfigError("dehaze: tau * T rounds to zero steps");
}

JointState ccdf_init(const RFGrid& y, const DehazeConfig& cfg, SeededRng& rng) {
    const double t = cfg.schedule.time_at(cfg.schedule.start_step());
    const double sd = sde::kernel_std(cfg.schedule, t);
    JointState s{grid_axpy(y, sd, gaussian_grid(rng, y.rows(), y.cols())), RFGrid{}, t};
    s.h = cfg.independent_init ? grid_axpy(y, sd, gaussian_grid(rng, y.rows(), y.cols())) : s.x;
    return s;
}

Residual dc_residual(const RFGrid& y_hat, const RFGrid& x, const RFGrid& h,
                     const DehazeConfig& cfg) {
    require_same_shape(y_hat, x, "dc_residual(x)");
    require_same_shape(y_hat, h, "dc_residual(h)");
    const double mu = cfg.compand.mu;
    Residual out{y_hat, 0.0};
    auto r = out.residual.values();
    auto xv = x.values();
    auto hv = h.values();
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double u = decode_value(xv[i], mu) + cfg.gamma * decode_value(hv[i], mu);
        r[i] -= encode_value(u, mu);
        out.sq_norm += r[i] * r[i];
    }
    return out;
}

DcGradients dc_gradients(const RFGrid& y_hat, const RFGrid& x, const RFGrid& h,
                         const DehazeConfig& cfg) {
    require_same_shape(y_hat, x, "dc_gradients(x)");
    require_same_shape(y_hat, h, "dc_gradients(h)");
    const double mu = cfg.compand.mu;
    DcGradients g{RFGrid(x.rows(), x.cols(), 0.0, x.axial_spacing(), x.lateral_spacing()),
                  RFGrid(x.rows(), x.cols(), 0.0, x.axial_spacing(), x.lateral_spacing())};
    auto gx = g.grad_x.values();
    auto gh = g.grad_h.values();
    auto yv = y_hat.values();
    auto xv = x.values();
    auto hv = h.values();
    for (std::size_t i = 0; i < gx.size(); ++i) {
        const double u = decode_value(xv[i], mu) + cfg.gamma * decode_value(hv[i], mu);
        const double r = yv[i] - encode_value(u, mu);
        const double outer = r * encode_deriv_value(u, mu);
        gx[i] = outer * decode_deriv_value(xv[i], mu);
        gh[i] = cfg.gamma == 0.0 ? 0.0 : cfg.gamma * outer * decode_deriv_value(hv[i], mu);
    }
    return g;
}

JointState dc_update(const JointState& state, const RFGrid& y_hat, const DehazeConfig& cfg) {
    const DcGradients g = dc_gradients(y_hat, state.x, state.h, cfg);
    const Residual res = dc_residual(y_hat, state.x, state.h, cfg);
    const double mu = cfg.compand.mu;
    JointState out = state;
    auto x = out.x.values();
    auto h = out.h.values();
    auto gx = g.grad_x.values();
    auto gh = g.grad_h.values();
    auto r = res.residual.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = cfg.lambda_x * gx[i];
        double dh = cfg.kappa_h * gh[i];
        if (cfg.dc_trust > 0.0) {
            // First-order change of the companded prediction; the joint step
            // is shrunk so it moves no further than dc_trust |r|.
            const double u = decode_value(x[i], mu) + cfg.gamma * decode_value(h[i], mu);
            const double moved = std::abs(encode_deriv_value(u, mu) *
                                          (decode_deriv_value(x[i], mu) * dx +
                                           cfg.gamma * decode_deriv_value(h[i], mu) * dh));
            const double bound = cfg.dc_trust * std::abs(r[i]);
            if (moved > bound) {
                dx *= bound / moved;
                dh *= bound / moved;
            }
        }
        x[i] += dx;
        h[i] += dh;
    }
    return out;
}

JointState joint_step_with_noise(const JointState& state, const RFGrid& y_hat,
                                 const ScoreModel& tissue, const ScoreModel& haze,
                                 const DehazeConfig& cfg, const RFGrid& noise_x,
                                 const RFGrid& noise_h) {
    if (!(state.t > 0.0)) throw std::invalid_argument("joint_step: t must be positive");
    const JointState dc = dc_update(state, y_hat, cfg);
    const auto nx = sde::reverse_step_with_noise({dc.x, dc.t}, tissue.evaluate(dc.x, dc.t),
                                                 cfg.schedule, noise_x);
    const auto nh = sde::reverse_step_with_noise({dc.h, dc.t}, haze.evaluate(dc.h, dc.t),
                                                 cfg.schedule, noise_h);
    if (!nx.x.all_finite() || !nh.x.all_finite()) {
        std::ostringstream msg;
        msg << "joint_step: non-finite iterate at t = " << state.t;
        throw NumericError(msg.str());
    }
    return {nx.x, nh.x, nx.t};
}

JointState joint_step(const JointState& state, const RFGrid& y_hat, const ScoreModel& tissue,
                      const ScoreModel& haze, const DehazeConfig& cfg, SeededRng& rng) {
    const std::size_t rows = state.x.rows(), cols = state.x.cols();
    if (sde::is_final_step(state.t, cfg.schedule)) {
        const RFGrid zero(rows, cols);
        return joint_step_with_noise(state, y_hat, tissue, haze, cfg, zero, zero);
    }
    const RFGrid zx = gaussian_grid(rng, rows, cols);
    const RFGrid zh = gaussian_grid(rng, rows, cols);
    return joint_step_with_noise(state, y_hat, tissue, haze, cfg, zx, zh);
}

JointState sample_joint(const RFGrid& y, const ScoreModel& tissue, const ScoreModel& haze,
                        const DehazeConfig& cfg, SeededRng& rng) {
    cfg.validate();
    const sde::SdeSchedule& s = cfg.schedule;
    JointState state = ccdf_init(y, cfg, rng);
    const RFGrid frozen = cfg.frozen_path ? gaussian_grid(rng, y.rows(), y.cols()) : RFGrid{};
    for (std::size_t k = s.start_step(); k > 0; --k) {
        const double t = s.time_at(k);
        const double t_meas = cfg.measurement_level == MeasurementLevel::current ? t : t - s.dt();
        const RFGrid z = cfg.frozen_path ? frozen : gaussian_grid(rng, y.rows(), y.cols());
        state.t = t;
        state = joint_step(state, perturbed_measurement(y, t_meas, z, s), tissue, haze, cfg, rng);
    }
    return state;
}

DehazeResult dehaze(const RFGrid& y_rf, const ScoreModel& tissue, const ScoreModel& haze,
                    const DehazeConfig& cfg, const StepObserver& observer) {
    cfg.validate();
    if (!y_rf.all_finite()) throw NumericError("dehaze: measurement contains non-finite samples");
    const compand::Normalized norm = compand::normalize_to_unit(y_rf);
    const RFGrid y = compand::encode(norm.grid, cfg.compand).grid;
    const patch::PatchPlan plan = patch::plan(y.rows(), y.cols(), cfg.patch);
    const sde::SdeSchedule& s = cfg.schedule;

    // Frame-level draws (initialization and measurement corruption) come from
    // child 0; patch i draws its chain noise from child i + 1.
    const SeededRng root(cfg.seed);
    SeededRng frame_rng = root.child(0);
    std::vector<SeededRng> patch_rng;
    for (std::size_t i = 0; i < plan.count(); ++i) patch_rng.push_back(root.child(i + 1));

    const JointState init = ccdf_init(y, cfg, frame_rng);
    std::vector<RFGrid> xs = patch::extract_all(init.x, plan);
    std::vector<RFGrid> hs = patch::extract_all(init.h, plan);
    const RFGrid frozen = cfg.frozen_path ? gaussian_grid(frame_rng, y.rows(), y.cols()) : RFGrid{};

    DehazeResult result;
    result.scale = norm.scale;
    std::vector<double> sq(plan.count());
    for (std::size_t k = s.start_step(); k > 0; --k) {
        const double t = s.time_at(k);
        const double t_meas = cfg.measurement_level == MeasurementLevel::current ? t : t - s.dt();
        const RFGrid z = cfg.frozen_path ? frozen : gaussian_grid(frame_rng, y.rows(), y.cols());
        const std::vector<RFGrid> y_hat = patch::extract_all(perturbed_measurement(y, t_meas, z, s), plan);

        parallel_for(plan.count(), cfg.threads, [&](std::size_t i) {
            sq[i] = dc_residual(y_hat[i], xs[i], hs[i], cfg).sq_norm;
            JointState next = joint_step({xs[i], hs[i], t}, y_hat[i], tissue, haze, cfg, patch_rng[i]);
            xs[i] = std::move(next.x);
            hs[i] = std::move(next.h);
        });
        patch::interleave(xs, plan);
        patch::interleave(hs, plan);

        StepDiagnostics d;
        d.step = s.start_step() - k + 1;
        d.t = t;
        for (std::size_t i = 0; i < plan.count(); ++i) {
            d.residual_sq_norm += sq[i];
            d.out_of_range_x += count_out_of_range(xs[i]);
            d.out_of_range_h += count_out_of_range(hs[i]);
        }
        result.diagnostics.push_back(d);
        if (observer) observer(StepView{d.step, t, plan, xs, hs});
    }

    const RFGrid x0 = patch::stitch(xs, plan);
    const RFGrid h0 = patch::stitch(hs, plan);
    result.x_rf = x0;
    result.h_rf = h0;
    auto xr = result.x_rf.values();
    auto hr = result.h_rf.values();
    for (std::size_t i = 0; i < xr.size(); ++i) {
        xr[i] = decode_value(xr[i], cfg.compand.mu) * norm.scale;
        hr[i] = cfg.gamma * decode_value(hr[i], cfg.compand.mu) * norm.scale;
    }
    result.x_rf.set_spacing(y_rf.axial_spacing(), y_rf.lateral_spacing());
    result.h_rf.set_spacing(y_rf.axial_spacing(), y_rf.lateral_spacing());
    if (!result.x_rf.all_finite() || !result.h_rf.all_finite()) {
        throw NumericError("dehaze: expansion of the final iterate overflowed");
    }
    return result;
}

void write_diagnostics_csv(const std::filesystem::path& path,
                           const std::vector<StepDiagnostics>& diagnostics) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "step,t,residual_sq_norm,out_of_range_x,out_of_range_h\n";
    out << std::setprecision(10);
    for (const auto& d : diagnostics) {
        out << d.step << ',' << d.t << ',' << d.residual_sq_norm << ',' << d.out_of_range_x << ','
            << d.out_of_range_h << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace hazesep::dehaze
