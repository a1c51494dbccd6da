#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "hazesep/dehazer.hpp"
#include "hazesep/errors.hpp"
#include "hazesep/metrics.hpp"
#include "hazesep/score_net.hpp"

using namespace hazesep;
using hazesep::dehaze::DehazeConfig;
using hazesep::dehaze::DehazeResult;
using hazesep::dehaze::JointState;
using hazesep::dehaze::StepView;
using hazesep::dehaze::ccdf_init;
using hazesep::dehaze::dc_gradients;
using hazesep::dehaze::DcGradients;
using hazesep::dehaze::dc_residual;
using hazesep::dehaze::dc_update;
using hazesep::dehaze::joint_step_with_noise;
using hazesep::dehaze::sample_joint;
using hazesep::dehaze::write_diagnostics_csv;

namespace {

struct ZeroScore final : ScoreModel {
    RFGrid evaluate(const RFGrid& x, double) const override { return RFGrid(x.rows(), x.cols()); }
};

DehazeConfig linear_config() {
    DehazeConfig cfg;
    cfg.compand.mu = 1e-6;
    return cfg;
}

RFGrid uniform_grid(SeededRng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    RFGrid g(rows, cols);
    for (double& v : g.values()) v = rng.uniform(lo, hi);
    return g;
}

double neg_half_sq(const RFGrid& y, const RFGrid& x, const RFGrid& h, const DehazeConfig& cfg) {
    return -0.5 * dc_residual(y, x, h, cfg).sq_norm;
}

struct Means {
    RFGrid x, h;
};

Means posterior_means(const RFGrid& y, double a2, double b2, int runs) {
    const DehazeConfig cfg = linear_config();
    const AnalyticGaussianScore tissue(0.0, a2, cfg.schedule);
    const AnalyticGaussianScore haze(0.0, b2, cfg.schedule);
    Means m{RFGrid(y.rows(), y.cols()), RFGrid(y.rows(), y.cols())};
    for (int run = 0; run < runs; ++run) {
        SeededRng rng(1000 + static_cast<std::uint64_t>(run));
        const JointState s = sample_joint(y, tissue, haze, cfg, rng);
        m.x = grid_axpy(m.x, 1.0 / runs, s.x);
        m.h = grid_axpy(m.h, 1.0 / runs, s.h);
    }
    return m;
}

}  // namespace

TEST_CASE("config validation") {
    DehazeConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.gamma = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DehazeConfig{};
    cfg.compand.mu = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("ccdf initialization") {
    const DehazeConfig cfg;
    SeededRng rng(3);
    const RFGrid y(200, 200, 0.25);
    const JointState s = ccdf_init(y, cfg, rng);
    CHECK(s.t == doctest::Approx(0.8));
    CHECK(max_abs_diff(s.x, s.h) == 0.0);
    const RFGrid noise = grid_sub(s.x, y);
    const double sd = std::sqrt(grid_sum_squares(noise) / noise.size());
    CHECK(sd == doctest::Approx(sde::kernel_std(cfg.schedule, 0.8)).epsilon(0.01));

    DehazeConfig indep = cfg;
    indep.independent_init = true;
    const JointState s2 = ccdf_init(y, indep, rng);
    CHECK(max_abs_diff(s2.x, s2.h) > 0.0);
}

TEST_CASE("residual examples") {
    DehazeConfig cfg;
    SeededRng rng(4);
    const RFGrid y = uniform_grid(rng, 6, 5, -0.9, 0.9);
    CHECK(dc_residual(y, y, RFGrid(6, 5), cfg).sq_norm == doctest::Approx(0.0).epsilon(1e-24));

    const RFGrid x = uniform_grid(rng, 6, 5, -0.9, 0.9);
    const RFGrid h = uniform_grid(rng, 6, 5, -0.9, 0.9);
    cfg.gamma = 0.0;
    CHECK(max_abs_diff(dc_residual(y, x, h, cfg).residual, grid_sub(y, x)) < 1e-12);

    cfg.gamma = 1.0;
    const double mu = cfg.compand.mu;
    const RFGrid xs(1, 1, compand::encode_value(0.3, mu));
    const RFGrid hs(1, 1, compand::encode_value(0.2, mu));
    const RFGrid ys(1, 1, compand::encode_value(0.5, mu));
    CHECK(std::abs(dc_residual(ys, xs, hs, cfg).residual(0, 0)) < 1e-12);
}

TEST_CASE("gradients vanish at zero residual and without haze") {
    DehazeConfig cfg;
    SeededRng rng(8);
    const RFGrid x = uniform_grid(rng, 4, 4, -0.5, 0.5);
    const RFGrid h = uniform_grid(rng, 4, 4, -0.5, 0.5);
    const RFGrid y = grid_add(dc_residual(RFGrid(4, 4), x, h, cfg).residual, RFGrid(4, 4));
    const RFGrid consistent = grid_scale(y, -1.0);
    const DcGradients g = dc_gradients(consistent, x, h, cfg);
    CHECK(grid_max_abs(g.grad_x) < 1e-14);
    CHECK(grid_max_abs(g.grad_h) < 1e-14);

    cfg.gamma = 0.0;
    CHECK(grid_max_abs(dc_gradients(uniform_grid(rng, 4, 4, -1, 1), x, h, cfg).grad_h) == 0.0);
}

TEST_CASE("gradients match finite differences of the log-likelihood") {
    SeededRng rng(21);
    double worst = 0.0;
    for (int instance = 0; instance < 20; ++instance) {
        DehazeConfig cfg;
        cfg.gamma = rng.uniform(0.2, 1.5);
        cfg.compand.mu = instance % 2 == 0 ? 255.0 : 50.0;
        const RFGrid y = uniform_grid(rng, 3, 4, -0.9, 0.9);
        RFGrid x = uniform_grid(rng, 3, 4, -0.9, 0.9);
        RFGrid h = uniform_grid(rng, 3, 4, -0.9, 0.9);
        const DcGradients g = dc_gradients(y, x, h, cfg);
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (int which = 0; which < 2; ++which) {
                RFGrid& v = which == 0 ? x : h;
                const double orig = v.values()[i];
                const double step = 1e-6;
                v.values()[i] = orig + step;
                const double up = neg_half_sq(y, x, h, cfg);
                v.values()[i] = orig - step;
                const double down = neg_half_sq(y, x, h, cfg);
                v.values()[i] = orig;
                const double fd = (up - down) / (2 * step);
                const double an = (which == 0 ? g.grad_x : g.grad_h).values()[i];
                const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
                worst = std::max(worst, rel);
            }
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("joint step ordering and the likelihood-free limit") {
    const DehazeConfig cfg;
    const AnalyticGaussianScore tissue(0.1, 0.5, cfg.schedule);
    const AnalyticGaussianScore haze(-0.2, 0.3, cfg.schedule);
    SeededRng rng(6);
    const JointState s{uniform_grid(rng, 5, 5, -1, 1), uniform_grid(rng, 5, 5, -1, 1), 0.4};
    const RFGrid y = uniform_grid(rng, 5, 5, -1, 1);
    const RFGrid zx = gaussian_grid(rng, 5, 5);
    const RFGrid zh = gaussian_grid(rng, 5, 5);

    const JointState got = joint_step_with_noise(s, y, tissue, haze, cfg, zx, zh);
    const JointState dc = dc_update(s, y, cfg);
    const auto ex = sde::reverse_step_with_noise({dc.x, dc.t}, tissue.evaluate(dc.x, dc.t), cfg.schedule, zx);
    const auto eh = sde::reverse_step_with_noise({dc.h, dc.t}, haze.evaluate(dc.h, dc.t), cfg.schedule, zh);
    CHECK(max_abs_diff(got.x, ex.x) == 0.0);
    CHECK(max_abs_diff(got.h, eh.x) == 0.0);
    CHECK(got.t == doctest::Approx(0.395));

    DehazeConfig off = cfg;
    off.lambda_x = 0.0;
    off.kappa_h = 0.0;
    const JointState free = joint_step_with_noise(s, y, tissue, haze, off, zx, zh);
    const auto fx = sde::reverse_step_with_noise({s.x, s.t}, tissue.evaluate(s.x, s.t), cfg.schedule, zx);
    CHECK(max_abs_diff(free.x, fx.x) == 0.0);

    CHECK_THROWS(joint_step_with_noise({s.x, s.h, 0.0}, y, tissue, haze, cfg, zx, zh));
}

TEST_CASE("pure data-consistency flow decreases the residual") {
    const DehazeConfig cfg;
    const ZeroScore zero;
    SeededRng rng(9);
    const RFGrid y = uniform_grid(rng, 16, 16, -0.95, 0.95);
    JointState s{uniform_grid(rng, 16, 16, -1, 1), uniform_grid(rng, 16, 16, -1, 1), 0.5};
    const RFGrid none(16, 16);
    double prev = dc_residual(y, s.x, s.h, cfg).sq_norm;
    for (int k = 0; k < 50; ++k) {
        s = joint_step_with_noise(s, y, zero, zero, cfg, none, none);
        s.t = 0.5;
        const double cur = dc_residual(y, s.x, s.h, cfg).sq_norm;
        REQUIRE(cur < prev);
        prev = cur;
    }
}

TEST_CASE("Gaussian posterior with equal prior variances") {
    SeededRng rng(77);
    const RFGrid y = grid_scale(gaussian_grid(rng, 16, 16), 6.0);
    const Means m = posterior_means(y, 2.0, 2.0, 64);
    CHECK(relative_l2(m.x, grid_scale(y, 0.5)) < 0.05);
    CHECK(relative_l2(m.h, grid_scale(y, 0.5)) < 0.05);
    CHECK(relative_l2(grid_add(m.x, m.h), y) < 0.05);
}

TEST_CASE("zero haze collapses the posterior onto the measurement") {
    const DehazeConfig cfg = linear_config();
    const AnalyticGaussianScore tissue(0.0, 36.0, cfg.schedule);
    const AnalyticGaussianScore haze(0.0, 1e-4, cfg.schedule);
    SeededRng rng(13);
    const RFGrid y = grid_scale(gaussian_grid(rng, 16, 16), 6.0);
    const JointState s = sample_joint(y, tissue, haze, cfg, rng);
    CHECK(relative_l2(s.x, y) < 0.05);
}

TEST_CASE("dehaze is deterministic and independent of the thread count") {
    DehazeConfig cfg;
    cfg.patch.patch_rows = 16;
    cfg.patch.patch_cols = 12;
    cfg.seed = 99;
    const AnalyticGaussianScore tissue(0.0, 0.2, cfg.schedule);
    const AnalyticGaussianScore haze(0.0, 0.05, cfg.schedule);
    SeededRng rng(1);
    const RFGrid y = uniform_grid(rng, 40, 30, -3, 3);

    std::size_t steps_seen = 0;
    const DehazeResult a = dehaze::dehaze(y, tissue, haze, cfg, [&](const StepView& v) {
        ++steps_seen;
        CHECK(patch::max_overlap_disagreement(v.x_patches, v.plan) == 0.0);
        CHECK(patch::max_overlap_disagreement(v.h_patches, v.plan) == 0.0);
    });
    CHECK(steps_seen == 160);
    CHECK(a.diagnostics.size() == 160);
    CHECK(a.scale == doctest::Approx(grid_max_abs(y)));

    const DehazeResult b = dehaze::dehaze(y, tissue, haze, cfg);
    cfg.threads = 3;
    const DehazeResult c = dehaze::dehaze(y, tissue, haze, cfg);
    CHECK(max_abs_diff(a.x_rf, b.x_rf) == 0.0);
    CHECK(max_abs_diff(a.h_rf, b.h_rf) == 0.0);
    CHECK(max_abs_diff(a.x_rf, c.x_rf) == 0.0);
    CHECK(max_abs_diff(a.h_rf, c.h_rf) == 0.0);

    cfg.seed = 100;
    CHECK(max_abs_diff(a.x_rf, dehaze::dehaze(y, tissue, haze, cfg).x_rf) > 0.0);
}

TEST_CASE("stitched output shows no seam at patch boundaries") {
    DehazeConfig cfg;
    cfg.patch.patch_rows = 16;
    cfg.patch.patch_cols = 16;
    cfg.seed = 5;
    NetArch a;
    a.patch_rows = 16;
    a.patch_cols = 16;
    a.channels = 8;
    a.layers = 3;
    const TrainableScoreNet tissue(a, cfg.schedule, 1), haze(a, cfg.schedule, 2);
    // smooth input: a few long-wavelength cosines
    RFGrid y(64, 96);
    for (std::size_t r = 0; r < 64; ++r)
        for (std::size_t c = 0; c < 96; ++c)
            y(r, c) = std::cos(0.11 * static_cast<double>(r)) * std::cos(0.07 * static_cast<double>(c)) +
                      0.3 * std::sin(0.05 * static_cast<double>(r + c));
    const RFGrid x = dehaze::dehaze(y, tissue, haze, cfg).x_rf;

    const auto plan = patch::plan(64, 96, cfg.patch);
    std::vector<bool> boundary(96, false);  // boundary[c]: columns c-1, c lie in different patch sets
    for (std::size_t o : plan.col_origins) {
        if (o > 0) boundary[o] = true;
        if (o + 16 < 96) boundary[o + 16] = true;
    }
    std::vector<double> across, away;
    for (std::size_t r = 0; r < 64; ++r)
        for (std::size_t c = 1; c < 96; ++c) (boundary[c] ? across : away).push_back(x(r, c) - x(r, c - 1));
    REQUIRE(across.size() >= 512);
    CHECK(metrics::ks_statistic(across, away) < 0.1);
}

TEST_CASE("haze energy grows with gamma") {
    DehazeConfig cfg;
    cfg.patch.patch_rows = 16;
    cfg.patch.patch_cols = 16;
    const AnalyticGaussianScore tissue(0.0, 0.1, cfg.schedule);
    const AnalyticGaussianScore haze(0.0, 0.1, cfg.schedule);
    SeededRng rng(2);
    const RFGrid y = uniform_grid(rng, 16, 16, -1, 1);
    double prev = -1.0;
    for (double gamma : {0.0, 0.5, 1.0}) {
        cfg.gamma = gamma;
        const double energy = grid_sum_squares(dehaze::dehaze(y, tissue, haze, cfg).h_rf);
        CHECK(energy >= prev);
        prev = energy;
    }
}

TEST_CASE("dehaze rejects non-finite input and writes diagnostics") {
    DehazeConfig cfg;
    cfg.patch.patch_rows = 8;
    cfg.patch.patch_cols = 8;
    const ZeroScore zero;
    RFGrid y(8, 8, 0.5);
    y(2, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(dehaze::dehaze(y, zero, zero, cfg), NumericError);

    y(2, 2) = -0.5;
    const DehazeResult r = dehaze::dehaze(y, zero, zero, cfg);
    const auto path = std::filesystem::temp_directory_path() / "hazesep_diag_test.csv";
    write_diagnostics_csv(path, r.diagnostics);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,t,residual_sq_norm,out_of_range_x,out_of_range_h");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 160);
    std::filesystem::remove(path);
}
