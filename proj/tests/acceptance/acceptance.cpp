// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hazesep/commands.hpp"
#include "hazesep/compand.hpp"
#include "hazesep/config.hpp"
#include "hazesep/dehazer.hpp"
#include "hazesep/dsm.hpp"
#include "hazesep/imaging.hpp"
#include "hazesep/metrics.hpp"
#include "hazesep/patchwork.hpp"
#include "hazesep/phantom.hpp"
#include "hazesep/score.hpp"
#include "hazesep/score_net.hpp"
#include "hazesep/sde.hpp"
#include "hazesep/urf_io.hpp"

using namespace hazesep;
namespace fs = std::filesystem;
namespace cmd = hazesep::commands;
using nlohmann::json;

namespace {

// Pinned tolerances and budgets.
constexpr double kC1MaxError = 1e-6;
constexpr double kC1Budget = 1.0;
constexpr double kC2MaxRelError = 1e-4;
constexpr double kC2Budget = 30.0;
constexpr double kC3MeanBound = 0.07;
constexpr double kC3VarLo = 0.9, kC3VarHi = 1.1;
constexpr double kC3Budget = 120.0;
constexpr double kC4MaxMse = 0.05;
constexpr double kC4Budget = 300.0;
constexpr double kC5MaxRel = 0.05;
constexpr double kC5Budget = 300.0;
constexpr double kC6Budget = 120.0;
constexpr double kC7Budget = 1800.0;
constexpr std::size_t kMinFrames = 10;
constexpr double kC9MaxRatioError = 0.20;
constexpr double kC11GcnrTol = 0.02;
constexpr double kC11KsTol = 0.01;
constexpr double kC11FwhmTol = 0.20;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double rel_l2(const RFGrid& got, const RFGrid& want) {
    return std::sqrt(grid_sum_squares(grid_sub(got, want)) / grid_sum_squares(want));
}

// Settings of the synthetic study behind criteria 7-10 and 12 come from
// configs/study.json: 64 x 64 frames seen as one patch, priors with a depth
// input and 3 x 5 kernels.
const char* kStudyConfigPath = HAZESEP_STUDY_CONFIG;

constexpr std::uint64_t kEvalSeed = 2;
const std::vector<double> kLevels{0.1, 0.2, 0.3, 0.4, 0.5};

// ---------------------------------------------------------------- criteria

Outcome c1_companding() {
    SeededRng rng(101);
    double worst = 0.0;
    for (double mu : {50.0, 255.0, 1000.0}) {
        RFGrid x(1, 10000);
        for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
        const compand::CompandParams p{mu};
        const RFGrid back = compand::decode(compand::encode(x, p).grid, p).grid;
        worst = std::max(worst, max_abs_diff(back, x));
    }
    return {worst < kC1MaxError, "max |C^-1(C(x)) - x| = " + fmt("%.3g", worst) + " (< 1e-6)"};
}

double dc_fd_worst(SeededRng& rng) {
    double worst = 0.0;
    for (int instance = 0; instance < 20; ++instance) {
        dehaze::DehazeConfig cfg;
        cfg.gamma = rng.uniform(0.2, 1.5);
        cfg.compand.mu = instance % 2 == 0 ? 255.0 : 50.0;
        auto uni = [&] {
            RFGrid g(3, 4);
            for (double& v : g.values()) v = rng.uniform(-0.9, 0.9);
            return g;
        };
        const RFGrid y = uni();
        RFGrid x = uni(), h = uni();
        const auto g = dehaze::dc_gradients(y, x, h, cfg);
        auto objective = [&] { return -0.5 * dehaze::dc_residual(y, x, h, cfg).sq_norm; };
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (int which = 0; which < 2; ++which) {
                RFGrid& v = which == 0 ? x : h;
                const double orig = v.values()[i];
                const double step = 1e-6;
                v.values()[i] = orig + step;
                const double up = objective();
                v.values()[i] = orig - step;
                const double down = objective();
                v.values()[i] = orig;
                const double fd = (up - down) / (2 * step);
                const double an = (which == 0 ? g.grad_x : g.grad_h).values()[i];
                worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
            }
        }
    }
    return worst;
}

double dsm_fd_worst(SeededRng& rng) {
    const sde::SdeSchedule sched;
    double worst = 0.0;
    for (int instance = 0; instance < 20; ++instance) {
        NetArch a;
        a.patch_rows = 6;
        a.patch_cols = 5;
        a.channels = 3;
        a.layers = 3;
        a.kernel_cols = instance % 2 == 0 ? 3 : 5;
        a.depth_channel = instance % 3 == 0;
        a.conditioning = instance % 4 == 1 ? Conditioning::output_scale : Conditioning::preconditioned;
        TrainableScoreNet net(a, sched, 100 + static_cast<std::uint64_t>(instance));
        for (double& p : net.parameters()) p += 0.1 * rng.normal();
        std::vector<RFGrid> batch, noise;
        std::vector<double> times;
        for (int i = 0; i < 2; ++i) {
            batch.push_back(gaussian_grid(rng, 6, 5));
            noise.push_back(gaussian_grid(rng, 6, 5));
            times.push_back(rng.uniform(0.01, 1.0));
        }
        const auto lg = dsm::dsm_loss_and_grad(net, batch, times, noise);
        auto& p = net.parameters();
        for (int n = 0; n < 16; ++n) {
            const std::size_t k = rng.below(p.size());
            const double saved = p[k];
            const double step = 1e-5 * std::max(1.0, std::abs(saved));
            p[k] = saved + step;
            const double up = dsm::dsm_loss_and_grad(net, batch, times, noise).loss;
            p[k] = saved - step;
            const double down = dsm::dsm_loss_and_grad(net, batch, times, noise).loss;
            p[k] = saved;
            const double fd = (up - down) / (2 * step);
            worst = std::max(worst, std::abs(fd - lg.grad[k]) /
                                        std::max({std::abs(fd), std::abs(lg.grad[k]), 1e-7}));
        }
    }
    return worst;
}

Outcome c2_gradients() {
    SeededRng rng(202);
    const double dc = dc_fd_worst(rng);
    const double net = dsm_fd_worst(rng);
    return {dc < kC2MaxRelError && net < kC2MaxRelError,
            "worst relative error dc " + fmt("%.2g", dc) + ", dsm " + fmt("%.2g", net) + " (< 1e-4)"};
}

Outcome c3_sampler() {
    const sde::SdeSchedule s;
    SeededRng rng(303);
    const AnalyticGaussianScore prior(0.0, 1.0, s);
    const RFGrid x = sde::sample_unconditional(
        [&](const RFGrid& g, double t) { return prior.evaluate(g, t); }, 1, 2000, s, rng);
    double mean = 0.0;
    for (double v : x.values()) mean += v;
    mean /= 2000.0;
    double var = 0.0;
    for (double v : x.values()) var += (v - mean) * (v - mean);
    var /= 1999.0;
    const bool ok = std::abs(mean) <= kC3MeanBound && var >= kC3VarLo && var <= kC3VarHi;
    return {ok, "mean " + fmt("%.4f", mean) + " (|.| <= 0.07), variance " + fmt("%.4f", var) +
                    " (in [0.9, 1.1])"};
}

Outcome c4_dsm_oracle() {
    const sde::SdeSchedule s;
    SeededRng rng(404);
    dsm::TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-2;
    cfg.augment = false;
    cfg.cosine_decay = true;
    std::vector<RFGrid> data;
    for (int i = 0; i < 64; ++i) data.push_back(gaussian_grid(rng, 1, 128));
    TrainableScoreNet net(NetArch::mlp(32, 3, 1, 128), s, 1);
    dsm::train(net, data, cfg, rng);
    RFGrid ladder(1, 128);
    for (std::size_t i = 0; i < 128; ++i) ladder(0, i) = -2.0 + 4.0 * static_cast<double>(i) / 127.0;
    double worst = 0.0;
    std::string per_t;
    for (double t : {0.1, 0.5, 0.9}) {
        const RFGrid expect = analytic_gaussian_score(ladder, t, 0.0, 1.0, s);
        const double mse = grid_sum_squares(grid_sub(net.evaluate(ladder, t), expect)) / 128.0;
        worst = std::max(worst, mse);
        per_t += " t=" + fmt("%.1f", t) + ":" + fmt("%.4f", mse);
    }
    return {worst < kC4MaxMse, "MSE vs analytic score" + per_t + " (< 0.05)"};
}

Outcome c5_gaussian_oracle() {
    // Linear companding so the forward model is y = x + h. The frame is large
    // against the posterior spread (rms 6 vs std 0.87) so the Monte Carlo
    // error of a 64-run mean stays near 2%.
    dehaze::DehazeConfig cfg;
    cfg.compand.mu = 1e-6;
    const AnalyticGaussianScore tissue(0.0, 3.0, cfg.schedule);
    const AnalyticGaussianScore haze(0.0, 1.0, cfg.schedule);
    SeededRng yr(505);
    const RFGrid y = grid_scale(gaussian_grid(yr, 16, 16), 6.0);
    RFGrid mean_x(16, 16), mean_sum(16, 16);
    const int runs = 64;
    for (int run = 0; run < runs; ++run) {
        SeededRng rng(1000 + static_cast<std::uint64_t>(run));
        const auto st = dehaze::sample_joint(y, tissue, haze, cfg, rng);
        mean_x = grid_axpy(mean_x, 1.0 / runs, st.x);
        mean_sum = grid_axpy(mean_sum, 1.0 / runs, grid_add(st.x, st.h));
    }
    const double rx = rel_l2(mean_x, grid_scale(y, 0.75));
    const double ry = rel_l2(mean_sum, y);
    double xy = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        xy += mean_x.values()[i] * y.values()[i];
        yy += y.values()[i] * y.values()[i];
    }
    return {rx < kC5MaxRel && ry < kC5MaxRel,
            "mean x vs 0.75 y: " + fmt("%.3f", rx) + " (< 0.05, fitted slope " + fmt("%.3f", xy / yy) +
                "); mean x + h vs y: " + fmt("%.4f", ry) + " (< 0.05)"};
}

Outcome c6_interleave() {
    RunConfig cfg = config_from_json(json::parse(R"({"threads": 0})"));
    phantom::PhantomSpec ps;
    ps.rows = 256;
    ps.cols = 160;
    SeededRng rng(606);
    const RFGrid x = phantom::gen_tissue(ps, rng);
    const RFGrid h = phantom::gen_haze(cfg.haze, rng, 256, 160);
    const RFGrid y = phantom::mix(x, h, 0.3);

    const auto plan = patch::plan(256, 160, cfg.patch);
    NetArch a = cfg.network;
    const TrainableScoreNet tissue(a, cfg.schedule, 1), haze(a, cfg.schedule, 2);
    std::size_t steps = 0, bad_steps = 0;
    double worst = 0.0;
    dehaze::dehaze(y, tissue, haze, cfg.dehaze, [&](const dehaze::StepView& v) {
        ++steps;
        const double dx = patch::max_overlap_disagreement(v.x_patches, v.plan);
        const double dh = patch::max_overlap_disagreement(v.h_patches, v.plan);
        worst = std::max({worst, dx, dh});
        if (dx != 0.0 || dh != 0.0) ++bad_steps;
    });
    const std::size_t grid = plan.row_origins.size() * plan.col_origins.size();
    const bool ok = grid == 9 && steps == cfg.schedule.start_step() && bad_steps == 0;
    return {ok, std::to_string(plan.row_origins.size()) + "x" + std::to_string(plan.col_origins.size()) +
                    " patches, " + std::to_string(steps) + " steps, " + std::to_string(bad_steps) +
                    " with overlap mismatch (max " + fmt("%.3g", worst) + "), stitch ok"};
}

// ------------------------------------------------------ synthetic study

struct Study {
    RunConfig cfg;
    fs::path tissue_ckpt, haze_ckpt;
    double training_seconds = 0.0;
    bool trained_now = false;
};

Study prepare_priors(const fs::path& cache, std::ostream& log) {
    Study s;
    s.cfg = load_config(kStudyConfigPath);
    fs::create_directories(cache);
    s.tissue_ckpt = cache / "tissue.hsnet";
    s.haze_ckpt = cache / "haze.hsnet";
    const fs::path stamp = cache / "study_config.json";
    const std::string want = config_to_json(s.cfg).dump(2);
    std::string have;
    if (fs::exists(stamp)) {
        std::ifstream in(stamp);
        have.assign(std::istreambuf_iterator<char>(in), {});
    }
    if (have == want && fs::exists(s.tissue_ckpt) && fs::exists(s.haze_ckpt)) {
        log << "reusing trained priors in " << cache.string() << "\n";
        return s;
    }
    log << "training priors into " << cache.string() << " (one-time)\n";
    const auto t0 = Clock::now();
    cmd::cmd_synth(s.cfg, cache / "train_set");
    cmd::cmd_train(s.cfg, cache / "train_set", cmd::Prior::tissue, s.tissue_ckpt, &log);
    cmd::cmd_train(s.cfg, cache / "train_set", cmd::Prior::haze, s.haze_ckpt, &log);
    std::ofstream(stamp) << want;
    s.training_seconds = seconds_since(t0);
    s.trained_now = true;
    return s;
}

struct StudyMetrics {
    // mean over frames, keyed by level
    std::map<double, double> psnr_y, psnr_d, gcnr_y, gcnr_d, ks_y, ks_d, fwhm_x, fwhm_d;
    std::size_t frames = 0;
    double seconds = 0.0;
};

StudyMetrics run_study(const Study& s, const fs::path& work, std::ostream& log) {
    const auto t0 = Clock::now();
    RunConfig cfg = s.cfg;
    cfg.seed = kEvalSeed;
    cfg.synth.n_frames = kMinFrames;
    cfg.synth.levels = kLevels;
    cfg.sync();
    const fs::path ds = work / "eval_set";
    cmd::cmd_synth(cfg, ds);
    const json manifest = json::parse(std::ifstream(ds / "manifest.json"));

    std::vector<cmd::EvalPair> pairs;
    for (const auto& f : manifest.at("frames")) {
        const auto index = f.at("index").get<std::size_t>();
        for (const auto& m : f.at("mixed")) {
            cmd::EvalPair p;
            p.frame = index;
            p.level = m.at("level").get<double>();
            p.clean = f.at("clean").get<std::string>();
            p.measurement = m.at("file").get<std::string>();
            const std::string out = "dehazed/L" + fmt("%.1f", p.level) + "_" + std::to_string(index);
            RunConfig run = cfg;
            run.seed = 7000 + index;
            run.sync();
            cmd::cmd_dehaze(run, ds / p.measurement, s.tissue_ckpt, s.haze_ckpt, ds / out);
            p.dehazed = out + "/x_hat.urf";
            p.mask_a = "masks/A.png";
            p.mask_b = "masks/B.png";
            pairs.push_back(p);
        }
        log << "dehazed frame " << index << " at " << f.at("mixed").size() << " levels\n";
    }
    cmd::write_eval_manifest(ds / "pairs.json", pairs);
    const auto rows = cmd::cmd_eval(cfg, ds / "pairs.json", ds / "metrics.csv", &log);

    StudyMetrics m;
    m.frames = kMinFrames;
    for (const auto& r : rows) {
        if (r.frame != "mean") continue;
        const bool d = r.image == "dehazed";
        if (r.metric == "psnr") (d ? m.psnr_d : m.psnr_y)[r.level] = r.value;
        if (r.metric == "gcnr") (d ? m.gcnr_d : m.gcnr_y)[r.level] = r.value;
        if (r.metric == "ks") (d ? m.ks_d : m.ks_y)[r.level] = r.value;
        if (r.metric == "fwhm" && d) m.fwhm_d[r.level] = r.value;
    }
    // FWHM of the clean frames on the wall, same frames
    const auto mask_b = metrics::read_mask_png(ds / "masks/B.png");
    for (double level : kLevels) {
        double acc = 0.0;
        std::size_t n = 0;
        for (const auto& p : pairs) {
            if (p.level != level) continue;
            acc += metrics::fwhm_lateral(read_urf_file(ds / p.clean), mask_b);
            ++n;
        }
        m.fwhm_x[level] = acc / static_cast<double>(n);
    }
    m.seconds = seconds_since(t0);
    return m;
}

Outcome c7_trend(const Study& s, const StudyMetrics& m) {
    bool ok = m.frames >= kMinFrames;
    std::string d;
    for (double level : kLevels) {
        const bool p = m.psnr_d.at(level) > m.psnr_y.at(level);
        const bool g = m.gcnr_d.at(level) > m.gcnr_y.at(level);
        ok = ok && p && g;
        d += "\n        level " + fmt("%.1f", level) + ": PSNR " + fmt("%.2f", m.psnr_y.at(level)) +
             " -> " + fmt("%.2f", m.psnr_d.at(level)) + (p ? "" : " (not improved)") + ", gCNR " +
             fmt("%.3f", m.gcnr_y.at(level)) + " -> " + fmt("%.3f", m.gcnr_d.at(level)) +
             (g ? "" : " (not improved)");
    }
    const double total = m.seconds + s.training_seconds;
    ok = ok && total < kC7Budget;
    return {ok, std::to_string(m.frames) + " frames per level, evaluation " + fmt("%.0f", m.seconds) +
                    " s" + (s.trained_now ? " + training " + fmt("%.0f", s.training_seconds) + " s" : "") +
                    " (budget 1800 s)" + d};
}

Outcome c8_speckle(const StudyMetrics& m) {
    const double y = m.ks_y.at(0.3), d = m.ks_d.at(0.3);
    return {d < y, "wall KS vs clean at level 0.3: dehazed " + fmt("%.4f", d) + ", measurement " +
                       fmt("%.4f", y) + " (dehazed must be lower), " + std::to_string(m.frames) + " frames"};
}

Outcome c9_resolution(const StudyMetrics& m) {
    const double x = m.fwhm_x.at(0.3), d = m.fwhm_d.at(0.3);
    const double err = std::abs(d / x - 1.0);
    return {err < kC9MaxRatioError, "wall lateral FWHM at level 0.3: dehazed " + fmt("%.2f", d) +
                                        " px vs clean " + fmt("%.2f", x) + " px, off by " +
                                        fmt("%.1f", 100 * err) + "% (< 20%)"};
}

Outcome c10_gamma(const Study& s, const fs::path& work) {
    RunConfig cfg = s.cfg;
    cfg.seed = 11;
    cfg.sync();
    const fs::path y = work / "eval_set/frames/mixed_L0.300_0000.urf";
    std::vector<double> energy;
    std::string d;
    for (double g : {0.0, 0.5, 1.0}) {
        cfg.dehaze.gamma = g;
        const auto o = cmd::cmd_dehaze(cfg, y, s.tissue_ckpt, s.haze_ckpt, work / ("gamma_" + fmt("%.1f", g)));
        energy.push_back(grid_sum_squares(read_urf_file(o.h_hat)));
        d += (d.empty() ? "" : ", ") + ("gamma " + fmt("%.1f", g) + ": " + fmt("%.4g", energy.back()));
    }
    const bool ok = std::is_sorted(energy.begin(), energy.end());
    return {ok, "decoded haze energy " + d + " (non-decreasing)"};
}

Outcome c11_metric_units() {
    SeededRng rng(1111);
    std::vector<double> a(100000), b(100000);
    for (double& v : a) v = rng.uniform(0.0, 1.0);
    for (double& v : b) v = rng.uniform(0.5, 1.5);
    const double g = metrics::gcnr(a, b, 256);
    const double ks = metrics::ks_statistic(a, b);

    const RFGrid ref(32, 32, 3.0);
    const RFGrid test(32, 32, 4.0);  // MSE 1, range 10
    const double p = metrics::psnr(test, ref, 10.0);

    // Lateral Gaussian smoothing with std l / sqrt(2) gives a Gaussian
    // autocorrelation of std l, whose FWHM is 2.355 l.
    const double ell = 4.0;
    const RFGrid white = gaussian_grid(rng, 128, 128);
    const double sd = ell / std::sqrt(2.0);
    const int radius = static_cast<int>(std::ceil(4 * sd));
    RFGrid smooth(128, 128);
    for (std::size_t r = 0; r < 128; ++r) {
        for (std::size_t c = 0; c < 128; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const auto cc = static_cast<long>(c) + k;
                if (cc < 0 || cc >= 128) continue;
                acc += std::exp(-0.5 * k * k / (sd * sd)) * white(r, static_cast<std::size_t>(cc));
            }
            smooth(r, c) = acc;
        }
    }
    metrics::RoiMask all(128, 128);
    for (std::size_t r = 0; r < 128; ++r) {
        for (std::size_t c = 0; c < 128; ++c) all.set(r, c);
    }
    const double f = metrics::fwhm_lateral(smooth, all);
    const double want = 2.355 * ell;

    const bool ok = std::abs(g - 0.5) <= kC11GcnrTol && std::abs(ks - 0.5) <= kC11KsTol && p == 20.0 &&
                    std::abs(f / want - 1.0) <= kC11FwhmTol;
    return {ok, "gCNR " + fmt("%.4f", g) + " (0.5 +- 0.02), KS " + fmt("%.4f", ks) +
                    " (0.5 +- 0.01), PSNR " + fmt("%.17g", p) + " dB (20 exactly), FWHM " + fmt("%.2f", f) +
                    " (" + fmt("%.2f", want) + " +- 20%)"};
}

Outcome c12_determinism(const Study& s, const fs::path& work) {
    RunConfig cfg = s.cfg;
    cfg.seed = 12;
    cfg.sync();
    const fs::path y = work / "eval_set/frames/mixed_L0.300_0001.urf";
    const auto a = cmd::cmd_dehaze(cfg, y, s.tissue_ckpt, s.haze_ckpt, work / "det_a");
    const auto b = cmd::cmd_dehaze(cfg, y, s.tissue_ckpt, s.haze_ckpt, work / "det_b");
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    const bool x_same = slurp(a.x_hat) == slurp(b.x_hat);
    const bool h_same = slurp(a.h_hat) == slurp(b.h_hat);
    return {x_same && h_same, std::string("x_hat ") + (x_same ? "identical" : "DIFFERENT") + ", h_hat " +
                                  (h_same ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hazesep acceptance criteria"};
    fs::path cache = "acceptance_cache";
    fs::path work = fs::temp_directory_path() / "hazesep_acceptance";
    std::vector<int> only;
    app.add_option("--cache", cache, "directory holding the trained study priors");
    app.add_option("--work", work, "scratch directory");
    app.add_option("--only", only, "criterion numbers to run (default all)")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::set<int> selected(only.begin(), only.end());
    auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };
    std::ostringstream log;
    int failures = 0;
    auto report = [&](int n, const char* name, double budget, const std::function<Outcome()>& f) {
        if (!wanted(n)) return;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& ex) {
            o = {false, std::string("threw: ") + ex.what()};
        }
        const double secs = seconds_since(t0);
        if (budget > 0 && secs >= budget) {
            o.pass = false;
            o.detail += "; over the " + fmt("%.0f", budget) + " s budget";
        }
        if (!o.pass) ++failures;
        std::printf("%s C%-2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), secs);
        std::fflush(stdout);
    };

    report(1, "companding round trip", kC1Budget, c1_companding);
    report(2, "gradient correctness", kC2Budget, c2_gradients);
    report(3, "sampler consistency oracle", kC3Budget, c3_sampler);
    report(4, "DSM learning oracle", kC4Budget, c4_dsm_oracle);
    report(5, "joint posterior Gaussian oracle", kC5Budget, c5_gaussian_oracle);
    report(6, "patch interleave exactness", kC6Budget, c6_interleave);

    const bool need_study = wanted(7) || wanted(8) || wanted(9) || wanted(10) || wanted(12);
    if (need_study) {
        fs::remove_all(work);
        fs::create_directories(work);
        Study study;
        StudyMetrics m;
        std::string error;
        try {
            study = prepare_priors(cache, log);
            m = run_study(study, work, log);
        } catch (const std::exception& ex) {
            error = ex.what();
        }
        auto guarded = [&](const std::function<Outcome()>& f) {
            return [&, f]() -> Outcome {
                if (!error.empty()) return {false, "study failed: " + error};
                return f();
            };
        };
        // Criterion 7 carries its own budget check (training included when it ran here).
        report(7, "trend reproduction", 0, guarded([&] { return c7_trend(study, m); }));
        report(8, "speckle preservation proxy", 0, guarded([&] { return c8_speckle(m); }));
        report(9, "resolution preservation proxy", 0, guarded([&] { return c9_resolution(m); }));
        report(10, "gamma tunability", 0, guarded([&] { return c10_gamma(study, work); }));
        report(12, "determinism", 0, guarded([&] { return c12_determinism(study, work); }));
    }
    report(11, "metric unit tests", 0, c11_metric_units);

    if (std::getenv("HAZESEP_ACCEPTANCE_LOG")) std::cerr << log.str();
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
