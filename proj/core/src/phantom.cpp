#include "hazesep/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hazesep/compand.hpp"
#include "hazesep/errors.hpp"
#include "hazesep/fft.hpp"
#include "hazesep/parallel.hpp"

namespace hazesep::phantom {

namespace {

std::vector<double> pulse_kernel(double frequency, double bandwidth) {
    const auto radius = static_cast<long>(std::ceil(4.0 * bandwidth));
    std::vector<double> k;
    for (long i = -radius; i <= radius; ++i) {
        const auto d = static_cast<double>(i);
        k.push_back(std::cos(2.0 * std::numbers::pi * frequency * d) *
                    std::exp(-d * d / (2.0 * bandwidth * bandwidth)));
    }
    return k;
}

std::vector<double> gaussian_kernel(double sd) {
    const auto radius = static_cast<long>(std::ceil(4.0 * sd));
    std::vector<double> k;
    for (long i = -radius; i <= radius; ++i) {
        const auto d = static_cast<double>(i);
        k.push_back(std::exp(-d * d / (2.0 * sd * sd)));
    }
    return k;
}

// Zero-boundary "same" convolution along one axis.
RFGrid convolve_axis(const RFGrid& in, const std::vector<double>& k, bool axial) {
    RFGrid out(in.rows(), in.cols());
    const auto half = static_cast<long>(k.size() / 2);
    const auto rows = static_cast<long>(in.rows());
    const auto cols = static_cast<long>(in.cols());
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (long j = -half; j <= half; ++j) {
                const long rr = axial ? r - j : r;
                const long cc = axial ? c : c - j;
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                acc += k[static_cast<std::size_t>(j + half)] * in(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
            }
            out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
        }
    }
    return out;
}

RFGrid unit_max(RFGrid g) {
    const double m = grid_max_abs(g);
    if (m == 0.0) return g;
    for (double& v : g.values()) v /= m;
    return g;
}

std::size_t pick_weighted(const std::vector<double>& cumulative, SeededRng& rng) {
    const double target = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

void PhantomSpec::validate() const {
    if (rows == 0 || cols == 0) throw ConfigError("phantom: frame dimensions must be positive");
    if (!(pulse_frequency > 0.0 && pulse_frequency < 0.5)) {
        throw ConfigError("phantom: pulse frequency must lie in (0, 0.5) cycles per sample");
    }
    if (!(pulse_bandwidth > 0.0) || !(lateral_psf > 0.0)) {
        throw ConfigError("phantom: pulse bandwidth and lateral PSF width must be positive");
    }
    if (!(scatterer_density >= 0.0 && scatterer_density <= 1.0)) {
        throw ConfigError("phantom: scatterer density must lie in [0, 1]");
    }
    if (!(wall_gain > 1.0)) throw ConfigError("phantom: wall gain must exceed 1");
    if (!(wall_begin >= 0.0 && wall_begin <= wall_end && wall_end <= 1.0)) {
        throw ConfigError("phantom: wall band must satisfy 0 <= begin <= end <= 1");
    }
    if (!(ellipse_semi_rows >= 0.0) || !(ellipse_semi_cols >= 0.0)) {
        throw ConfigError("phantom: ellipse semi-axes must be non-negative");
    }
}

bool PhantomSpec::in_ellipse(std::size_t r, std::size_t c) const noexcept {
    if (ellipse_semi_rows <= 0.0 || ellipse_semi_cols <= 0.0) return false;
    const double dr = (static_cast<double>(r) - ellipse_center_row * static_cast<double>(rows)) /
                      (ellipse_semi_rows * static_cast<double>(rows));
    const double dc = (static_cast<double>(c) - ellipse_center_col * static_cast<double>(cols)) /
                      (ellipse_semi_cols * static_cast<double>(cols));
    return dr * dr + dc * dc <= 1.0;
}

bool PhantomSpec::in_wall(std::size_t r) const noexcept {
    const auto rr = static_cast<double>(r);
    const auto n = static_cast<double>(rows);
    return rr >= std::floor(wall_begin * n) && rr < std::floor(wall_end * n);
}

void HazeSpec::validate() const {
    if (!(lateral_correlation > 0.0) || !(axial_correlation > 0.0)) {
        throw ConfigError("haze: correlation lengths must be positive");
    }
    if (!(depth_decay > 0.0)) throw ConfigError("haze: depth decay must be positive");
    if (!(pulse_frequency > 0.0 && pulse_frequency < 0.5)) {
        throw ConfigError("haze: pulse frequency must lie in (0, 0.5) cycles per sample");
    }
}

RFGrid gain_map(const PhantomSpec& spec) {
    RFGrid g(spec.rows, spec.cols, 1.0);
    for (std::size_t r = 0; r < spec.rows; ++r) {
        for (std::size_t c = 0; c < spec.cols; ++c) {
            if (spec.in_wall(r)) g(r, c) = spec.wall_gain;
            if (spec.in_ellipse(r, c)) g(r, c) = 0.0;
        }
    }
    return g;
}

RFGrid gen_tissue(const PhantomSpec& spec, SeededRng& rng) {
    spec.validate();
    const RFGrid gain = gain_map(spec);
    RFGrid scatter(spec.rows, spec.cols);
    auto s = scatter.values();
    auto g = gain.values();
    for (std::size_t i = 0; i < s.size(); ++i) {
        // Both draws are always taken so the stream does not depend on the map.
        const double amp = rng.normal();
        const bool present = rng.bernoulli(spec.scatterer_density);
        s[i] = present ? amp * g[i] : 0.0;
    }
    const RFGrid axial = convolve_axis(scatter, pulse_kernel(spec.pulse_frequency, spec.pulse_bandwidth), true);
    return unit_max(convolve_axis(axial, gaussian_kernel(spec.lateral_psf), false));
}

RFGrid gen_haze(const HazeSpec& spec, SeededRng& rng, std::size_t rows, std::size_t cols) {
    spec.validate();
    if (rows == 0 || cols == 0) throw std::invalid_argument("gen_haze: empty frame");
    ComplexPlane plane(next_power_of_two(2 * rows), next_power_of_two(2 * cols));
    for (auto& v : plane.data) v = rng.normal();
    fft_2d_inplace(plane, false);
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double ll = spec.lateral_correlation;
    const double la = spec.axial_correlation;
    const double f0 = spec.pulse_frequency;
    for (std::size_t r = 0; r < plane.rows; ++r) {
        const double fa = bin_frequency(r, plane.rows);
        const double band = std::exp(-pi2 * la * la * (fa - f0) * (fa - f0)) +
                            std::exp(-pi2 * la * la * (fa + f0) * (fa + f0));
        for (std::size_t c = 0; c < plane.cols; ++c) {
            const double fl = bin_frequency(c, plane.cols);
            plane(r, c) *= band * std::exp(-pi2 * ll * ll * fl * fl);
        }
    }
    fft_2d_inplace(plane, true);
    RFGrid h(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const double w = std::exp(-static_cast<double>(r) / spec.depth_decay);
        for (std::size_t c = 0; c < cols; ++c) h(r, c) = plane(r, c).real() * w;
    }
    return unit_max(std::move(h));
}

RFGrid mix(const RFGrid& x, const RFGrid& h, double level) {
    require_same_shape(x, h, "mix");
    if (!(level >= 0.0)) throw std::invalid_argument("mix: level must be non-negative");
    return grid_axpy(x, level, h);
}

Dataset make_dataset(const PhantomSpec& phantom, const HazeSpec& haze, std::size_t n_frames,
                     const patch::PatchLayout& layout, double mu, const SeededRng& rng,
                     std::size_t threads) {
    if (n_frames == 0) throw std::invalid_argument("make_dataset: need at least one frame");
    phantom.validate();
    haze.validate();
    const compand::CompandParams cp{mu};
    cp.validate();
    const patch::PatchPlan plan = patch::plan(phantom.rows, phantom.cols, layout);
    const std::size_t pr = plan.patch_rows;
    const std::size_t pc = plan.patch_cols;

    struct PerFrame {
        Frame frame;
        std::vector<RFGrid> tissue, haze;
    };
    std::vector<PerFrame> work(n_frames);
    parallel_for(n_frames, threads, [&](std::size_t i) {
        SeededRng tissue_rng = rng.child(2 * i);
        SeededRng haze_rng = rng.child(2 * i + 1);
        PerFrame& out = work[i];
        out.frame.tissue = gen_tissue(phantom, tissue_rng);
        out.frame.haze = gen_haze(haze, haze_rng, phantom.rows, phantom.cols);
        out.tissue = patch::extract_all(compand::encode(out.frame.tissue, cp).grid, plan);

        const RFGrid hc = compand::encode(out.frame.haze, cp).grid;
        std::vector<double> row_energy(phantom.rows, 0.0);
        for (std::size_t r = 0; r < phantom.rows; ++r)
            for (double v : out.frame.haze.row(r)) row_energy[r] += v * v;
        std::vector<double> cumulative;
        double window = 0.0;
        for (std::size_t r = 0; r < pr; ++r) window += row_energy[r];
        for (std::size_t r0 = 0; r0 + pr <= phantom.rows; ++r0) {
            if (r0 > 0) window += row_energy[r0 + pr - 1] - row_energy[r0 - 1];
            cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + std::max(window, 0.0));
        }
        for (std::size_t k = 0; k < plan.count(); ++k) {
            const std::size_t r0 = cumulative.back() > 0.0 ? pick_weighted(cumulative, haze_rng) : 0;
            const std::size_t c0 = haze_rng.below(phantom.cols - pc + 1);
            out.haze.push_back(patch::extract(hc, {r0, c0}, pr, pc));
        }
    });

    Dataset d;
    for (auto& w : work) {
        d.frames.push_back(std::move(w.frame));
        for (auto& p : w.tissue) d.tissue_patches.push_back(std::move(p));
        for (auto& p : w.haze) d.haze_patches.push_back(std::move(p));
    }
    return d;
}

RFGrid stack_patches(const std::vector<RFGrid>& patches) {
    if (patches.empty()) throw std::invalid_argument("stack_patches: no patches");
    const std::size_t pr = patches.front().rows();
    const std::size_t pc = patches.front().cols();
    RFGrid out(pr * patches.size(), pc);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        if (patches[i].rows() != pr || patches[i].cols() != pc) {
            throw std::invalid_argument("stack_patches: patch " + std::to_string(i) + " has shape " +
                                        patches[i].shape_string());
        }
        patch::write_back(out, patches[i], {i * pr, 0});
    }
    return out;
}

std::vector<RFGrid> unstack_patches(const RFGrid& stacked, std::size_t patch_rows) {
    if (patch_rows == 0 || stacked.rows() % patch_rows != 0) {
        throw IoError("patch stack of " + stacked.shape_string() +
                      " does not divide into patches of " + std::to_string(patch_rows) + " rows");
    }
    std::vector<RFGrid> out;
    for (std::size_t r = 0; r < stacked.rows(); r += patch_rows) {
        out.push_back(patch::extract(stacked, {r, 0}, patch_rows, stacked.cols()));
    }
    return out;
}

nlohmann::json to_json(const PhantomSpec& s) {
    return {{"rows", s.rows},
            {"cols", s.cols},
            {"pulse_frequency", s.pulse_frequency},
            {"pulse_bandwidth", s.pulse_bandwidth},
            {"lateral_psf", s.lateral_psf},
            {"scatterer_density", s.scatterer_density},
            {"ellipse_center_row", s.ellipse_center_row},
            {"ellipse_center_col", s.ellipse_center_col},
            {"ellipse_semi_rows", s.ellipse_semi_rows},
            {"ellipse_semi_cols", s.ellipse_semi_cols},
            {"wall_begin", s.wall_begin},
            {"wall_end", s.wall_end},
            {"wall_gain", s.wall_gain}};
}

nlohmann::json to_json(const HazeSpec& s) {
    return {{"lateral_correlation", s.lateral_correlation},
            {"axial_correlation", s.axial_correlation},
            {"depth_decay", s.depth_decay},
            {"pulse_frequency", s.pulse_frequency}};
}

}  // namespace hazesep::phantom
