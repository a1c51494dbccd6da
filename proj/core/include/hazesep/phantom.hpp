#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazesep/grid.hpp"
#include "hazesep/patchwork.hpp"
#include "hazesep/rng.hpp"

namespace hazesep::phantom {

/// Synthetic tissue frame. Geometry is given as fractions of the frame so one
/// spec serves any frame size; all other lengths are in samples.
struct PhantomSpec {
    std::size_t rows = 128;
    std::size_t cols = 64;
    double pulse_frequency = 0.25;  // cycles per axial sample
    double pulse_bandwidth = 1.5;   // std of the Gaussian pulse envelope
    double lateral_psf = 1.0;       // std of the Gaussian lateral PSF
    double scatterer_density = 0.5;

    // Anechoic ellipse ("ventricle"), gain 0.
    double ellipse_center_row = 0.40;
    double ellipse_center_col = 0.50;
    double ellipse_semi_rows = 0.17;
    double ellipse_semi_cols = 0.22;
    // Hyperechoic band ("wall") over rows [wall_begin, wall_end).
    double wall_begin = 0.70;
    double wall_end = 0.84;
    double wall_gain = 2.5;

    void validate() const;
    bool in_ellipse(std::size_t r, std::size_t c) const noexcept;
    bool in_wall(std::size_t r) const noexcept;
};

struct HazeSpec {
    double lateral_correlation = 6.0;  // samples
    double axial_correlation = 3.0;    // samples, of the band-pass envelope
    double depth_decay = 50.0;         // rows; weighting exp(-row / depth_decay)
    double pulse_frequency = 0.25;     // band-pass center

    void validate() const;
};

/// Regional amplitude gain of the tissue scatterers.
RFGrid gain_map(const PhantomSpec& spec);

/// Scatterers times gain, convolved axially with a Gaussian-windowed tone and
/// laterally with a Gaussian PSF, normalized to max |x| = 1.
RFGrid gen_tissue(const PhantomSpec& spec, SeededRng& rng);

/// Filtered Gaussian noise with Gaussian autocorrelation laterally, band-pass
/// around the pulse frequency axially, weighted by exp(-row / depth_decay),
/// normalized to max |h| = 1.
RFGrid gen_haze(const HazeSpec& spec, SeededRng& rng, std::size_t rows, std::size_t cols);

/// y = x + level h
RFGrid mix(const RFGrid& x, const RFGrid& h, double level);

struct Frame {
    RFGrid tissue;
    RFGrid haze;
};

struct Dataset {
    std::vector<RFGrid> tissue_patches;  // companded
    std::vector<RFGrid> haze_patches;    // companded
    std::vector<Frame> frames;           // unit-normalized, not companded
};

/// Frame i is generated from rng child 2i (tissue) and 2i + 1 (haze). Tissue
/// patches follow the patch plan; the same number of haze patches per frame
/// is drawn with row origins weighted by the haze energy in the window.
Dataset make_dataset(const PhantomSpec& phantom, const HazeSpec& haze, std::size_t n_frames,
                     const patch::PatchLayout& layout, double mu, const SeededRng& rng,
                     std::size_t threads = 1);

/// Patches of equal shape stacked vertically into one grid.
RFGrid stack_patches(const std::vector<RFGrid>& patches);
std::vector<RFGrid> unstack_patches(const RFGrid& stacked, std::size_t patch_rows);

nlohmann::json to_json(const PhantomSpec& spec);
nlohmann::json to_json(const HazeSpec& spec);

}  // namespace hazesep::phantom
