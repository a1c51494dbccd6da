#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hazesep/grid.hpp"
#include "hazesep/imaging.hpp"

namespace hazesep::metrics {

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(range^2 / MSE); kPsnrIdentical when the images are equal.
double psnr(const RFGrid& test, const RFGrid& reference, double range);
/// Range is the reference's dynamic range.
double psnr(const imaging::BModeImage& test, const imaging::BModeImage& reference);

/// Boolean region of a frame with a label ("A" chamber, "B" wall).
class RoiMask {
public:
    RoiMask() = default;
    RoiMask(std::size_t rows, std::size_t cols, std::string label = {});

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    const std::string& label() const noexcept { return label_; }
    void set_label(std::string label) { label_ = std::move(label); }

    bool operator()(std::size_t r, std::size_t c) const noexcept { return bits_[r * cols_ + c] != 0; }
    void set(std::size_t r, std::size_t c, bool inside = true) noexcept { bits_[r * cols_ + c] = inside; }
    std::size_t count() const noexcept;

    /// Values of `frame` inside the mask, row-major.
    std::vector<double> values(const RFGrid& frame) const;

    friend bool operator==(const RoiMask&, const RoiMask&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::string label_;
    std::vector<std::uint8_t> bits_;
};

double intersection_over_union(const RoiMask& a, const RoiMask& b);

/// 1 - sum_bins min(pA, pB) with both histograms over the joint [min, max].
double gcnr(std::span<const double> a, std::span<const double> b, std::size_t bins = 256);
double gcnr(const RFGrid& frame, const RoiMask& a, const RoiMask& b, std::size_t bins = 256);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::span<const double> a, std::span<const double> b);

/// Lateral FWHM (pixels) of the main lobe of the mean-subtracted 2-D
/// autocorrelation over the ROI bounding box; pixels outside the ROI take the
/// ROI mean. Needs a bounding box of at least 4 rows by 16 columns.
double fwhm_lateral(const RFGrid& frame, const RoiMask& roi);

struct Point {
    double row = 0.0;
    double col = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};
using Polygon = std::vector<Point>;

/// Outer boundary of the largest connected region, traced along pixel edges
/// (pixel (r, c) spans [r, r+1] x [c, c+1]). Collinear vertices are dropped.
Polygon trace_contour(const RoiMask& mask);
/// Douglas-Peucker simplification of a closed polygon.
Polygon simplify(const Polygon& poly, double tolerance);
/// n vertices evenly spaced by arc length along the closed polygon.
Polygon resample(const Polygon& poly, std::size_t n);
/// Pixels whose centers fall inside the polygon (even-odd rule).
RoiMask rasterize(const Polygon& poly, std::size_t rows, std::size_t cols, std::string label = {});

struct KeyMask {
    double index = 0.0;
    RoiMask mask;
};
struct KeyPolygon {
    double index = 0.0;
    Polygon polygon;
};

/// Linear vertex interpolation between the key polygons bracketing target.
/// The denser polygon is resampled to the sparser one's vertex count and the
/// cyclic correspondence minimizing squared vertex distance is used.
/// Throws std::invalid_argument when target is not bracketed.
Polygon interpolate_polygon(const std::vector<KeyPolygon>& keys, double target);
RoiMask roi_interpolate(const std::vector<KeyMask>& keys, double target, double tolerance = 1.0);

/// Nonzero pixels are inside.
RoiMask read_mask_png(const std::filesystem::path& path, std::string label = {});
void write_mask_png(const RoiMask& mask, const std::filesystem::path& path);

/// {"label", "rows", "cols", "keys": [{"frame", "vertices": [[row, col], ...]}]}
struct PolygonFile {
    std::string label;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<KeyPolygon> keys;
};
PolygonFile read_polygon_json(const std::filesystem::path& path);
void write_polygon_json(const PolygonFile& file, const std::filesystem::path& path);
/// Mask for frame `index`, interpolating between key frames when needed.
RoiMask polygon_mask(const PolygonFile& file, double index);

}  // namespace hazesep::metrics
