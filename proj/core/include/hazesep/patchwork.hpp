#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hazesep/grid.hpp"

namespace hazesep::patch {

struct PatchLayout {
    std::size_t patch_rows = 128;
    std::size_t patch_cols = 64;
    double overlap_fraction = 0.10;
    /// Explicit overlaps in pixels; when unset, ceil(fraction * patch size).
    std::optional<std::size_t> overlap_rows_px;
    std::optional<std::size_t> overlap_cols_px;

    std::size_t overlap_rows() const;
    std::size_t overlap_cols() const;
    void validate() const;
};

struct Origin {
    std::size_t row = 0;
    std::size_t col = 0;
    friend bool operator==(const Origin&, const Origin&) = default;
};

/// N x M patch grid covering a frame; patches are indexed row-major.
struct PatchPlan {
    std::size_t frame_rows = 0;
    std::size_t frame_cols = 0;
    std::size_t patch_rows = 0;
    std::size_t patch_cols = 0;
    std::vector<std::size_t> row_origins;
    std::vector<std::size_t> col_origins;

    std::size_t count() const noexcept { return row_origins.size() * col_origins.size(); }
    std::size_t grid_rows() const noexcept { return row_origins.size(); }
    std::size_t grid_cols() const noexcept { return col_origins.size(); }
    Origin origin(std::size_t index) const;
    std::size_t index(std::size_t n, std::size_t m) const noexcept { return n * col_origins.size() + m; }
};

/// Origins along one axis at stride (patch - overlap), the last one clamped
/// flush with the frame edge.
std::vector<std::size_t> axis_origins(std::size_t frame, std::size_t patch, std::size_t overlap);

/// Throws std::invalid_argument when the frame is smaller than one patch.
PatchPlan plan(std::size_t frame_rows, std::size_t frame_cols, const PatchLayout& layout);

RFGrid extract(const RFGrid& frame, Origin origin, std::size_t rows, std::size_t cols);
void write_back(RFGrid& frame, const RFGrid& patch, Origin origin);

std::vector<RFGrid> extract_all(const RFGrid& frame, const PatchPlan& p);

/// Mask-shift interleaving. Patches are swept row-major and each one
/// overwrites the pixels it shares with every patch visited before it (its
/// left, upper, upper-left and, where edge clamping makes them overlap,
/// upper-right and farther neighbours). Afterwards each shared pixel holds the
/// value of the last patch covering it in sweep order, in every patch.
void interleave(std::vector<RFGrid>& patches, const PatchPlan& p);

/// Largest absolute difference between any two patches on a shared pixel.
double max_overlap_disagreement(const std::vector<RFGrid>& patches, const PatchPlan& p);

inline constexpr double kStitchTolerance = 1e-9;

/// Writes the patches into a frame. Throws std::runtime_error when shared
/// pixels disagree by kStitchTolerance or more, which means an interleave was
/// skipped.
RFGrid stitch(const std::vector<RFGrid>& patches, const PatchPlan& p);

}  // namespace hazesep::patch
