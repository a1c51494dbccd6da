#include "hazesep/patchwork.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hazesep::patch {

namespace {

std::size_t fraction_overlap(double fraction, std::size_t size) {
    // A small slack keeps exact products such as 0.1 * 130 from rounding up.
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(size) - 1e-9));
}

void check_conformance(const std::vector<RFGrid>& patches, const PatchPlan& p) {
    if (patches.size() != p.count()) {
        throw std::invalid_argument("patchwork: " + std::to_string(patches.size()) +
                                    " patches for a plan of " + std::to_string(p.count()));
    }
    for (const auto& g : patches) {
        if (g.rows() != p.patch_rows || g.cols() != p.patch_cols) {
            throw std::invalid_argument("patchwork: patch " + g.shape_string() +
                                        " does not match the plan");
        }
    }
}

}  // namespace

std::size_t PatchLayout::overlap_rows() const {
    return overlap_rows_px.value_or(fraction_overlap(overlap_fraction, patch_rows));
}

std::size_t PatchLayout::overlap_cols() const {
    return overlap_cols_px.value_or(fraction_overlap(overlap_fraction, patch_cols));
}

void PatchLayout::validate() const {
    if (patch_rows == 0 || patch_cols == 0) {
        throw std::invalid_argument("patch layout: patch dimensions must be positive");
    }
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
        throw std::invalid_argument("patch layout: overlap fraction must lie in [0, 1)");
    }
    if (overlap_rows() >= patch_rows || overlap_cols() >= patch_cols) {
        throw std::invalid_argument("patch layout: overlap must be smaller than the patch");
    }
}

Origin PatchPlan::origin(std::size_t index) const {
    if (index >= count()) throw std::out_of_range("patch index out of range");
    return {row_origins[index / col_origins.size()], col_origins[index % col_origins.size()]};
}

std::vector<std::size_t> axis_origins(std::size_t frame, std::size_t patch, std::size_t overlap) {
    if (frame < patch) {
        throw std::invalid_argument("frame dimension " + std::to_string(frame) +
                                    " is smaller than the patch (" + std::to_string(patch) +
                                    "); zero-pad the frame to at least one patch first");
    }
    if (overlap >= patch) throw std::invalid_argument("overlap must be smaller than the patch");
    const std::size_t stride = patch - overlap;
    std::vector<std::size_t> origins{0};
    while (origins.back() + patch < frame) {
        origins.push_back(std::min(origins.back() + stride, frame - patch));
    }
    return origins;
}

PatchPlan plan(std::size_t frame_rows, std::size_t frame_cols, const PatchLayout& layout) {
    layout.validate();
    PatchPlan p;
    p.frame_rows = frame_rows;
    p.frame_cols = frame_cols;
    p.patch_rows = layout.patch_rows;
    p.patch_cols = layout.patch_cols;
    p.row_origins = axis_origins(frame_rows, layout.patch_rows, layout.overlap_rows());
    p.col_origins = axis_origins(frame_cols, layout.patch_cols, layout.overlap_cols());
    return p;
}

RFGrid extract(const RFGrid& frame, Origin o, std::size_t rows, std::size_t cols) {
    if (o.row + rows > frame.rows() || o.col + cols > frame.cols()) {
        std::ostringstream msg;
        msg << "extract: window " << rows << "x" << cols << " at (" << o.row << ", " << o.col
            << ") exceeds frame " << frame.shape_string();
        throw std::out_of_range(msg.str());
    }
    RFGrid out(rows, cols, 0.0, frame.axial_spacing(), frame.lateral_spacing());
    for (std::size_t r = 0; r < rows; ++r) {
        auto src = frame.row(o.row + r).subspan(o.col, cols);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

void write_back(RFGrid& frame, const RFGrid& patch, Origin o) {
    if (o.row + patch.rows() > frame.rows() || o.col + patch.cols() > frame.cols()) {
        throw std::out_of_range("write_back: patch exceeds frame " + frame.shape_string());
    }
    for (std::size_t r = 0; r < patch.rows(); ++r) {
        auto src = patch.row(r);
        std::copy(src.begin(), src.end(), frame.row(o.row + r).begin() + static_cast<std::ptrdiff_t>(o.col));
    }
}

std::vector<RFGrid> extract_all(const RFGrid& frame, const PatchPlan& p) {
    if (frame.rows() != p.frame_rows || frame.cols() != p.frame_cols) {
        throw std::invalid_argument("extract_all: frame " + frame.shape_string() +
                                    " does not match the plan");
    }
    std::vector<RFGrid> out;
    out.reserve(p.count());
    for (std::size_t i = 0; i < p.count(); ++i) {
        out.push_back(extract(frame, p.origin(i), p.patch_rows, p.patch_cols));
    }
    return out;
}

void interleave(std::vector<RFGrid>& patches, const PatchPlan& p) {
    check_conformance(patches, p);
    for (std::size_t cur = 1; cur < patches.size(); ++cur) {
        const Origin a = p.origin(cur);
        for (std::size_t prev = 0; prev < cur; ++prev) {
            const Origin b = p.origin(prev);
            const std::size_t r0 = std::max(a.row, b.row);
            const std::size_t r1 = std::min(a.row, b.row) + p.patch_rows;
            const std::size_t c0 = std::max(a.col, b.col);
            const std::size_t c1 = std::min(a.col, b.col) + p.patch_cols;
            if (r0 >= r1 || c0 >= c1) continue;
            for (std::size_t r = r0; r < r1; ++r) {
                auto src = patches[cur].row(r - a.row);
                auto dst = patches[prev].row(r - b.row);
                for (std::size_t c = c0; c < c1; ++c) dst[c - b.col] = src[c - a.col];
            }
        }
    }
}

double max_overlap_disagreement(const std::vector<RFGrid>& patches, const PatchPlan& p) {
    check_conformance(patches, p);
    double worst = 0.0;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const Origin a = p.origin(i);
        for (std::size_t j = 0; j < i; ++j) {
            const Origin b = p.origin(j);
            const std::size_t r0 = std::max(a.row, b.row);
            const std::size_t r1 = std::min(a.row, b.row) + p.patch_rows;
            const std::size_t c0 = std::max(a.col, b.col);
            const std::size_t c1 = std::min(a.col, b.col) + p.patch_cols;
            if (r0 >= r1 || c0 >= c1) continue;
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t c = c0; c < c1; ++c) {
                    worst = std::max(worst, std::abs(patches[i](r - a.row, c - a.col) -
                                                     patches[j](r - b.row, c - b.col)));
                }
            }
        }
    }
    return worst;
}

RFGrid stitch(const std::vector<RFGrid>& patches, const PatchPlan& p) {
    const double disagreement = max_overlap_disagreement(patches, p);
    if (!(disagreement < kStitchTolerance)) {
        std::ostringstream msg;
        msg << "stitch: overlapping patches disagree by " << disagreement
            << " (interleave was not applied after the last step)";
        throw std::runtime_error(msg.str());
    }
    RFGrid frame(p.frame_rows, p.frame_cols, 0.0, patches.front().axial_spacing(),
                 patches.front().lateral_spacing());
    for (std::size_t i = 0; i < patches.size(); ++i) write_back(frame, patches[i], p.origin(i));
    return frame;
}

}  // namespace hazesep::patch
