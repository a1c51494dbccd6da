#include "hazesep/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hazesep {

RFGrid::RFGrid(std::size_t rows, std::size_t cols, double fill, double axial_spacing,
               double lateral_spacing)
    : rows_(rows), cols_(cols), axial_spacing_(axial_spacing),
      lateral_spacing_(lateral_spacing), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("RFGrid: dimensions must be at least 1x1");
    }
}

RFGrid::RFGrid(std::size_t rows, std::size_t cols, std::vector<double> samples,
               double axial_spacing, double lateral_spacing)
    : rows_(rows), cols_(cols), axial_spacing_(axial_spacing),
      lateral_spacing_(lateral_spacing), data_(std::move(samples)) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("RFGrid: dimensions must be at least 1x1");
    }
    if (data_.size() != rows * cols) {
        throw std::invalid_argument("RFGrid: sample count does not match " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    }
}

RFGrid RFGrid::from_rows(const std::vector<std::vector<double>>& rows, double axial_spacing,
                         double lateral_spacing) {
    if (rows.empty() || rows.front().empty()) {
        throw std::invalid_argument("RFGrid::from_rows: empty input");
    }
    const std::size_t cols = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols) {
            throw std::invalid_argument("RFGrid::from_rows: ragged rows");
        }
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return RFGrid(rows.size(), cols, std::move(flat), axial_spacing, lateral_spacing);
}

void RFGrid::set_spacing(double axial, double lateral) {
    axial_spacing_ = axial;
    lateral_spacing_ = lateral;
}

std::string RFGrid::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool RFGrid::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> RFGrid::column(std::size_t c) const {
    std::vector<double> line(rows_);
    for (std::size_t r = 0; r < rows_; ++r) line[r] = (*this)(r, c);
    return line;
}

void RFGrid::set_column(std::size_t c, std::span<const double> line) {
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = line[r];
}

void require_same_shape(const RFGrid& a, const RFGrid& b, const char* what) {
    if (!a.same_shape(b)) {
        std::ostringstream msg;
        msg << what << ": shape mismatch " << a.shape_string() << " vs " << b.shape_string();
        throw std::invalid_argument(msg.str());
    }
}

RFGrid grid_add(const RFGrid& a, const RFGrid& b) {
    require_same_shape(a, b, "grid_add");
    RFGrid out = a;
    auto dst = out.values();
    auto src = b.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    return out;
}

RFGrid grid_sub(const RFGrid& a, const RFGrid& b) {
    require_same_shape(a, b, "grid_sub");
    RFGrid out = a;
    auto dst = out.values();
    auto src = b.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
    return out;
}

RFGrid grid_axpy(const RFGrid& a, double s, const RFGrid& b) {
    require_same_shape(a, b, "grid_axpy");
    RFGrid out = a;
    auto dst = out.values();
    auto src = b.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
    return out;
}

RFGrid grid_scale(const RFGrid& a, double s) {
    RFGrid out = a;
    for (double& v : out.values()) v *= s;
    return out;
}

double grid_max_abs(const RFGrid& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

double grid_sum_squares(const RFGrid& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return s;
}

double grid_mean(const RFGrid& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return s / static_cast<double>(a.size());
}

double relative_l2(const RFGrid& a, const RFGrid& b) {
    require_same_shape(a, b, "relative_l2");
    double num = 0.0, den = 0.0;
    auto va = a.values();
    auto vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) {
        num += (va[i] - vb[i]) * (va[i] - vb[i]);
        den += vb[i] * vb[i];
    }
    return std::sqrt(num / den);
}

double max_abs_diff(const RFGrid& a, const RFGrid& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    auto va = a.values();
    auto vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) m = std::max(m, std::abs(va[i] - vb[i]));
    return m;
}

RFGrid flip_lateral(const RFGrid& a) {
    RFGrid out = a;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto src = a.row(r);
        auto dst = out.row(r);
        std::reverse_copy(src.begin(), src.end(), dst.begin());
    }
    return out;
}

}  // namespace hazesep
