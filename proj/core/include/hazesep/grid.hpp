#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hazesep {

/// Two-dimensional real-valued sample grid (axial rows x lateral columns).
///
/// Samples are stored row-major with the axial index first, so a row is one
/// depth sample across all lateral lines. Spacings carry the physical size of
/// one row / column step and are propagated unchanged by elementwise ops.
class RFGrid {
public:
    RFGrid() = default;
    RFGrid(std::size_t rows, std::size_t cols, double fill = 0.0,
           double axial_spacing = 1.0, double lateral_spacing = 1.0);
    RFGrid(std::size_t rows, std::size_t cols, std::vector<double> samples,
           double axial_spacing = 1.0, double lateral_spacing = 1.0);

    /// Builds a grid from nested rows; all rows must have equal length.
    static RFGrid from_rows(const std::vector<std::vector<double>>& rows,
                            double axial_spacing = 1.0, double lateral_spacing = 1.0);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double axial_spacing() const noexcept { return axial_spacing_; }
    double lateral_spacing() const noexcept { return lateral_spacing_; }
    void set_spacing(double axial, double lateral);

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    bool same_shape(const RFGrid& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_string() const;

    /// True when every sample is finite.
    bool all_finite() const noexcept;

    /// Copy of column `c` as a contiguous vector (one axial line).
    std::vector<double> column(std::size_t c) const;
    void set_column(std::size_t c, std::span<const double> line);

    friend bool operator==(const RFGrid&, const RFGrid&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    double axial_spacing_ = 1.0;
    double lateral_spacing_ = 1.0;
    std::vector<double> data_;
};

/// Throws std::invalid_argument naming both shapes when they differ.
void require_same_shape(const RFGrid& a, const RFGrid& b, const char* what);

/// Elementwise sum; spacings are copied from `a`.
RFGrid grid_add(const RFGrid& a, const RFGrid& b);
/// Elementwise difference a - b; spacings are copied from `a`.
RFGrid grid_sub(const RFGrid& a, const RFGrid& b);
/// a + s * b
RFGrid grid_axpy(const RFGrid& a, double s, const RFGrid& b);
RFGrid grid_scale(const RFGrid& a, double s);

double grid_max_abs(const RFGrid& a);
double grid_sum_squares(const RFGrid& a);
double grid_mean(const RFGrid& a);
/// ||a - b||_2 / ||b||_2
double relative_l2(const RFGrid& a, const RFGrid& b);
double max_abs_diff(const RFGrid& a, const RFGrid& b);

/// Left-right (lateral) mirror.
RFGrid flip_lateral(const RFGrid& a);

}  // namespace hazesep
