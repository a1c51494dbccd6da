#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hazesep/grid.hpp"

namespace hazesep::imaging {

/// Log-compressed image in dB, max 0, clipped at -dynamic_range.
struct BModeImage {
    RFGrid db;
    double dynamic_range = 60.0;
};

/// Magnitude of the analytic signal along each axial line. Lines are
/// zero-padded to a power of two for the transform and truncated afterwards.
/// Throws std::invalid_argument for fewer than 8 axial samples.
RFGrid envelope(const RFGrid& rf);

/// 20 log10(env / max env), clipped to [-dynamic_range, 0].
/// Throws std::invalid_argument for negative or all-zero envelopes.
BModeImage log_compress(const RFGrid& env, double dynamic_range = 60.0);

/// envelope followed by log_compress
BModeImage bmode(const RFGrid& rf, double dynamic_range = 60.0);

/// Mean of the top 10% of values, nearest-rank (the ceil(0.1 n) largest).
double top_decile_mean(const RFGrid& values);

/// dB offset that makes img's top-decile mean equal to the reference's.
double brightness_offset(const BModeImage& img, const BModeImage& reference);
/// img shifted by brightness_offset and re-clipped to [-DR, 0].
BModeImage brightness_match(const BModeImage& img, const BModeImage& reference);

/// floor(255 (1 + dB / DR)), clamped to [0, 255].
std::uint8_t display_level(double db, double dynamic_range) noexcept;

/// 8-bit grayscale PNG, rows top to bottom.
void export_png(const BModeImage& img, const std::filesystem::path& path);
void write_gray_png(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                    const std::vector<std::uint8_t>& pixels);

struct GrayImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};
/// Reads any PNG and converts it to 8-bit gray. Throws IoError.
GrayImage read_gray_png(const std::filesystem::path& path);

/// One CSV line per image row.
void export_csv(const BModeImage& img, const std::filesystem::path& path);

}  // namespace hazesep::imaging
