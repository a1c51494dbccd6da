#pragma once

#include <filesystem>
#include <iosfwd>

#include "hazesep/grid.hpp"

namespace hazesep {

// URF1 layout (all little-endian):
//   "URF1" | u32 rows | u32 cols | f64 axial_spacing | f64 lateral_spacing |
//   rows*cols f32 samples, row-major.

void write_urf(std::ostream& out, const RFGrid& grid);
RFGrid read_urf(std::istream& in);

void write_urf_file(const std::filesystem::path& path, const RFGrid& grid);
RFGrid read_urf_file(const std::filesystem::path& path);

/// Rounds every sample through f32, i.e. what a URF1 round trip stores.
RFGrid quantize_f32(const RFGrid& grid);

}  // namespace hazesep
