#include "hazesep/urf_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "hazesep/errors.hpp"

namespace hazesep {

namespace {

constexpr std::array<char, 4> kMagic{'U', 'R', 'F', '1'};

}  // namespace

using detail::get_le;
using detail::put_le;

void write_urf(std::ostream& out, const RFGrid& grid) {
    if (grid.rows() > std::numeric_limits<std::uint32_t>::max() ||
        grid.cols() > std::numeric_limits<std::uint32_t>::max()) {
        throw IoError("URF1: grid too large");
    }
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.cols()));
    put_le<double>(out, grid.axial_spacing());
    put_le<double>(out, grid.lateral_spacing());
    for (double v : grid.values()) put_le<float>(out, static_cast<float>(v));
    if (!out) throw IoError("URF1: write failed");
}

RFGrid read_urf(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw IoError("URF1: bad magic");
    }
    const auto rows = get_le<std::uint32_t>(in, "URF1");
    const auto cols = get_le<std::uint32_t>(in, "URF1");
    const auto axial = get_le<double>(in, "URF1");
    const auto lateral = get_le<double>(in, "URF1");
    if (rows == 0 || cols == 0) throw IoError("URF1: empty grid");
    std::vector<double> samples(static_cast<std::size_t>(rows) * cols);
    for (double& v : samples) {
        const float f = get_le<float>(in, "URF1");
        if (!std::isfinite(f)) throw IoError("URF1: non-finite sample");
        v = f;
    }
    return RFGrid(rows, cols, std::move(samples), axial, lateral);
}

void write_urf_file(const std::filesystem::path& path, const RFGrid& grid) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_urf(out, grid);
}

RFGrid read_urf_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_urf(in);
}

RFGrid quantize_f32(const RFGrid& grid) {
    RFGrid out = grid;
    for (double& v : out.values()) v = static_cast<float>(v);
    return out;
}

}  // namespace hazesep
