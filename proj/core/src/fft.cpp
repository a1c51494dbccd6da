#include "hazesep/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace hazesep {

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) noexcept {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_inplace(std::span<Complex> data, bool inverse) {
    const std::size_t n = data.size();
    if (!is_power_of_two(n)) {
        throw std::invalid_argument("fft: length " + std::to_string(n) +
                                    " is not a power of two; zero-pad first");
    }
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const std::size_t half = len / 2;
        for (std::size_t k = 0; k < half; ++k) {
            // Twiddles evaluated directly rather than by recurrence to keep
            // the round-off independent of the transform length.
            const Complex w(std::cos(angle * static_cast<double>(k)),
                            std::sin(angle * static_cast<double>(k)));
            for (std::size_t i = k; i < n; i += len) {
                const Complex u = data[i];
                const Complex v = data[i + half] * w;
                data[i] = u + v;
                data[i + half] = u - v;
            }
        }
    }
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& v : data) v *= scale;
    }
}

std::vector<Complex> fft_1d(std::span<const Complex> signal, bool inverse) {
    std::vector<Complex> out(signal.begin(), signal.end());
    fft_inplace(out, inverse);
    return out;
}

std::vector<Complex> zero_pad(std::span<const double> signal, std::size_t length) {
    if (length < signal.size()) {
        throw std::invalid_argument("zero_pad: target length shorter than signal");
    }
    std::vector<Complex> out(length);
    for (std::size_t i = 0; i < signal.size(); ++i) out[i] = signal[i];
    return out;
}

void fft_2d_inplace(ComplexPlane& plane, bool inverse) {
    for (std::size_t r = 0; r < plane.rows; ++r) {
        fft_inplace(std::span<Complex>(plane.data.data() + r * plane.cols, plane.cols), inverse);
    }
    std::vector<Complex> line(plane.rows);
    for (std::size_t c = 0; c < plane.cols; ++c) {
        for (std::size_t r = 0; r < plane.rows; ++r) line[r] = plane(r, c);
        fft_inplace(line, inverse);
        for (std::size_t r = 0; r < plane.rows; ++r) plane(r, c) = line[r];
    }
}

ComplexPlane pad_to_plane(const RFGrid& grid, std::size_t min_rows, std::size_t min_cols) {
    ComplexPlane plane(next_power_of_two(std::max(min_rows, grid.rows())),
                       next_power_of_two(std::max(min_cols, grid.cols())));
    for (std::size_t r = 0; r < grid.rows(); ++r) {
        for (std::size_t c = 0; c < grid.cols(); ++c) plane(r, c) = grid(r, c);
    }
    return plane;
}

double bin_frequency(std::size_t k, std::size_t n) noexcept {
    const auto kk = static_cast<double>(k);
    const auto nn = static_cast<double>(n);
    return 2 * k < n ? kk / nn : (kk - nn) / nn;
}

}  // namespace hazesep
