#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "hazesep/grid.hpp"

namespace hazesep {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n) noexcept;
std::size_t next_power_of_two(std::size_t n) noexcept;

/// In-place iterative radix-2 transform. Forward is unscaled, inverse is
/// scaled by 1/N. Throws std::invalid_argument unless the length is a power
/// of two.
void fft_inplace(std::span<Complex> data, bool inverse);

/// Out-of-place convenience wrapper around fft_inplace.
std::vector<Complex> fft_1d(std::span<const Complex> signal, bool inverse);

/// Real sequence promoted to complex and zero-padded to `length`.
std::vector<Complex> zero_pad(std::span<const double> signal, std::size_t length);

/// Dense complex 2-D array (row-major) used for frequency-domain filtering.
struct ComplexPlane {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Complex> data;

    ComplexPlane(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}
    Complex& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Separable 2-D transform; both dimensions must be powers of two.
void fft_2d_inplace(ComplexPlane& plane, bool inverse);

/// Zero-padded copy of a grid in a power-of-two plane of at least
/// (min_rows, min_cols).
ComplexPlane pad_to_plane(const RFGrid& grid, std::size_t min_rows, std::size_t min_cols);

/// Signed frequency (cycles per sample) of DFT bin k in a length-n transform.
double bin_frequency(std::size_t k, std::size_t n) noexcept;

}  // namespace hazesep
