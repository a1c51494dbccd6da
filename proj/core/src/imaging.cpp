#include "hazesep/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <stdexcept>

#include "hazesep/errors.hpp"
#include "hazesep/fft.hpp"

namespace hazesep::imaging {

RFGrid envelope(const RFGrid& rf) {
    if (rf.rows() < 8) throw std::invalid_argument("envelope: need at least 8 axial samples");
    const std::size_t n = next_power_of_two(rf.rows());
    RFGrid out(rf.rows(), rf.cols(), 0.0, rf.axial_spacing(), rf.lateral_spacing());
    for (std::size_t c = 0; c < rf.cols(); ++c) {
        const std::vector<double> line = rf.column(c);
        std::vector<Complex> spec = zero_pad(line, n);
        fft_inplace(spec, false);
        for (std::size_t k = 1; k < n / 2; ++k) spec[k] *= 2.0;
        for (std::size_t k = n / 2 + 1; k < n; ++k) spec[k] = 0.0;
        fft_inplace(spec, true);
        for (std::size_t r = 0; r < rf.rows(); ++r) out(r, c) = std::abs(spec[r]);
    }
    return out;
}

BModeImage log_compress(const RFGrid& env, double dynamic_range) {
    if (!(dynamic_range > 0.0)) throw std::invalid_argument("log_compress: dynamic range must be positive");
    double peak = 0.0;
    for (double v : env.values()) {
        if (!(v >= 0.0)) throw std::invalid_argument("log_compress: envelope must be non-negative");
        peak = std::max(peak, v);
    }
    if (peak == 0.0) throw std::invalid_argument("log_compress: envelope is all zero");
    BModeImage img{env, dynamic_range};
    for (double& v : img.db.values()) {
        v = v > 0.0 ? std::clamp(20.0 * std::log10(v / peak), -dynamic_range, 0.0) : -dynamic_range;
    }
    return img;
}

BModeImage bmode(const RFGrid& rf, double dynamic_range) {
    return log_compress(envelope(rf), dynamic_range);
}

double top_decile_mean(const RFGrid& values) {
    if (values.empty()) throw std::invalid_argument("top_decile_mean: empty image");
    std::vector<double> v(values.values().begin(), values.values().end());
    const auto k = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(v.size())));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end(), std::greater<>());
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += v[i];
    return sum / static_cast<double>(k);
}

double brightness_offset(const BModeImage& img, const BModeImage& reference) {
    return top_decile_mean(reference.db) - top_decile_mean(img.db);
}

BModeImage brightness_match(const BModeImage& img, const BModeImage& reference) {
    const double offset = brightness_offset(img, reference);
    BModeImage out = img;
    for (double& v : out.db.values()) v = std::clamp(v + offset, -img.dynamic_range, 0.0);
    return out;
}

std::uint8_t display_level(double db, double dynamic_range) noexcept {
    const double level = std::floor(255.0 * (1.0 + db / dynamic_range));
    return static_cast<std::uint8_t>(std::clamp(level, 0.0, 255.0));
}

void write_gray_png(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                    const std::vector<std::uint8_t>& pixels) {
    if (pixels.size() != rows * cols || rows == 0 || cols == 0) {
        throw std::invalid_argument("write_gray_png: pixel count does not match the shape");
    }
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encoding failed for '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < rows; ++r) {
        png_write_row(png, const_cast<png_bytep>(pixels.data() + r * cols));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void export_png(const BModeImage& img, const std::filesystem::path& path) {
    std::vector<std::uint8_t> px;
    px.reserve(img.db.size());
    for (double v : img.db.values()) px.push_back(display_level(v, img.dynamic_range));
    write_gray_png(path, img.db.rows(), img.db.cols(), px);
}

GrayImage read_gray_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw IoError("cannot read PNG '" + path.string() + "': " + image.message);
    }
    image.format = PNG_FORMAT_GRAY;
    GrayImage out{image.height, image.width, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(image))};
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw IoError("cannot decode PNG '" + path.string() + "': " + msg);
    }
    return out;
}

void export_csv(const BModeImage& img, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << std::setprecision(9);
    for (std::size_t r = 0; r < img.db.rows(); ++r) {
        for (std::size_t c = 0; c < img.db.cols(); ++c) out << (c ? "," : "") << img.db(r, c);
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace hazesep::imaging
