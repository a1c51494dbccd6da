#include "hazesep/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <queue>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hazesep/errors.hpp"
#include "hazesep/fft.hpp"

namespace hazesep::metrics {

double psnr(const RFGrid& test, const RFGrid& reference, double range) {
    require_same_shape(test, reference, "psnr");
    if (!(range > 0.0)) throw std::invalid_argument("psnr: reference range must be positive");
    if (test.empty()) throw std::invalid_argument("psnr: empty images");
    double sse = 0.0;
    auto a = test.values();
    auto b = reference.values();
    for (std::size_t i = 0; i < a.size(); ++i) sse += (a[i] - b[i]) * (a[i] - b[i]);
    if (sse == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(range * range / (sse / static_cast<double>(a.size())));
}

double psnr(const imaging::BModeImage& test, const imaging::BModeImage& reference) {
    return psnr(test.db, reference.db, reference.dynamic_range);
}

RoiMask::RoiMask(std::size_t rows, std::size_t cols, std::string label)
    : rows_(rows), cols_(cols), label_(std::move(label)), bits_(rows * cols, 0) {}

std::size_t RoiMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<double> RoiMask::values(const RFGrid& frame) const {
    if (frame.rows() != rows_ || frame.cols() != cols_) {
        throw std::invalid_argument("mask " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                                    " does not match frame " + frame.shape_string());
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) out.push_back(frame.values()[i]);
    return out;
}

double intersection_over_union(const RoiMask& a, const RoiMask& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("IoU: mask shapes differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            inter += a(r, c) && b(r, c);
            uni += a(r, c) || b(r, c);
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double gcnr(std::span<const double> a, std::span<const double> b, std::size_t bins) {
    if (a.empty() || b.empty()) throw std::invalid_argument("gcnr: empty region");
    if (bins < 2) throw std::invalid_argument("gcnr: need at least 2 bins");
    const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
    const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
    const double lo = std::min(*amin, *bmin);
    const double hi = std::max(*amax, *bmax);
    if (hi == lo) return 0.0;
    const auto nb = static_cast<double>(bins);
    auto histogram = [&](std::span<const double> v) {
        std::vector<double> h(bins, 0.0);
        for (double x : v) {
            const auto k = static_cast<std::size_t>(std::floor((x - lo) / (hi - lo) * nb));
            h[std::min(k, bins - 1)] += 1.0 / static_cast<double>(v.size());
        }
        return h;
    };
    const auto ha = histogram(a);
    const auto hb = histogram(b);
    double overlap = 0.0;
    for (std::size_t k = 0; k < bins; ++k) overlap += std::min(ha[k], hb[k]);
    return std::clamp(1.0 - overlap, 0.0, 1.0);
}

double gcnr(const RFGrid& frame, const RoiMask& a, const RoiMask& b, std::size_t bins) {
    const auto va = a.values(frame);
    const auto vb = b.values(frame);
    return gcnr(va, vb, bins);
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const auto na = static_cast<double>(sa.size());
    const auto nb = static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double v = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= v) ++i;
        while (j < sb.size() && sb[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double fwhm_lateral(const RFGrid& frame, const RoiMask& roi) {
    const auto vals = roi.values(frame);
    if (vals.empty()) throw std::invalid_argument("fwhm_lateral: empty ROI");
    std::size_t r0 = roi.rows(), r1 = 0, c0 = roi.cols(), c1 = 0;
    for (std::size_t r = 0; r < roi.rows(); ++r) {
        for (std::size_t c = 0; c < roi.cols(); ++c) {
            if (!roi(r, c)) continue;
            r0 = std::min(r0, r);
            r1 = std::max(r1, r);
            c0 = std::min(c0, c);
            c1 = std::max(c1, c);
        }
    }
    const std::size_t h = r1 - r0 + 1;
    const std::size_t w = c1 - c0 + 1;
    if (h < 4 || w < 16) {
        throw std::invalid_argument("fwhm_lateral: ROI bounding box needs at least 4 rows and 16 columns");
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());

    ComplexPlane plane(next_power_of_two(2 * h), next_power_of_two(2 * w));
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            if (roi(r0 + r, c0 + c)) plane(r, c) = frame(r0 + r, c0 + c) - mean;
    fft_2d_inplace(plane, false);
    for (auto& v : plane.data) v = std::norm(v);
    fft_2d_inplace(plane, true);
    const double zero = plane(0, 0).real();
    if (!(zero > 1e-300)) throw std::invalid_argument("fwhm_lateral: constant ROI");

    double prev = 1.0;
    for (std::size_t k = 1; k < w; ++k) {
        const double p = plane(0, k).real() / zero;
        if (p < 0.5) {
            const double half_width = static_cast<double>(k - 1) + (prev - 0.5) / (prev - p);
            return 2.0 * half_width;
        }
        prev = p;
    }
    throw std::invalid_argument("fwhm_lateral: main lobe wider than the ROI");
}

namespace {

// Directions in (row, col) screen coordinates, clockwise order.
constexpr std::array<std::array<int, 2>, 4> kDir{{{0, 1}, {1, 0}, {0, -1}, {-1, 0}}};

RoiMask largest_component(const RoiMask& mask) {
    RoiMask best(mask.rows(), mask.cols(), mask.label());
    std::vector<int> seen(mask.rows() * mask.cols(), 0);
    std::size_t best_count = 0;
    for (std::size_t start = 0; start < seen.size(); ++start) {
        const std::size_t sr = start / mask.cols(), sc = start % mask.cols();
        if (seen[start] || !mask(sr, sc)) continue;
        std::vector<std::size_t> members;
        std::queue<std::size_t> q;
        q.push(start);
        seen[start] = 1;
        while (!q.empty()) {
            const std::size_t cur = q.front();
            q.pop();
            members.push_back(cur);
            const auto r = static_cast<long>(cur / mask.cols());
            const auto c = static_cast<long>(cur % mask.cols());
            for (const auto& d : kDir) {
                const long nr = r + d[0], nc = c + d[1];
                if (nr < 0 || nc < 0 || nr >= static_cast<long>(mask.rows()) || nc >= static_cast<long>(mask.cols()))
                    continue;
                const std::size_t n = static_cast<std::size_t>(nr) * mask.cols() + static_cast<std::size_t>(nc);
                if (!seen[n] && mask(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc))) {
                    seen[n] = 1;
                    q.push(n);
                }
            }
        }
        if (members.size() > best_count) {
            best_count = members.size();
            best = RoiMask(mask.rows(), mask.cols(), mask.label());
            for (std::size_t m : members) best.set(m / mask.cols(), m % mask.cols());
        }
    }
    return best;
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
    const double dr = b.row - a.row, dc = b.col - a.col;
    const double len2 = dr * dr + dc * dc;
    double t = len2 > 0.0 ? ((p.row - a.row) * dr + (p.col - a.col) * dc) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.row - (a.row + t * dr), p.col - (a.col + t * dc));
}

void douglas_peucker(const Polygon& pts, std::size_t first, std::size_t last, double tol,
                     std::vector<bool>& keep) {
    if (last <= first + 1) return;
    double worst = -1.0;
    std::size_t index = first;
    for (std::size_t i = first + 1; i < last; ++i) {
        const double d = point_segment_distance(pts[i], pts[first], pts[last]);
        if (d > worst) {
            worst = d;
            index = i;
        }
    }
    if (worst > tol) {
        keep[index] = true;
        douglas_peucker(pts, first, index, tol, keep);
        douglas_peucker(pts, index, last, tol, keep);
    }
}

double signed_area(const Polygon& p) {
    double a = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Point& u = p[i];
        const Point& v = p[(i + 1) % p.size()];
        a += u.col * v.row - v.col * u.row;
    }
    return 0.5 * a;
}

}  // namespace

Polygon trace_contour(const RoiMask& mask) {
    const RoiMask region = largest_component(mask);
    if (region.count() == 0) throw std::invalid_argument("trace_contour: empty mask");
    const std::size_t rows = region.rows(), cols = region.cols();
    const std::size_t stride = cols + 1;
    std::vector<std::uint8_t> out_edges((rows + 1) * stride, 0);
    auto inside = [&](long r, long c) {
        return r >= 0 && c >= 0 && r < static_cast<long>(rows) && c < static_cast<long>(cols) &&
               region(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    };
    auto corner = [&](long r, long c) { return static_cast<std::size_t>(r) * stride + static_cast<std::size_t>(c); };
    long start_r = -1, start_c = -1;
    for (long r = 0; r < static_cast<long>(rows); ++r) {
        for (long c = 0; c < static_cast<long>(cols); ++c) {
            if (!inside(r, c)) continue;
            if (start_r < 0) start_r = r, start_c = c;
            if (!inside(r - 1, c)) out_edges[corner(r, c)] |= 1 << 0;
            if (!inside(r, c + 1)) out_edges[corner(r, c + 1)] |= 1 << 1;
            if (!inside(r + 1, c)) out_edges[corner(r + 1, c + 1)] |= 1 << 2;
            if (!inside(r, c - 1)) out_edges[corner(r + 1, c)] |= 1 << 3;
        }
    }
    // The top edge of the first pixel in raster order lies on the outer
    // boundary; with the region on the right, prefer right turns so diagonal
    // pinches are not crossed.
    Polygon poly;
    long r = start_r, c = start_c;
    int dir = 0;
    const long r_begin = r, c_begin = c;
    do {
        poly.push_back({static_cast<double>(r), static_cast<double>(c)});
        r += kDir[static_cast<std::size_t>(dir)][0];
        c += kDir[static_cast<std::size_t>(dir)][1];
        const std::uint8_t options = out_edges[corner(r, c)];
        int next = -1;
        for (int turn : {1, 0, 3}) {
            const int d = (dir + turn) % 4;
            if (options & (1 << d)) {
                next = d;
                break;
            }
        }
        if (next < 0) throw std::logic_error("trace_contour: open boundary");
        dir = next;
    } while (!(r == r_begin && c == c_begin && dir == 0));

    Polygon out;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point& a = poly[(i + poly.size() - 1) % poly.size()];
        const Point& b = poly[i];
        const Point& n = poly[(i + 1) % poly.size()];
        const double cross = (b.row - a.row) * (n.col - b.col) - (b.col - a.col) * (n.row - b.row);
        if (cross != 0.0) out.push_back(b);
    }
    return out;
}

Polygon simplify(const Polygon& poly, double tolerance) {
    if (poly.size() < 4 || tolerance <= 0.0) return poly;
    std::size_t far = 0;
    double best = -1.0;
    for (std::size_t i = 1; i < poly.size(); ++i) {
        const double d = std::hypot(poly[i].row - poly[0].row, poly[i].col - poly[0].col);
        if (d > best) {
            best = d;
            far = i;
        }
    }
    Polygon closed = poly;
    closed.push_back(poly[0]);
    std::vector<bool> keep(closed.size(), false);
    keep[0] = keep[far] = true;
    douglas_peucker(closed, 0, far, tolerance, keep);
    douglas_peucker(closed, far, closed.size() - 1, tolerance, keep);
    Polygon out;
    for (std::size_t i = 0; i < poly.size(); ++i)
        if (keep[i]) out.push_back(poly[i]);
    return out;
}

Polygon resample(const Polygon& poly, std::size_t n) {
    if (poly.size() < 3 || n < 3) throw std::invalid_argument("resample: need at least 3 vertices");
    std::vector<double> cum{0.0};
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % poly.size()];
        cum.push_back(cum.back() + std::hypot(b.row - a.row, b.col - a.col));
    }
    const double total = cum.back();
    Polygon out;
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double s = total * static_cast<double>(k) / static_cast<double>(n);
        while (seg + 1 < cum.size() - 1 && cum[seg + 1] <= s) ++seg;
        const Point& a = poly[seg];
        const Point& b = poly[(seg + 1) % poly.size()];
        const double len = cum[seg + 1] - cum[seg];
        const double t = len > 0.0 ? (s - cum[seg]) / len : 0.0;
        out.push_back({a.row + t * (b.row - a.row), a.col + t * (b.col - a.col)});
    }
    return out;
}

RoiMask rasterize(const Polygon& poly, std::size_t rows, std::size_t cols, std::string label) {
    RoiMask mask(rows, cols, std::move(label));
    if (poly.size() < 3) return mask;
    std::vector<double> xs;
    for (std::size_t r = 0; r < rows; ++r) {
        const double y = static_cast<double>(r) + 0.5;
        xs.clear();
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Point& a = poly[i];
            const Point& b = poly[(i + 1) % poly.size()];
            if ((a.row <= y) != (b.row <= y)) {
                xs.push_back(a.col + (y - a.row) / (b.row - a.row) * (b.col - a.col));
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            for (std::size_t c = 0; c < cols; ++c) {
                const double x = static_cast<double>(c) + 0.5;
                if (x > xs[k] && x < xs[k + 1]) mask.set(r, c);
            }
        }
    }
    return mask;
}

Polygon interpolate_polygon(const std::vector<KeyPolygon>& keys, double target) {
    const KeyPolygon* lo = nullptr;
    const KeyPolygon* hi = nullptr;
    for (const auto& k : keys) {
        if (k.index == target) return k.polygon;
        if (k.index < target && (!lo || k.index > lo->index)) lo = &k;
        if (k.index > target && (!hi || k.index < hi->index)) hi = &k;
    }
    if (!lo || !hi) {
        throw std::invalid_argument("roi_interpolate: frame " + std::to_string(target) +
                                    " is not bracketed by key frames");
    }
    Polygon a = lo->polygon;
    Polygon b = hi->polygon;
    if (a.size() < 3 || b.size() < 3) throw std::invalid_argument("roi_interpolate: degenerate key polygon");
    if (a.size() > b.size()) a = resample(a, b.size());
    if (b.size() > a.size()) b = resample(b, a.size());
    if ((signed_area(a) > 0) != (signed_area(b) > 0)) std::reverse(b.begin(), b.end());
    const std::size_t n = a.size();
    std::size_t shift = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Point& q = b[(i + s) % n];
            cost += (a[i].row - q.row) * (a[i].row - q.row) + (a[i].col - q.col) * (a[i].col - q.col);
        }
        if (cost < best) {
            best = cost;
            shift = s;
        }
    }
    const double w = (target - lo->index) / (hi->index - lo->index);
    Polygon out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Point& q = b[(i + shift) % n];
        out[i] = {(1.0 - w) * a[i].row + w * q.row, (1.0 - w) * a[i].col + w * q.col};
    }
    return out;
}

RoiMask roi_interpolate(const std::vector<KeyMask>& keys, double target, double tolerance) {
    if (keys.empty()) throw std::invalid_argument("roi_interpolate: no key masks");
    std::vector<KeyPolygon> polys;
    for (const auto& k : keys) polys.push_back({k.index, simplify(trace_contour(k.mask), tolerance)});
    const RoiMask& ref = keys.front().mask;
    return rasterize(interpolate_polygon(polys, target), ref.rows(), ref.cols(), ref.label());
}

RoiMask read_mask_png(const std::filesystem::path& path, std::string label) {
    const imaging::GrayImage img = imaging::read_gray_png(path);
    RoiMask mask(img.rows, img.cols, std::move(label));
    for (std::size_t r = 0; r < img.rows; ++r)
        for (std::size_t c = 0; c < img.cols; ++c) mask.set(r, c, img.pixels[r * img.cols + c] != 0);
    return mask;
}

void write_mask_png(const RoiMask& mask, const std::filesystem::path& path) {
    std::vector<std::uint8_t> px(mask.rows() * mask.cols());
    for (std::size_t r = 0; r < mask.rows(); ++r)
        for (std::size_t c = 0; c < mask.cols(); ++c) px[r * mask.cols() + c] = mask(r, c) ? 255 : 0;
    imaging::write_gray_png(path, mask.rows(), mask.cols(), px);
}

PolygonFile read_polygon_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open polygon file '" + path.string() + "'");
    try {
        const auto j = nlohmann::json::parse(in);
        PolygonFile f;
        f.label = j.value("label", std::string{});
        f.rows = j.at("rows").get<std::size_t>();
        f.cols = j.at("cols").get<std::size_t>();
        for (const auto& k : j.at("keys")) {
            KeyPolygon kp;
            kp.index = k.at("frame").get<double>();
            for (const auto& v : k.at("vertices")) kp.polygon.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            f.keys.push_back(std::move(kp));
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed polygon file '" + path.string() + "': " + e.what());
    }
}

void write_polygon_json(const PolygonFile& file, const std::filesystem::path& path) {
    nlohmann::json j{{"label", file.label}, {"rows", file.rows}, {"cols", file.cols}, {"keys", nlohmann::json::array()}};
    for (const auto& k : file.keys) {
        nlohmann::json verts = nlohmann::json::array();
        for (const auto& p : k.polygon) verts.push_back({p.row, p.col});
        j["keys"].push_back({{"frame", k.index}, {"vertices", verts}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
}

RoiMask polygon_mask(const PolygonFile& file, double index) {
    return rasterize(interpolate_polygon(file.keys, index), file.rows, file.cols, file.label);
}

}  // namespace hazesep::metrics
