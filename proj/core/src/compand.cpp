#include "hazesep/compand.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hazesep::compand {

void CompandParams::validate() const {
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw std::invalid_argument("compand: mu must be positive, got " + std::to_string(mu));
    }
}

double encode_value(double x, double mu) noexcept {
    const double mag = std::log1p(mu * std::abs(x)) / std::log1p(mu);
    return std::copysign(mag, x);
}

double decode_value(double c, double mu) noexcept {
    const double mag = std::expm1(std::abs(c) * std::log1p(mu)) / mu;
    return std::copysign(mag, c);
}

double encode_deriv_value(double x, double mu) noexcept {
    return mu / ((1.0 + mu * std::abs(x)) * std::log1p(mu));
}

double decode_deriv_value(double c, double mu) noexcept {
    const double l = std::log1p(mu);
    return std::exp(std::abs(c) * l) * l / mu;
}

namespace {

template <typename Fn>
Companded map_clipped(const RFGrid& in, const CompandParams& p, const char* what, Fn fn) {
    p.validate();
    Companded out{in, 0};
    for (double& v : out.grid.values()) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string(what) + ": non-finite input sample");
        }
        if (v > 1.0 || v < -1.0) {
            v = std::clamp(v, -1.0, 1.0);
            ++out.clipped;
        }
        v = fn(v, p.mu);
    }
    return out;
}

template <typename Fn>
RFGrid map_plain(const RFGrid& in, const CompandParams& p, Fn fn) {
    p.validate();
    RFGrid out = in;
    for (double& v : out.values()) v = fn(std::clamp(v, -1.0, 1.0), p.mu);
    return out;
}

}  // namespace

Companded encode(const RFGrid& x, const CompandParams& p) {
    return map_clipped(x, p, "compand::encode", encode_value);
}

Companded decode(const RFGrid& c, const CompandParams& p) {
    return map_clipped(c, p, "compand::decode", decode_value);
}

RFGrid encode_deriv(const RFGrid& x, const CompandParams& p) {
    return map_plain(x, p, encode_deriv_value);
}

RFGrid decode_deriv(const RFGrid& c, const CompandParams& p) {
    return map_plain(c, p, decode_deriv_value);
}

Normalized normalize_to_unit(const RFGrid& x) {
    const double peak = grid_max_abs(x);
    if (!(peak > 0.0)) {
        throw std::invalid_argument("normalize_to_unit: grid is identically zero");
    }
    Normalized out{x, peak};
    for (double& v : out.grid.values()) v /= peak;
    return out;
}

}  // namespace hazesep::compand
