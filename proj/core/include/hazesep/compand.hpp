#pragma once

#include <cstddef>

#include "hazesep/grid.hpp"

namespace hazesep::compand {

/// mu-law companding strength. mu -> 0 approaches the identity map.
struct CompandParams {
    double mu = 255.0;

    void validate() const;
};

// Scalar maps on the whole real line. encode and decode are exact inverses
// there; the [-1, 1] restriction only applies to the grid-level operations.
double encode_value(double x, double mu) noexcept;
double decode_value(double c, double mu) noexcept;
/// d/dx encode, even in x and finite at 0.
double encode_deriv_value(double x, double mu) noexcept;
/// d/dc decode
double decode_deriv_value(double c, double mu) noexcept;

/// Grid result plus the number of samples clipped to [-1, 1] beforehand.
struct Companded {
    RFGrid grid;
    std::size_t clipped = 0;
};

/// sign(x) ln(1 + mu|x|) / ln(1 + mu), after clipping to [-1, 1].
/// Throws std::invalid_argument on non-finite input.
Companded encode(const RFGrid& x, const CompandParams& p);
/// sign(c) ((1 + mu)^|c| - 1) / mu, after clipping to [-1, 1].
Companded decode(const RFGrid& c, const CompandParams& p);
RFGrid encode_deriv(const RFGrid& x, const CompandParams& p);
RFGrid decode_deriv(const RFGrid& c, const CompandParams& p);

struct Normalized {
    RFGrid grid;
    double scale = 1.0;  // original = grid * scale
};

/// Divides by max |x|. Throws std::invalid_argument for an all-zero grid.
Normalized normalize_to_unit(const RFGrid& x);

}  // namespace hazesep::compand
