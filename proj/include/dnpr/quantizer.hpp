#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

#include "dnpr/error.hpp"
#include "dnpr/rng.hpp"

namespace dnpr {

/// Subtractive-dithered uniform scalar quantizer: values are winsorized at
/// [-clamp, clamp] and rounded to the grid {u + i*delta} whose offset u is
/// regenerated from a shared key.  bits_per_value is the fixed index width,
/// sized to cover every grid point intersecting [-clamp - delta/2,
/// clamp + delta/2].
struct QuantizerSpec {
    double delta = 1.0;
    double clamp = 1.0;
    int bits_per_value = 1;
};

inline int bits_for_grid(double delta, double clamp) {
    if (!(delta > 0.0) || !(clamp > 0.0))
        throw ValidationError("bits_for_grid: delta and clamp must be positive");
    const double spots = std::floor(2.0 * clamp / delta) + 2.0;
    if (!(spots < 0x1p62)) throw ValidationError("bits_for_grid: grid too fine for a 62-bit index");
    const auto n = static_cast<std::uint64_t>(spots);
    return n <= 1 ? 1 : static_cast<int>(std::bit_width(n - 1));
}

inline QuantizerSpec make_quantizer(double delta, double clamp) {
    return QuantizerSpec{delta, clamp, bits_for_grid(delta, clamp)};
}

/// Identifies the dither offset U_{ij} shared between machine j and the
/// decoder; (seed, i, j) uniquely determines the offset.
struct DitherKey {
    std::uint64_t seed = 0;
    std::uint64_t i = 1;  // coefficient index
    std::uint64_t j = 1;  // machine index
};

/// U_{ij} ~ Unif(0, delta), deterministic in the key.
inline double dither(const DitherKey& key, double delta) {
    if (!(delta > 0.0)) throw ValidationError("dither: delta must be positive");
    return delta * rng::Stream(key.seed, rng::Role::kDither, key.i, key.j).uniform(0);
}

/// Nearest point of the grid {u + i*delta}; exact midpoints resolve to the
/// lower grid point.
inline double quantize(double x, double u, double delta) {
    const double r = (x - u) / delta;
    return u + std::ceil(r - 0.5) * delta;
}

namespace detail {

// Index origin: grid step of the smallest grid point >= -clamp - delta/2.
inline std::int64_t grid_origin(double u, const QuantizerSpec& spec) {
    return static_cast<std::int64_t>(
        std::llround(std::ceil((-spec.clamp - spec.delta / 2.0 - u) / spec.delta)));
}

}  // namespace detail

/// Winsorize at [-clamp, clamp], quantize against the keyed grid, and return
/// the nonnegative grid index (< 2^bits_per_value); index 0 is the smallest
/// representable grid point.
inline std::uint64_t encode_value(double x, const DitherKey& key, const QuantizerSpec& spec) {
    const double u = dither(key, spec.delta);
    const double xc = std::clamp(x, -spec.clamp, spec.clamp);
    const auto step = static_cast<std::int64_t>(
        std::llround(std::ceil((xc - u) / spec.delta - 0.5)));
    const std::int64_t origin = detail::grid_origin(u, spec);
    const std::int64_t hi = (std::int64_t{1} << spec.bits_per_value) - 1;
    return static_cast<std::uint64_t>(std::clamp<std::int64_t>(step - origin, 0, hi));
}

/// Exact inverse of encode_value: regenerates the dither from the key and
/// returns the grid point, bit-for-bit equal to quantize(clamp(x), u, delta).
inline double decode_value(std::uint64_t index, const DitherKey& key, const QuantizerSpec& spec) {
    if (index >> spec.bits_per_value)
        throw ValidationError("decode_value: index out of range for bits_per_value");
    const double u = dither(key, spec.delta);
    const std::int64_t origin = detail::grid_origin(u, spec);
    const double step = static_cast<double>(origin + static_cast<std::int64_t>(index));
    return u + step * spec.delta;
}

}  // namespace dnpr
