#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dnpr::rng {

// Counter-based keyed streams built on the splitmix64 finalizer.  Every
// consumer of randomness derives a stream from (seed, role, a, b) and reads
// words at arbitrary counters, so any value in a simulation -- an observation,
// a dither offset, a prior draw -- can be regenerated independently without
// storing generator state.  This is what lets the decoder rebuild dither
// offsets that were never transmitted.

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t finalize(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t absorb(std::uint64_t h, std::uint64_t v) noexcept {
    return finalize((h + kGolden) ^ v);
}

/// Stream roles keep unrelated uses of the same user seed on disjoint keys.
enum class Role : std::uint64_t {
    kObservation = 0x0b5e,
    kDither = 0xd17e,
    kTheta = 0x7e7a,
    kMembership = 0x3e3b,
    kTrial = 0x771a,
    kGeneric = 0x6e0e,
};

class Stream {
public:
    Stream(std::uint64_t seed, Role role, std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
        std::uint64_t h = finalize(seed);
        h = absorb(h, static_cast<std::uint64_t>(role));
        h = absorb(h, a);
        state0_ = absorb(h, b);
    }

    std::uint64_t word(std::uint64_t counter) const noexcept {
        return finalize(state0_ + (counter + 1) * kGolden);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform(std::uint64_t counter) const noexcept {
        return static_cast<double>(word(counter) >> 11) * 0x1.0p-53;
    }

    /// Uniform in (0, 1]; safe as a log argument.
    double uniform_open(std::uint64_t counter) const noexcept {
        return static_cast<double>((word(counter) >> 11) + 1) * 0x1.0p-53;
    }

    /// One standard normal per counter (Box-Muller, two words per draw).
    double normal(std::uint64_t counter) const noexcept {
        const double u1 = uniform_open(2 * counter);
        const double u2 = uniform(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state0_;
};

/// Deterministic sub-seed derivation, e.g. per sweep point or per trial.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) noexcept {
    return absorb(absorb(finalize(seed), tag), index);
}

}  // namespace dnpr::rng
