#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dnpr/error.hpp"
#include "dnpr/rng.hpp"

namespace dnpr {

/// One problem instance of the distributed sequence model: m machines, each
/// observing the coefficient sequence through noise of variance 1/n, each
/// allowed b bits towards the central estimator.  The smoothness class is the
/// ellipsoid { theta : sum_i i^{2 alpha} theta_i^2 <= c_tilde^2 }, with
/// c_tilde defaulting to c / pi^alpha.
struct ProblemConfig {
    std::uint64_t n = 1;   // samples per machine; noise variance is 1/n
    std::uint64_t m = 1;   // machine count
    std::uint64_t b = 1;   // per-machine budget in bits
    int alpha = 1;         // smoothness order
    double c = 1.0;        // Sobolev radius (function scale)
    double c_tilde = 1.0;  // ellipsoid radius (coefficient scale)
};

inline ProblemConfig make_config(std::uint64_t n, std::uint64_t m, std::uint64_t b, int alpha,
                                 double c, std::optional<double> c_tilde = std::nullopt) {
    if (n < 1) throw ValidationError("make_config: n must be >= 1");
    if (m < 1) throw ValidationError("make_config: m must be >= 1");
    if (b < 1) throw ValidationError("make_config: b must be >= 1");
    if (alpha < 1) throw ValidationError("make_config: alpha must be >= 1");
    if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("make_config: c must be positive and finite");
    ProblemConfig cfg{n, m, b, alpha, c, 0.0};
    cfg.c_tilde = c_tilde.value_or(c / std::pow(std::numbers::pi, alpha));
    if (!(cfg.c_tilde > 0.0) || !std::isfinite(cfg.c_tilde))
        throw ValidationError("make_config: c_tilde must be positive and finite");
    return cfg;
}

/// Ellipsoid weight i^{2 alpha}; the single definition used everywhere so that
/// membership checks are consistent across modules.
inline double ell_weight(std::uint64_t i, int alpha) {
    return std::pow(static_cast<double>(i), 2.0 * alpha);
}

/// Finite truncation of the coefficient sequence together with the ellipsoid
/// it is meant to live in.  Entries beyond values.size() are exactly zero.
struct CoefficientSequence {
    std::vector<double> values;
    int alpha = 1;
    double c_tilde = 1.0;
};

/// sum_i i^{2 alpha} theta_i^2
inline double ellipsoid_norm(const CoefficientSequence& theta) {
    if (theta.values.empty()) throw ValidationError("ellipsoid_norm: empty sequence");
    double s = 0.0;
    for (std::size_t i = 0; i < theta.values.size(); ++i) {
        const double t = theta.values[i];
        s += ell_weight(static_cast<std::uint64_t>(i) + 1, theta.alpha) * t * t;
    }
    return s;
}

inline bool in_ellipsoid(const CoefficientSequence& theta) {
    return ellipsoid_norm(theta) <= theta.c_tilde * theta.c_tilde;
}

// --- coefficient-sequence generators -------------------------------------

/// theta_i = s * i^{-(alpha + 1/2 + kappa)}, s chosen so the ellipsoid norm
/// equals boundary_fraction * c_tilde^2.
struct PolynomialDecay {
    double kappa = 0.5;
    double boundary_fraction = 0.5;  // rho in (0, 1]
};

/// theta_{index} = c_tilde / index^alpha, all other entries zero; sits exactly
/// on the ellipsoid boundary.
struct SingleSpike {
    std::uint64_t index = 1;  // 1-based
};

enum class MembershipMode { kReject, kProject };

/// theta_i ~ N(0, variances[i-1]) with membership enforced by resampling
/// (reject) or rescaling onto the boundary (project).
struct GaussianPriorDraw {
    std::vector<double> variances;
    MembershipMode mode = MembershipMode::kReject;
};

struct CoefficientSpec {
    std::variant<PolynomialDecay, SingleSpike, GaussianPriorDraw> kind;
    std::size_t length = 1;  // stored length L (gaussian kind uses variances.size())
};

namespace detail {

// Floating-point recomputation of the norm can exceed c_tilde^2 by a few ulps
// even for sequences constructed to sit on the boundary; shrink until
// membership holds with no tolerance.
inline void enforce_membership(CoefficientSequence& theta) {
    const double cap = theta.c_tilde * theta.c_tilde;
    for (int pass = 0; pass < 64; ++pass) {
        const double norm = ellipsoid_norm(theta);
        if (norm <= cap) return;
        const double scale = std::sqrt(cap / norm) * (1.0 - 0x1.0p-48);
        for (double& v : theta.values) v *= scale;
    }
    throw SamplingError("enforce_membership: could not scale sequence into the ellipsoid");
}

}  // namespace detail

constexpr int kMaxRejectAttempts = 1000;

/// Deterministic in (spec, seed); the result always satisfies the ellipsoid
/// membership invariant exactly.
inline CoefficientSequence sample_coefficients(const CoefficientSpec& spec, double c_tilde,
                                               int alpha, std::uint64_t seed) {
    if (!(c_tilde > 0.0)) throw ValidationError("sample_coefficients: c_tilde must be positive");
    if (alpha < 1) throw ValidationError("sample_coefficients: alpha must be >= 1");
    CoefficientSequence out;
    out.alpha = alpha;
    out.c_tilde = c_tilde;

    if (const auto* poly = std::get_if<PolynomialDecay>(&spec.kind)) {
        if (spec.length < 1) throw ValidationError("sample_coefficients: length must be >= 1");
        const double rho = poly->boundary_fraction;
        if (!(rho > 0.0) || rho > 1.0)
            throw ValidationError("sample_coefficients: boundary fraction must be in (0, 1]");
        // ellipsoid norm of i^{-(alpha+1/2+kappa)} is sum i^{-(1+2 kappa)}
        double w = 0.0;
        for (std::size_t i = 1; i <= spec.length; ++i)
            w += std::pow(static_cast<double>(i), -(1.0 + 2.0 * poly->kappa));
        const double s = std::sqrt(rho * c_tilde * c_tilde / w);
        out.values.resize(spec.length);
        const double expo = -(alpha + 0.5 + poly->kappa);
        for (std::size_t i = 1; i <= spec.length; ++i)
            out.values[i - 1] = s * std::pow(static_cast<double>(i), expo);
        detail::enforce_membership(out);
        return out;
    }

    if (const auto* spike = std::get_if<SingleSpike>(&spec.kind)) {
        if (spike->index < 1 || spike->index > spec.length)
            throw ValidationError("sample_coefficients: spike index out of range");
        out.values.assign(spec.length, 0.0);
        out.values[spike->index - 1] =
            c_tilde / std::pow(static_cast<double>(spike->index), static_cast<double>(alpha));
        detail::enforce_membership(out);
        return out;
    }

    const auto& prior = std::get<GaussianPriorDraw>(spec.kind);
    if (prior.variances.empty()) throw ValidationError("sample_coefficients: empty prior");
    const std::size_t ell = prior.variances.size();
    const double cap = c_tilde * c_tilde;
    out.values.resize(ell);
    if (prior.mode == MembershipMode::kReject) {
        for (int attempt = 0; attempt < kMaxRejectAttempts; ++attempt) {
            const rng::Stream s(seed, rng::Role::kTheta, static_cast<std::uint64_t>(attempt));
            double norm = 0.0;
            for (std::size_t i = 0; i < ell; ++i) {
                out.values[i] = std::sqrt(prior.variances[i]) * s.normal(i);
                norm += ell_weight(i + 1, alpha) * out.values[i] * out.values[i];
            }
            if (norm <= cap) return out;
        }
        throw SamplingError("sample_coefficients: rejection cap reached without ellipsoid membership");
    }
    const rng::Stream s(seed, rng::Role::kTheta, 0);
    for (std::size_t i = 0; i < ell; ++i)
        out.values[i] = std::sqrt(prior.variances[i]) * s.normal(i);
    if (!in_ellipsoid(out)) {
        const double scale = std::sqrt(cap / ellipsoid_norm(out));
        for (double& v : out.values) v *= scale;
        detail::enforce_membership(out);
    }
    return out;
}

// --- observations ---------------------------------------------------------

/// The standard-normal noise entering X_{ij}; keyed by (seed, j, i) so any row
/// is regenerable independently and rows for distinct machines come from
/// disjoint stream keys.
inline double observation_noise(std::uint64_t seed, std::uint64_t machine, std::uint64_t i) {
    return rng::Stream(seed, rng::Role::kObservation, machine, i).normal(0);
}

struct ObservationRow {
    std::uint64_t machine = 1;
    std::vector<double> values;  // X_{1j} .. X_{Lj}
};

/// X_{ij} = theta_i + Z_{ij} / sqrt(n); deterministic given (seed, j).
inline ObservationRow sample_observation_row(const CoefficientSequence& theta, std::uint64_t n,
                                             std::uint64_t machine, std::uint64_t seed) {
    if (n < 1) throw ValidationError("sample_observation_row: n must be >= 1");
    if (machine < 1) throw ValidationError("sample_observation_row: machine index is 1-based");
    ObservationRow row;
    row.machine = machine;
    row.values.resize(theta.values.size());
    const double sd = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t i = 0; i < theta.values.size(); ++i)
        row.values[i] = theta.values[i] + sd * observation_noise(seed, machine, i + 1);
    return row;
}

// --- function synthesis ----------------------------------------------------

/// Trigonometric basis: phi_1 = 1, phi_{2k}(t) = sqrt(2) cos(2 pi k t),
/// phi_{2k+1}(t) = sqrt(2) sin(2 pi k t).
inline double trig_basis(std::uint64_t i, double t) {
    if (i == 1) return 1.0;
    const double k = static_cast<double>(i / 2);
    const double arg = 2.0 * std::numbers::pi * k * t;
    return std::numbers::sqrt2 * (i % 2 == 0 ? std::cos(arg) : std::sin(arg));
}

inline std::vector<double> synthesize_function(const CoefficientSequence& theta,
                                               std::span<const double> t_grid) {
    std::vector<double> out(t_grid.size(), 0.0);
    for (std::size_t g = 0; g < t_grid.size(); ++g) {
        const double t = t_grid[g];
        if (!(t >= 0.0 && t <= 1.0))
            throw ValidationError("synthesize_function: t outside [0, 1]");
        double f = 0.0;
        for (std::size_t i = 0; i < theta.values.size(); ++i)
            if (theta.values[i] != 0.0) f += theta.values[i] * trig_basis(i + 1, t);
        out[g] = f;
    }
    return out;
}

// --- regimes ----------------------------------------------------------------

enum class Regime { kInsufficient, kIntermediate, kSufficient };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::kInsufficient: return "insufficient";
        case Regime::kIntermediate: return "intermediate";
        case Regime::kSufficient: return "sufficient";
    }
    return "?";
}

inline std::optional<Regime> regime_from_name(const std::string& name) {
    if (name == "insufficient") return Regime::kInsufficient;
    if (name == "intermediate") return Regime::kIntermediate;
    if (name == "sufficient") return Regime::kSufficient;
    return std::nullopt;
}

/// Finite-sample regime rule: the strict thresholds are chosen so the tag
/// coincides with the protocol's replication branch (k = 1, 1 < k < m, k = m).
inline Regime classify_regime(const ProblemConfig& cfg) {
    const double inv = 1.0 / (2.0 * cfg.alpha + 1.0);
    const double mb = static_cast<double>(cfg.m) * static_cast<double>(cfg.b);
    const double mn = static_cast<double>(cfg.m) * static_cast<double>(cfg.n);
    if (mb <= std::pow(static_cast<double>(cfg.n), inv)) return Regime::kInsufficient;
    if (static_cast<double>(cfg.b) > std::pow(mn, inv)) return Regime::kSufficient;
    return Regime::kIntermediate;
}

/// Default stored length for truncated sequences: 4 * ceil((mn)^{1/(2 alpha + 1)}).
inline std::size_t default_sequence_length(const ProblemConfig& cfg) {
    const double mn = static_cast<double>(cfg.m) * static_cast<double>(cfg.n);
    const double dim = std::pow(mn, 1.0 / (2.0 * cfg.alpha + 1.0));
    return static_cast<std::size_t>(4.0 * std::ceil(dim));
}

}  // namespace dnpr
