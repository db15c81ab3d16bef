#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "dnpr/error.hpp"
#include "dnpr/model.hpp"
#include "dnpr/rng.hpp"

namespace dnpr {

// Bayesian lower-bound machinery: Gaussian prior constructions per regime, the
// budget-constrained Bayes-risk optimization they induce, and the closed-form
// relaxations of that optimization used for rate arithmetic.

/// Gaussian prior on the first ell coefficients.  The budget constraint of the
/// optimization below is stated in nats; budgets arrive in bits and are
/// converted at the boundary.
struct PriorSpec {
    std::uint64_t ell = 1;
    std::vector<double> variances;  // sigma_1^2 .. sigma_ell^2
    double gamma = 1.0;
    Regime regime = Regime::kInsufficient;
};

/// (sum_i i^{2 alpha} sigma_i^2) / (max_i i^{2 alpha} sigma_i^2); the
/// finite-sample flatness proxy.  The flat profiles attain roughly
/// ell / (2 alpha + 1).
inline double flatness_ratio(std::span<const double> variances, int alpha) {
    if (variances.empty()) throw ValidationError("flatness_ratio: empty variance profile");
    double sum = 0.0, top = 0.0;
    for (std::size_t i = 0; i < variances.size(); ++i) {
        const double w = ell_weight(i + 1, alpha) * variances[i];
        sum += w;
        top = std::max(top, w);
    }
    return top > 0.0 ? sum / top : 0.0;
}

namespace detail {

inline void validate_prior(const PriorSpec& prior, const ProblemConfig& cfg) {
    const double cap = cfg.c_tilde * cfg.c_tilde;
    double sum = 0.0;
    for (std::size_t i = 0; i < prior.variances.size(); ++i)
        sum += ell_weight(i + 1, cfg.alpha) * prior.variances[i];
    if (sum > cap * (1.0 + 1e-12))
        throw ValidationError("prior_for_regime: profile leaves the ellipsoid");
    const double ratio = flatness_ratio(prior.variances, cfg.alpha);
    if (ratio < static_cast<double>(prior.ell) / (2.0 * cfg.alpha + 1.0) * (1.0 - 1e-9))
        throw ValidationError("prior_for_regime: variance profile is not flat enough");
}

}  // namespace detail

/// Prior dimension and variance profile for a regime:
///   insufficient:  ell = gamma m b,            sigma_i^2 = c~^2 / (i^{2a} ell)
///   intermediate:  ell = (gamma m b n)^{1/(2a+2)},  flat sigma_i^2 = c~^2 / sum i^{2a}
///   sufficient:    ell = (gamma m n)^{1/(2a+1)},    flat sigma_i^2 = c~^2 / sum i^{2a}
inline PriorSpec prior_for_regime(const ProblemConfig& cfg, Regime regime, double gamma) {
    if (!(gamma > 0.0)) throw ValidationError("prior_for_regime: gamma must be positive");
    const double m = static_cast<double>(cfg.m);
    const double b = static_cast<double>(cfg.b);
    const double n = static_cast<double>(cfg.n);
    const double a = static_cast<double>(cfg.alpha);
    double raw = 0.0;
    switch (regime) {
        case Regime::kInsufficient: raw = gamma * m * b; break;
        case Regime::kIntermediate: raw = std::pow(gamma * m * b * n, 1.0 / (2.0 * a + 2.0)); break;
        case Regime::kSufficient: raw = std::pow(gamma * m * n, 1.0 / (2.0 * a + 1.0)); break;
    }
    const auto ell_signed = std::llround(raw);
    if (ell_signed < 1) throw ValidationError("prior_for_regime: gamma yields prior dimension < 1");
    if (raw > 5e7) throw ValidationError("prior_for_regime: prior dimension too large to materialize");

    PriorSpec prior;
    prior.ell = static_cast<std::uint64_t>(ell_signed);
    prior.gamma = gamma;
    prior.regime = regime;
    prior.variances.resize(prior.ell);
    const double cap = cfg.c_tilde * cfg.c_tilde;
    if (regime == Regime::kInsufficient) {
        for (std::uint64_t i = 1; i <= prior.ell; ++i)
            prior.variances[i - 1] = cap / (ell_weight(i, cfg.alpha) * static_cast<double>(prior.ell));
    } else {
        double weight_sum = 0.0;
        for (std::uint64_t i = 1; i <= prior.ell; ++i) weight_sum += ell_weight(i, cfg.alpha);
        const double flat = cap / weight_sum;
        std::fill(prior.variances.begin(), prior.variances.end(), flat);
    }
    // Guard against summation rounding pushing the profile a few ulps outside.
    double sum = 0.0;
    for (std::uint64_t i = 1; i <= prior.ell; ++i)
        sum += ell_weight(i, cfg.alpha) * prior.variances[i - 1];
    if (sum > cap) {
        const double shrink = cap / sum * (1.0 - 0x1.0p-50);
        for (double& v : prior.variances) v *= shrink;
    }
    detail::validate_prior(prior, cfg);
    return prior;
}

inline CoefficientSpec theta_spec_from_prior(const PriorSpec& prior,
                                             MembershipMode mode = MembershipMode::kReject) {
    return CoefficientSpec{GaussianPriorDraw{prior.variances, mode}, prior.variances.size()};
}

// --- the optimization problem ------------------------------------------------

/// Instance of the Bayes-risk optimization: minimize sum d_i subject to
///   sum_i [ (1/2) log(sigma_i^2/d_i)
///           + (m/2) log( (m/eps^2) / (1/sigma_i^2 + m/eps^2 - 1/d_i) ) ] <= m b
/// with box sigma_i^2 (eps^2/m) / (sigma_i^2 + eps^2/m) <= d_i <= sigma_i^2.
/// The budget m*b is in nats; b_bits is converted internally.
struct LowerBoundInstance {
    std::uint64_t m = 1;
    double b_bits = 1.0;
    double eps2 = 1.0;  // noise variance, 1/n
    PriorSpec prior;

    double budget_nats() const { return static_cast<double>(m) * b_bits * std::numbers::ln2; }
};

struct LowerBoundSolution {
    std::vector<double> d;
    double value = 0.0;
    double multiplier = 0.0;
    bool active = false;    // whether the bit constraint binds
    double residual = 0.0;  // budget minus constraint value at the solution (>= 0)
    int iterations = 0;
};

namespace detail {

struct Coordinate {
    double sigma2;
    double inv_total;  // A = 1/sigma^2 + m/eps^2
    double lo;         // box bottom 1/A
    double lo_clamped; // interior search bottom
    double log_signal; // log(m/eps^2)
};

// Constraint term of one coordinate; strictly convex and decreasing in d on
// the box, divergent at the bottom.
inline double g_term(const Coordinate& c, double m, double d) {
    return 0.5 * std::log(c.sigma2 / d) +
           0.5 * m * (c.log_signal - std::log(c.inv_total - 1.0 / d));
}

inline double g_deriv(const Coordinate& c, double m, double d) {
    return -0.5 / d - 0.5 * m / (d * d * (c.inv_total - 1.0 / d));
}

// Minimizer of d + lambda * g(d) over the box, by derivative bisection.
inline double d_of_lambda(const Coordinate& c, double m, double lambda) {
    if (lambda <= 0.0) return c.lo_clamped;
    if (1.0 + lambda * g_deriv(c, m, c.sigma2) <= 0.0) return c.sigma2;
    if (1.0 + lambda * g_deriv(c, m, c.lo_clamped) >= 0.0) return c.lo_clamped;
    double lo = c.lo_clamped, hi = c.sigma2;
    for (int it = 0; it < 64; ++it) {
        const double mid = 0.5 * (lo + hi);
        (1.0 + lambda * g_deriv(c, m, mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// KKT solution via bisection on the budget multiplier.  When even the box
/// bottom satisfies the budget the (clamped) bottom is returned with
/// active = false; a zero budget forces the box top exactly.
inline LowerBoundSolution solve_optimization(const LowerBoundInstance& instance) {
    const auto& prior = instance.prior;
    const std::size_t ell = prior.variances.size();
    if (ell == 0) throw ValidationError("solve_optimization: empty prior");
    if (!(instance.eps2 > 0.0)) throw ValidationError("solve_optimization: eps2 must be positive");
    if (instance.b_bits < 0.0) throw ValidationError("solve_optimization: negative budget");
    const double m = static_cast<double>(instance.m);
    const double budget = instance.budget_nats();

    std::vector<detail::Coordinate> coords(ell);
    for (std::size_t i = 0; i < ell; ++i) {
        const double s2 = prior.variances[i];
        if (!(s2 > 0.0)) throw ValidationError("solve_optimization: variances must be positive");
        detail::Coordinate c;
        c.sigma2 = s2;
        c.inv_total = 1.0 / s2 + m / instance.eps2;
        c.lo = 1.0 / c.inv_total;
        c.lo_clamped = c.lo * (1.0 + 1e-12);
        c.log_signal = std::log(m / instance.eps2);
        coords[i] = c;
    }

    LowerBoundSolution sol;
    sol.d.resize(ell);

    if (budget <= 0.0) {
        // Zero bits force every constraint term to zero, i.e. d_i = sigma_i^2.
        for (std::size_t i = 0; i < ell; ++i) sol.d[i] = coords[i].sigma2;
        sol.value = 0.0;
        for (double d : sol.d) sol.value += d;
        sol.active = true;
        sol.multiplier = std::numeric_limits<double>::infinity();
        return sol;
    }

    const auto fill_for = [&](double lambda, std::vector<double>& d) {
        double constraint = 0.0;
        for (std::size_t i = 0; i < ell; ++i) {
            d[i] = detail::d_of_lambda(coords[i], m, lambda);
            constraint += detail::g_term(coords[i], m, d[i]);
        }
        return constraint;
    };

    const double bottom_constraint = fill_for(0.0, sol.d);
    if (bottom_constraint <= budget) {
        sol.active = false;
        sol.multiplier = 0.0;
        sol.residual = budget - bottom_constraint;
        for (double d : sol.d) sol.value += d;
        return sol;
    }

    double lambda_hi = 1.0;
    std::vector<double> scratch(ell);
    double hi_constraint = fill_for(lambda_hi, scratch);
    int iterations = 0;
    while (hi_constraint > budget) {
        lambda_hi *= 2.0;
        hi_constraint = fill_for(lambda_hi, scratch);
        if (++iterations > 400)
            throw SolverError("solve_optimization: no feasible multiplier bracket",
                              hi_constraint - budget);
    }

    double lambda_lo = lambda_hi / 2.0 > 0.0 && iterations > 0 ? lambda_hi / 2.0 : 0.0;
    sol.d = scratch;  // feasible side
    double feasible_lambda = lambda_hi;
    double feasible_constraint = hi_constraint;
    for (int it = 0; it < 200; ++it) {
        ++iterations;
        const double mid = 0.5 * (lambda_lo + lambda_hi);
        const double constraint = fill_for(mid, scratch);
        if (constraint <= budget) {
            lambda_hi = mid;
            sol.d = scratch;
            feasible_lambda = mid;
            feasible_constraint = constraint;
        } else {
            lambda_lo = mid;
        }
        if (budget - feasible_constraint <= 1e-12 * std::max(budget, 1.0) &&
            lambda_hi - lambda_lo <= 1e-13 * lambda_hi)
            break;
    }

    sol.active = true;
    sol.multiplier = feasible_lambda;
    sol.residual = budget - feasible_constraint;
    sol.iterations = iterations;
    for (double d : sol.d) sol.value += d;
    if (sol.residual < 0.0)
        throw SolverError("solve_optimization: returned infeasible point", -sol.residual);
    return sol;
}

// --- closed-form relaxations --------------------------------------------------
// Each is a valid lower bound of the optimization value on the same prior.

/// ell (prod sigma_i^2)^{1/ell} e^{-2 B / ell}, via the Jensen step on the
/// log(sigma^2/d) part of the constraint.  B in nats.
inline double closed_form_insufficient(const PriorSpec& prior, double budget_nats) {
    const double ell = static_cast<double>(prior.variances.size());
    double mean_log = 0.0;
    for (double v : prior.variances) mean_log += std::log(v);
    mean_log /= ell;
    return ell * std::exp(mean_log - 2.0 * budget_nats / ell);
}

/// sum_i 1 / (1/sigma_i^2 + 2 B n / ell), from the Lagrangian step on the
/// second constraint part.  B in nats, n = 1/eps^2.
inline double closed_form_intermediate(const PriorSpec& prior, double budget_nats, double n) {
    const double ell = static_cast<double>(prior.variances.size());
    double sum = 0.0;
    for (double v : prior.variances) sum += 1.0 / (1.0 / v + 2.0 * budget_nats * n / ell);
    return sum;
}

/// sum_i sigma_i^2 x / (sigma_i^2 + x) with x = 1/(mn): the box bottom
/// (Wiener-filter risk with unlimited communication).
inline double closed_form_sufficient(const PriorSpec& prior, double mn) {
    const double x = 1.0 / mn;
    double sum = 0.0;
    for (double v : prior.variances) sum += v * x / (v + x);
    return sum;
}

inline double closed_form_on_prior(const PriorSpec& prior, const ProblemConfig& cfg, Regime regime) {
    const double budget_nats =
        static_cast<double>(cfg.m) * static_cast<double>(cfg.b) * std::numbers::ln2;
    switch (regime) {
        case Regime::kInsufficient: return closed_form_insufficient(prior, budget_nats);
        case Regime::kIntermediate:
            return closed_form_intermediate(prior, budget_nats, static_cast<double>(cfg.n));
        case Regime::kSufficient:
            return closed_form_sufficient(prior,
                                          static_cast<double>(cfg.m) * static_cast<double>(cfg.n));
    }
    throw ValidationError("closed_form_on_prior: unknown regime");
}

/// Explicit finite-ell bound for the regime, evaluated on that regime's prior.
inline double closed_form_bound(const ProblemConfig& cfg, Regime regime, double gamma) {
    const PriorSpec prior = prior_for_regime(cfg, regime, gamma);
    return closed_form_on_prior(prior, cfg, regime);
}

struct BoundReport {
    ProblemConfig config;
    Regime regime = Regime::kInsufficient;
    double solver_value = 0.0;
    double closed_form_value = 0.0;
    PriorSpec prior;
};

/// Solver value and closed-form relaxation on the regime-matched prior; the
/// solver value dominates the relaxation by construction.
inline BoundReport bound_report(const ProblemConfig& cfg, double gamma = 1.0) {
    BoundReport report;
    report.config = cfg;
    report.regime = classify_regime(cfg);
    report.prior = prior_for_regime(cfg, report.regime, gamma);
    LowerBoundInstance instance;
    instance.m = cfg.m;
    instance.b_bits = static_cast<double>(cfg.b);
    instance.eps2 = 1.0 / static_cast<double>(cfg.n);
    instance.prior = report.prior;
    report.solver_value = solve_optimization(instance).value;
    report.closed_form_value = closed_form_on_prior(report.prior, cfg, report.regime);
    return report;
}

// --- prior concentration ------------------------------------------------------

struct MembershipCheck {
    double empirical_violation_rate = 0.0;
    double lemma4_bound = 1.0;
    double tau = 0.5;
    std::uint64_t trials = 0;
    bool within_bound = true;  // empirical <= bound + 3 binomial standard errors
};

/// Sample theta_i ~ N(0, (1 - tau) sigma_i^2) and compare the empirical
/// ellipsoid-violation rate against the chi-square concentration bound
/// exp(-t^2 ratio / 8) with t = tau / (1 - tau).
inline MembershipCheck prior_membership_check(const PriorSpec& prior, int alpha, double c_tilde,
                                              std::uint64_t trials, std::uint64_t seed,
                                              double tau = 0.5) {
    if (trials < 1000) throw ValidationError("prior_membership_check: needs >= 1000 trials");
    if (!(tau > 0.0) || !(tau < 1.0)) throw ValidationError("prior_membership_check: tau in (0,1)");
    const std::size_t ell = prior.variances.size();
    std::vector<double> sd(ell);
    for (std::size_t i = 0; i < ell; ++i) sd[i] = std::sqrt((1.0 - tau) * prior.variances[i]);

    const double cap = c_tilde * c_tilde;
    std::uint64_t violations = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        const rng::Stream s(seed, rng::Role::kMembership, t);
        double norm = 0.0;
        for (std::size_t i = 0; i < ell; ++i) {
            const double theta = sd[i] * s.normal(i);
            norm += ell_weight(i + 1, alpha) * theta * theta;
        }
        if (norm > cap) ++violations;
    }

    MembershipCheck out;
    out.tau = tau;
    out.trials = trials;
    out.empirical_violation_rate = static_cast<double>(violations) / static_cast<double>(trials);
    const double t_ratio = tau / (1.0 - tau);
    const double ratio = flatness_ratio(prior.variances, alpha);
    out.lemma4_bound = std::min(1.0, std::exp(-t_ratio * t_ratio * ratio / 8.0));
    const double se =
        std::sqrt(out.lemma4_bound * (1.0 - out.lemma4_bound) / static_cast<double>(trials));
    out.within_bound = out.empirical_violation_rate <= out.lemma4_bound + 3.0 * se;
    return out;
}

}  // namespace dnpr
