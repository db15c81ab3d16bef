#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dnpr/error.hpp"

namespace dnpr::stats {

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0;  // unbiased sample variance
    std::size_t count = 0;

    double std_error() const {
        return count > 1 ? std::sqrt(variance / static_cast<double>(count)) : 0.0;
    }
};

inline MeanVar mean_var(std::span<const double> xs) {
    MeanVar out;
    out.count = xs.size();
    if (xs.empty()) return out;
    double s = 0.0;
    for (double x : xs) s += x;
    out.mean = s / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) {
            const double d = x - out.mean;
            ss += d * d;
        }
        out.variance = ss / static_cast<double>(xs.size() - 1);
    }
    return out;
}

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ValidationError("pearson_correlation: need two equal-length samples of size >= 2");
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

/// Kolmogorov distribution tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_tail(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1) ? term : -term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// One-sample KS test against Unif(lo, hi), asymptotic p-value with the
/// Stephens small-sample correction.
inline KsResult ks_test_uniform(std::span<const double> sample, double lo, double hi) {
    if (sample.empty() || hi <= lo) throw ValidationError("ks_test_uniform: bad inputs");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = std::clamp((sorted[i] - lo) / (hi - lo), 0.0, 1.0);
        const double hi_gap = (static_cast<double>(i) + 1.0) / n - f;
        const double lo_gap = f - static_cast<double>(i) / n;
        d = std::max({d, hi_gap, lo_gap});
    }
    const double root_n = std::sqrt(n);
    KsResult out;
    out.statistic = d;
    out.p_value = kolmogorov_tail((root_n + 0.12 + 0.11 / root_n) * d);
    return out;
}

}  // namespace dnpr::stats
