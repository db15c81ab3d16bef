#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dnpr/error.hpp"
#include "dnpr/lowerbound.hpp"
#include "dnpr/model.hpp"
#include "dnpr/protocol.hpp"
#include "dnpr/rng.hpp"
#include "dnpr/stats.hpp"

namespace dnpr {

// --- worker pool ---------------------------------------------------------------

/// Worker cap: DNPR_WORKERS if set, else hardware concurrency.
inline unsigned worker_count() {
    if (const char* env = std::getenv("DNPR_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw >= 1 ? hw : 1;
}

namespace detail {

/// Runs fn(i) for i in [0, count); results must be written to per-index slots
/// so the outcome is independent of scheduling.
template <typename Fn>
void parallel_for(std::uint64_t count, Fn&& fn) {
    const unsigned workers = std::min<std::uint64_t>(worker_count(), count);
    if (workers <= 1) {
        for (std::uint64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::uint64_t i = w; i < count; i += workers) fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// --- theta recipes ---------------------------------------------------------------

/// Config-independent recipe for the coefficient sequence of a simulation;
/// materialized into a concrete CoefficientSpec once the problem instance is
/// known.  CLI grammar: spike:<i0> | poly:<kappa>:<rho> | prior:<regime>:<gamma>
/// (regime may be "match" to follow the config's classification).
struct ThetaSpec {
    enum class Kind { kSpike, kPoly, kPrior };
    Kind kind = Kind::kPrior;
    std::uint64_t spike_index = 1;
    double kappa = 0.5;
    double rho = 0.5;
    std::optional<Regime> prior_regime;  // nullopt: match classify_regime(config)
    double gamma = 1.0;
    MembershipMode mode = MembershipMode::kReject;
    std::optional<std::size_t> length;  // deterministic kinds; default 4*ceil((mn)^{1/(2a+1)})

    CoefficientSpec materialize(const ProblemConfig& cfg) const {
        switch (kind) {
            case Kind::kSpike: {
                std::size_t len = length.value_or(default_sequence_length(cfg));
                len = std::max<std::size_t>(len, spike_index);
                return CoefficientSpec{SingleSpike{spike_index}, len};
            }
            case Kind::kPoly: {
                const std::size_t len = length.value_or(default_sequence_length(cfg));
                return CoefficientSpec{PolynomialDecay{kappa, rho}, len};
            }
            case Kind::kPrior: {
                const Regime regime = prior_regime.value_or(classify_regime(cfg));
                const PriorSpec prior = prior_for_regime(cfg, regime, gamma);
                return theta_spec_from_prior(prior, mode);
            }
        }
        throw ValidationError("ThetaSpec: unknown kind");
    }

    std::string to_string() const {
        switch (kind) {
            case Kind::kSpike: return "spike:" + std::to_string(spike_index);
            case Kind::kPoly:
                return "poly:" + std::to_string(kappa) + ":" + std::to_string(rho);
            case Kind::kPrior:
                return std::string("prior:") +
                       (prior_regime ? regime_name(*prior_regime) : "match") + ":" +
                       std::to_string(gamma);
        }
        return "?";
    }

    static ThetaSpec parse(const std::string& text);
};

inline ThetaSpec ThetaSpec::parse(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t colon = text.find(':', start);
        parts.push_back(text.substr(start, colon - start));
        if (colon == std::string::npos) break;
        start = colon + 1;
    }
    const auto as_double = [&](const std::string& s, const char* what) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ValidationError(std::string("theta spec: bad ") + what + " '" + s + "'");
        }
    };
    ThetaSpec spec;
    if (parts[0] == "spike" && parts.size() == 2) {
        spec.kind = Kind::kSpike;
        const double idx = as_double(parts[1], "spike index");
        if (!(idx >= 1.0)) throw ValidationError("theta spec: spike index must be >= 1");
        spec.spike_index = static_cast<std::uint64_t>(idx);
        return spec;
    }
    if (parts[0] == "poly" && parts.size() == 3) {
        spec.kind = Kind::kPoly;
        spec.kappa = as_double(parts[1], "kappa");
        spec.rho = as_double(parts[2], "rho");
        return spec;
    }
    if (parts[0] == "prior" && parts.size() == 3) {
        spec.kind = Kind::kPrior;
        if (parts[1] != "match") {
            const auto regime = regime_from_name(parts[1]);
            if (!regime) throw ValidationError("theta spec: unknown regime '" + parts[1] + "'");
            spec.prior_regime = regime;
        }
        spec.gamma = as_double(parts[2], "gamma");
        return spec;
    }
    throw ValidationError("theta spec: expected spike:<i0>, poly:<kappa>:<rho>, or prior:<regime>:<gamma>");
}

// --- risk estimation ---------------------------------------------------------------

struct RiskComponents {
    double sampling_var = 0.0;
    double quant_var = 0.0;
    double tail_bias = 0.0;
};

struct RiskReport {
    ProblemConfig config;
    ProtocolPlan plan;
    std::uint64_t trials = 0;
    double mean_risk = 0.0;
    double std_error = 0.0;
    RiskComponents components;
    CoefficientSpec theta_spec{SingleSpike{1}, 1};
    std::uint64_t messages_encoded = 0;  // all passed the hard budget check
};

/// Section 4.3-style bound: istar/(n k) + istar delta^2 / (3 k) + bias, with
/// the worst-case bias c~^2 / istar^{2 alpha} unless an exact tail is given.
struct UpperBound {
    double sampling = 0.0;
    double quantization = 0.0;
    double bias = 0.0;
    double total = 0.0;
};

inline UpperBound analytic_upper_bound(const ProtocolPlan& plan,
                                       std::optional<double> theta_tail = std::nullopt) {
    UpperBound ub;
    const double istar = static_cast<double>(plan.istar);
    const double k = static_cast<double>(plan.k);
    const double n = static_cast<double>(plan.config.n);
    ub.sampling = istar / (n * k);
    ub.quantization = istar * plan.delta * plan.delta / (3.0 * k);
    ub.bias = theta_tail.value_or(plan.config.c_tilde * plan.config.c_tilde /
                                  std::pow(istar, 2.0 * plan.config.alpha));
    ub.total = ub.sampling + ub.quantization + ub.bias;
    return ub;
}

/// Monte Carlo risk of the full encode/transmit/decode pipeline under an
/// explicit plan.  Per trial, the quantization-off path (exact clamped values
/// on the same noise streams) separates the sampling and quantization
/// components; the tail component is computed exactly from the stored theta.
inline RiskReport estimate_risk_with_plan(const ProtocolPlan& plan, const ThetaSpec& theta_spec,
                                          std::uint64_t trials, std::uint64_t seed) {
    if (trials < 1) throw ValidationError("estimate_risk: trials must be >= 1");
    const ProblemConfig& cfg = plan.config;
    const CoefficientSpec spec = theta_spec.materialize(cfg);
    const bool random_theta = std::holds_alternative<GaussianPriorDraw>(spec.kind);
    const CoefficientSequence fixed_theta =
        random_theta ? CoefficientSequence{} : sample_coefficients(spec, cfg.c_tilde, cfg.alpha, seed);

    const std::uint64_t max_index = plan_max_index(plan);
    const std::uint64_t istar = plan.istar;

    std::vector<double> risk(trials), samp(trials), quant(trials), tail(trials);

    detail::parallel_for(trials, [&](std::uint64_t t) {
        const std::uint64_t trial_seed = rng::derive(seed, 0x7217a1, t);
        const std::uint64_t obs_seed = rng::derive(trial_seed, 0x0b5e);
        const CoefficientSequence theta =
            random_theta
                ? sample_coefficients(spec, cfg.c_tilde, cfg.alpha, rng::derive(trial_seed, 0x7e7a))
                : fixed_theta;

        // Padded view of theta out to the largest transmitted index.
        std::vector<double> padded(std::max<std::uint64_t>(max_index, theta.values.size()), 0.0);
        std::copy(theta.values.begin(), theta.values.end(), padded.begin());

        const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.n));
        std::vector<Message> messages;
        messages.reserve(cfg.m);
        std::vector<double> clamped_sum(istar, 0.0);
        std::vector<std::uint64_t> clamped_count(istar, 0);
        ObservationRow row;
        for (std::uint64_t j = 1; j <= cfg.m; ++j) {
            row.machine = j;
            row.values.assign(max_index, 0.0);
            for (const std::uint64_t i : index_set(plan, j)) {
                const double x = padded[i - 1] + sd * observation_noise(obs_seed, j, i);
                row.values[i - 1] = x;
                if (i <= istar) {
                    clamped_sum[i - 1] += std::clamp(x, -cfg.c_tilde, cfg.c_tilde);
                    ++clamped_count[i - 1];
                }
            }
            messages.push_back(local_encode(plan, row, obs_seed));
        }
        const Estimate est = central_decode(plan, messages, obs_seed);

        double r_total = 0.0, r_samp = 0.0, r_quant = 0.0;
        for (std::uint64_t i = 0; i < istar; ++i) {
            const double theta_i = padded[i];
            const double xbar = clamped_count[i] > 0
                                    ? clamped_sum[i] / static_cast<double>(clamped_count[i])
                                    : 0.0;
            const double d_total = est.values[i] - theta_i;
            const double d_samp = xbar - theta_i;
            const double d_quant = est.values[i] - xbar;
            r_total += d_total * d_total;
            r_samp += d_samp * d_samp;
            r_quant += d_quant * d_quant;
        }
        double r_tail = 0.0;
        for (std::size_t i = istar; i < theta.values.size(); ++i)
            r_tail += theta.values[i] * theta.values[i];

        risk[t] = r_total + r_tail;
        samp[t] = r_samp;
        quant[t] = r_quant;
        tail[t] = r_tail;
    });

    RiskReport report;
    report.config = cfg;
    report.plan = plan;
    report.trials = trials;
    report.theta_spec = spec;
    report.messages_encoded = trials * cfg.m;
    const auto mv = stats::mean_var(risk);
    report.mean_risk = mv.mean;
    report.std_error = mv.std_error();
    report.components.sampling_var = stats::mean_var(samp).mean;
    report.components.quant_var = stats::mean_var(quant).mean;
    report.components.tail_bias = stats::mean_var(tail).mean;
    return report;
}

inline RiskReport estimate_risk(const ProblemConfig& cfg, const ThetaSpec& theta_spec,
                                std::uint64_t trials, std::uint64_t seed) {
    return estimate_risk_with_plan(make_plan(cfg), theta_spec, trials, seed);
}

// --- slope fitting ---------------------------------------------------------------

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

inline SlopeFit fit_slope(std::span<const double> x, std::span<const double> y, bool log_log) {
    if (x.size() != y.size()) throw ValidationError("fit_slope: mismatched point counts");
    if (x.size() < 2) throw ValidationError("fit_slope: need at least two points");
    std::vector<double> xs(x.begin(), x.end());
    std::vector<double> ys(y.begin(), y.end());
    if (log_log) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
                throw ValidationError("fit_slope: log-log fit needs positive values");
            xs[i] = std::log(xs[i]);
            ys[i] = std::log(ys[i]);
        }
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) throw ValidationError("fit_slope: degenerate abscissa");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    const double ss_res = syy - sxy * sxy / sxx;
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return fit;
}

// --- sweeps ---------------------------------------------------------------

enum class SweepAxis { kMb, kMn, kMnb, kN, kM, kB };
enum class SweepParam { kN, kM, kB };

inline const char* axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::kMb: return "mb";
        case SweepAxis::kMn: return "mn";
        case SweepAxis::kMnb: return "mnb";
        case SweepAxis::kN: return "n";
        case SweepAxis::kM: return "m";
        case SweepAxis::kB: return "b";
    }
    return "?";
}

inline std::optional<SweepAxis> axis_from_name(const std::string& s) {
    if (s == "mb") return SweepAxis::kMb;
    if (s == "mn") return SweepAxis::kMn;
    if (s == "mnb") return SweepAxis::kMnb;
    if (s == "n") return SweepAxis::kN;
    if (s == "m") return SweepAxis::kM;
    if (s == "b") return SweepAxis::kB;
    return std::nullopt;
}

inline bool axis_contains(SweepAxis axis, SweepParam p) {
    switch (axis) {
        case SweepAxis::kMb: return p == SweepParam::kM || p == SweepParam::kB;
        case SweepAxis::kMn: return p == SweepParam::kM || p == SweepParam::kN;
        case SweepAxis::kMnb: return true;
        case SweepAxis::kN: return p == SweepParam::kN;
        case SweepAxis::kM: return p == SweepParam::kM;
        case SweepAxis::kB: return p == SweepParam::kB;
    }
    return false;
}

/// Geometric grid of `count` points from `from` to `to` inclusive.
inline std::vector<double> geometric_grid(double from, double to, std::size_t count) {
    if (!(from > 0.0) || !(to > 0.0) || count < 2)
        throw ValidationError("geometric_grid: need positive endpoints and >= 2 points");
    std::vector<double> out(count);
    const double ratio = std::log(to / from) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out[i] = from * std::exp(ratio * static_cast<double>(i));
    return out;
}

/// One sweep: the axis names the composite product; `derived` is the factor
/// recomputed from each axis value while the other factors stay at their held
/// values.
struct SweepSpec {
    SweepAxis axis = SweepAxis::kN;
    std::vector<double> points;
    ProblemConfig held;
    SweepParam derived = SweepParam::kN;
    ThetaSpec theta_spec;
    std::uint64_t trials = 200;
    std::uint64_t seed = 0;
    double gamma = 1.0;  // for the lower-bound columns
};

struct SweepRow {
    double axis_value = 0.0;  // realized product after integer rounding
    ProblemConfig config;
    Regime regime = Regime::kInsufficient;
    bool ok = false;
    std::string error;
    RiskReport report;
    double lower_solver = 0.0;
    double lower_closed = 0.0;
    double upper_total = 0.0;
};

struct SweepTable {
    SweepSpec spec;
    std::vector<SweepRow> rows;
};

namespace detail {

inline ProblemConfig config_for_axis_value(const SweepSpec& spec, double value) {
    ProblemConfig cfg = spec.held;
    double divisor = 1.0;
    const bool uses_n = axis_contains(spec.axis, SweepParam::kN);
    const bool uses_m = axis_contains(spec.axis, SweepParam::kM);
    const bool uses_b = axis_contains(spec.axis, SweepParam::kB);
    if (uses_n && spec.derived != SweepParam::kN) divisor *= static_cast<double>(cfg.n);
    if (uses_m && spec.derived != SweepParam::kM) divisor *= static_cast<double>(cfg.m);
    if (uses_b && spec.derived != SweepParam::kB) divisor *= static_cast<double>(cfg.b);
    const double derived_value = std::max(1.0, std::round(value / divisor));
    if (!(derived_value < 9.2e18)) throw ValidationError("sweep: derived parameter overflows");
    const auto derived_int = static_cast<std::uint64_t>(derived_value);
    switch (spec.derived) {
        case SweepParam::kN: cfg.n = derived_int; break;
        case SweepParam::kM: cfg.m = derived_int; break;
        case SweepParam::kB: cfg.b = derived_int; break;
    }
    return make_config(cfg.n, cfg.m, cfg.b, cfg.alpha, cfg.c, cfg.c_tilde);
}

inline double realized_axis_value(SweepAxis axis, const ProblemConfig& cfg) {
    double v = 1.0;
    if (axis_contains(axis, SweepParam::kN)) v *= static_cast<double>(cfg.n);
    if (axis_contains(axis, SweepParam::kM)) v *= static_cast<double>(cfg.m);
    if (axis_contains(axis, SweepParam::kB)) v *= static_cast<double>(cfg.b);
    return v;
}

inline SweepRow evaluate_point(const ProblemConfig& cfg, SweepAxis axis, const ThetaSpec& theta,
                               std::uint64_t trials, std::uint64_t point_seed, double gamma) {
    SweepRow row;
    row.config = cfg;
    row.axis_value = realized_axis_value(axis, cfg);
    row.regime = classify_regime(cfg);
    try {
        row.report = estimate_risk(cfg, theta, trials, point_seed);
        const BoundReport bounds = bound_report(cfg, gamma);
        row.lower_solver = bounds.solver_value;
        row.lower_closed = bounds.closed_form_value;
        row.upper_total = analytic_upper_bound(row.report.plan).total;
        row.ok = true;
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

}  // namespace detail

/// Independent, reproducible rows: point i runs on seed hash(seed, i).
/// Per-point failures land in the row's error field without aborting.
inline SweepTable run_sweep(const SweepSpec& spec) {
    if (spec.points.size() < 4) throw ValidationError("run_sweep: need >= 4 points");
    if (!axis_contains(spec.axis, spec.derived))
        throw ValidationError("run_sweep: derived parameter is not a factor of the axis");
    SweepTable table;
    table.spec = spec;
    table.rows.resize(spec.points.size());
    for (std::size_t p = 0; p < spec.points.size(); ++p) {
        const std::uint64_t point_seed = rng::derive(spec.seed, 0x53eed, p);
        try {
            const ProblemConfig cfg = detail::config_for_axis_value(spec, spec.points[p]);
            table.rows[p] = detail::evaluate_point(cfg, spec.axis, spec.theta_spec, spec.trials,
                                                   point_seed, spec.gamma);
        } catch (const std::exception& e) {
            table.rows[p].axis_value = spec.points[p];
            table.rows[p].error = e.what();
        }
    }
    return table;
}

// --- canonical regime experiments ---------------------------------------------------

struct RegimeExperiment {
    Regime regime = Regime::kInsufficient;
    int alpha = 1;
    SweepAxis axis = SweepAxis::kMb;
    double expected_exponent = 0.0;
    double tolerance = 0.0;
    SlopeFit fit;
    bool pass = false;
    std::vector<SweepRow> rows;
};

namespace detail {

// Fixed point of b = btilde * b0 when delta = (m b)^{-(2a+1)/2}; the update is
// monotone in b0, so it converges or hits the width cap.
inline int fixed_point_b0(std::uint64_t m, std::uint64_t btilde, int alpha, double c_tilde) {
    int b0 = 8;
    for (int it = 0; it < 64; ++it) {
        const double mb = static_cast<double>(m * btilde * static_cast<std::uint64_t>(b0));
        const double delta = std::pow(mb, -(2.0 * alpha + 1.0) / 2.0);
        const int next = bits_for_grid(delta, c_tilde);
        if (next == b0) return b0;
        b0 = next;
    }
    throw ValidationError("fixed_point_b0: width iteration did not settle");
}

inline ProblemConfig regime_config_checked(std::uint64_t n, std::uint64_t m, std::uint64_t b,
                                           int alpha, Regime want) {
    const ProblemConfig cfg =
        make_config(n, m, b, alpha, std::pow(std::numbers::pi, alpha), 1.0);
    if (classify_regime(cfg) != want)
        throw ValidationError(std::string("regime_experiment: lattice point left the ") +
                              regime_name(want) + " regime");
    return cfg;
}

}  // namespace detail

/// Canonical five-point sweep for a regime; fits the log-log slope of the
/// Monte Carlo risk against the regime's composite axis and compares it with
/// the theoretical exponent (-2a, -a/(a+1), -2a/(2a+1)).
inline RegimeExperiment regime_experiment(Regime regime, int alpha, std::uint64_t trials,
                                          std::uint64_t seed) {
    if (alpha < 1) throw ValidationError("regime_experiment: alpha must be >= 1");
    const double a = static_cast<double>(alpha);
    RegimeExperiment exp;
    exp.regime = regime;
    exp.alpha = alpha;

    std::vector<ProblemConfig> configs;
    ThetaSpec theta;
    theta.kind = ThetaSpec::Kind::kPrior;
    theta.prior_regime = regime;
    theta.gamma = 1.0;

    switch (regime) {
        case Regime::kInsufficient: {
            // Machines carry the axis; each sends exactly btilde values, so
            // istar grows linearly in m and the bias dominates at rate
            // (mb)^{-2a}.  n is set for a regime-inequality safety factor > 4.
            exp.axis = SweepAxis::kMb;
            exp.expected_exponent = -2.0 * a;
            exp.tolerance = 0.3;
            const std::uint64_t btilde = alpha == 1 ? 8 : 4;
            const std::vector<std::uint64_t> ms =
                alpha == 1 ? std::vector<std::uint64_t>{8, 16, 32, 64, 128}
                           : std::vector<std::uint64_t>{2, 3, 4, 6, 8};
            std::uint64_t mb_max = 0;
            std::vector<std::uint64_t> bs;
            for (const std::uint64_t m : ms) {
                const int b0 = detail::fixed_point_b0(m, btilde, alpha, 1.0);
                bs.push_back(btilde * static_cast<std::uint64_t>(b0));
                mb_max = std::max(mb_max, m * bs.back());
            }
            const double n_raw = std::pow(4.2 * static_cast<double>(mb_max), 2.0 * a + 1.0);
            if (!(n_raw >= 1.0))
                throw ValidationError("regime_experiment: invalid sample-size target");
            const auto n = static_cast<std::uint64_t>(std::min(n_raw, 4.0e17));
            for (std::size_t i = 0; i < ms.size(); ++i) {
                const ProblemConfig cfg =
                    detail::regime_config_checked(n, ms[i], bs[i], alpha, regime);
                const ProtocolPlan plan = make_plan(cfg);
                if (plan.k != 1)
                    throw ValidationError("regime_experiment: insufficient lattice needs k = 1");
                configs.push_back(cfg);
            }
            break;
        }
        case Regime::kSufficient: {
            // Budget scales as b0 * (mn)^{1/(2a+1)} with margin, so the
            // truncation sits at the effective dimension and the risk tracks
            // (mn)^{-2a/(2a+1)}.
            exp.axis = SweepAxis::kMn;
            exp.expected_exponent = -2.0 * a / (2.0 * a + 1.0);
            exp.tolerance = 0.1;
            const std::uint64_t m = 8;
            for (double n = 1e4; n <= 1.01e8; n *= 10.0) {
                const double delta = std::pow(n, -0.5);
                const int b0 = bits_for_grid(delta, 1.0);
                const double dim = std::pow(m * n, 1.0 / (2.0 * a + 1.0));
                const auto b = static_cast<std::uint64_t>(std::ceil(1.25 * b0 * dim));
                const ProblemConfig cfg = detail::regime_config_checked(
                    static_cast<std::uint64_t>(n), m, b, alpha, regime);
                const ProtocolPlan plan = make_plan(cfg);
                if (plan.k != m)
                    throw ValidationError("regime_experiment: sufficient lattice needs k = m");
                configs.push_back(cfg);
            }
            break;
        }
        case Regime::kIntermediate: {
            // b pinned to (mn)^{1/(2a+1)}/4 keeps both regime inequalities at
            // safety factor >= 4 and the replication count strictly inside
            // (1, m); the risk then tracks (mnb)^{-a/(a+1)}.
            exp.axis = SweepAxis::kMnb;
            exp.expected_exponent = -a / (a + 1.0);
            exp.tolerance = 0.12;
            const std::uint64_t m = 64;
            for (double n = 1e6; n <= 2.6e8; n *= 4.0) {
                const double dim = std::pow(m * n, 1.0 / (2.0 * a + 1.0));
                const auto b = static_cast<std::uint64_t>(std::max(1.0, std::floor(dim / 4.0)));
                const ProblemConfig cfg = detail::regime_config_checked(
                    static_cast<std::uint64_t>(n), m, b, alpha, regime);
                const ProtocolPlan plan = make_plan(cfg);
                if (plan.k <= 1 || plan.k >= m)
                    throw ValidationError("regime_experiment: intermediate lattice needs 1 < k < m");
                configs.push_back(cfg);
            }
            break;
        }
    }

    exp.rows.resize(configs.size());
    for (std::size_t p = 0; p < configs.size(); ++p) {
        const std::uint64_t point_seed = rng::derive(seed, 0x53eed, p);
        exp.rows[p] =
            detail::evaluate_point(configs[p], exp.axis, theta, trials, point_seed, theta.gamma);
        if (!exp.rows[p].ok)
            throw SolverError("regime_experiment: point failed: " + exp.rows[p].error, 0.0);
    }

    std::vector<double> xs, ys;
    for (const SweepRow& row : exp.rows) {
        xs.push_back(row.axis_value);
        ys.push_back(row.report.mean_risk);
    }
    exp.fit = fit_slope(xs, ys, true);
    exp.pass = std::abs(exp.fit.slope - exp.expected_exponent) <= exp.tolerance;
    return exp;
}

/// 27 configurations spanning the three regimes (9 each), used for the
/// sandwich-ordering comparison of solver bound, Monte Carlo risk, and the
/// analytic upper bound.
inline std::vector<ProblemConfig> sandwich_lattice(int alpha = 1) {
    std::vector<ProblemConfig> out;
    const double a = static_cast<double>(alpha);
    for (const std::uint64_t m : {4ull, 8ull, 16ull}) {
        for (const double n : {1e12, 1e13, 1e14}) {
            const int b0 = detail::fixed_point_b0(m, 8, alpha, 1.0);
            out.push_back(detail::regime_config_checked(static_cast<std::uint64_t>(n), m,
                                                        8ull * static_cast<std::uint64_t>(b0),
                                                        alpha, Regime::kInsufficient));
        }
    }
    for (const std::uint64_t m : {2ull, 4ull, 8ull}) {
        for (const double n : {1e4, 1e5, 1e6}) {
            const int b0 = bits_for_grid(std::pow(n, -0.5), 1.0);
            const double dim = std::pow(static_cast<double>(m) * n, 1.0 / (2.0 * a + 1.0));
            const auto b = static_cast<std::uint64_t>(std::ceil(1.25 * b0 * dim));
            out.push_back(detail::regime_config_checked(static_cast<std::uint64_t>(n), m, b, alpha,
                                                        Regime::kSufficient));
        }
    }
    for (const std::uint64_t m : {32ull, 64ull, 128ull}) {
        for (const double n : {1e6, 8e6, 6.4e7}) {
            const double dim = std::pow(static_cast<double>(m) * n, 1.0 / (2.0 * a + 1.0));
            const auto b = static_cast<std::uint64_t>(std::max(1.0, std::floor(dim / 4.0)));
            out.push_back(detail::regime_config_checked(static_cast<std::uint64_t>(n), m, b, alpha,
                                                        Regime::kIntermediate));
        }
    }
    return out;
}

}  // namespace dnpr
