#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dnpr/harness.hpp"
#include "dnpr/io.hpp"
#include "dnpr/lowerbound.hpp"
#include "dnpr/model.hpp"
#include "dnpr/quantizer.hpp"
#include "dnpr/stats.hpp"

namespace dnpr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitCheckFailed = 2;

inline SweepRow harness_point(const ProblemConfig& cfg, const ThetaSpec& theta,
                              std::uint64_t trials, std::uint64_t seed);
inline int run(const std::vector<std::string>& args);
inline int run_experiment_file(const std::string& path);

/// Dither-law diagnostics on X ~ N(0, 0.1 clamp^2) winsorized at [-clamp, clamp]:
/// the quantization error must be uniform on (-delta/2, delta/2), uncorrelated
/// with the input, and have second moment delta^2 / 12.
struct DitherLawReport {
    stats::KsResult ks;
    double correlation = 0.0;
    double mean_sq = 0.0;
    double expected_mean_sq = 0.0;
    bool pass_ks = false;
    bool pass_corr = false;
    bool pass_mean_sq = false;
    bool pass() const { return pass_ks && pass_corr && pass_mean_sq; }
};

inline DitherLawReport check_dither_law(double delta, double clamp, std::uint64_t samples,
                                        std::uint64_t seed) {
    if (!(delta > 0.0) || !(clamp > 0.0) || samples < 100)
        throw ValidationError("check_dither_law: need positive delta/clamp and >= 100 samples");
    const rng::Stream xs(seed, rng::Role::kGeneric, 0x715);
    const double sd = std::sqrt(0.1) * clamp;
    std::vector<double> x(samples), err(samples);
    for (std::uint64_t i = 0; i < samples; ++i) {
        const double xi = std::clamp(sd * xs.normal(i), -clamp, clamp);
        const double u = dither(DitherKey{seed, i, 0xd17e}, delta);
        x[i] = xi;
        err[i] = quantize(xi, u, delta) - xi;
    }
    DitherLawReport report;
    report.ks = stats::ks_test_uniform(err, -delta / 2.0, delta / 2.0);
    report.correlation = stats::pearson_correlation(err, x);
    double sq = 0.0;
    for (double e : err) sq += e * e;
    report.mean_sq = sq / static_cast<double>(samples);
    report.expected_mean_sq = delta * delta / 12.0;
    report.pass_ks = report.ks.p_value > 0.01;
    report.pass_corr = std::abs(report.correlation) < 0.02;
    report.pass_mean_sq = std::abs(report.mean_sq / report.expected_mean_sq - 1.0) <= 0.03;
    return report;
}

namespace detail {

struct OutputTarget {
    std::string path = "-";
    std::string format = "csv";  // csv | json

    void write(const std::string& text) const {
        if (path == "-") {
            std::cout << text;
            return;
        }
        std::ofstream os(path, std::ios::binary);
        if (!os) throw ValidationError("cannot open output path '" + path + "'");
        os << text;
        if (!os) throw ValidationError("failed writing output path '" + path + "'");
    }
};

struct ConfigFlags {
    std::uint64_t n = 0, m = 0, b = 0;
    int alpha = 1;
    double c = 0.0;
    double c_tilde = std::numeric_limits<double>::quiet_NaN();

    void add_to(CLI::App* cmd, bool required = true) {
        auto* n_opt = cmd->add_option("--n", n, "samples per machine (noise variance 1/n)");
        auto* m_opt = cmd->add_option("--m", m, "machine count");
        auto* b_opt = cmd->add_option("--b", b, "per-machine budget in bits");
        if (required) {
            n_opt->required();
            m_opt->required();
            b_opt->required();
        }
        cmd->add_option("--alpha", alpha, "smoothness order (integer >= 1)")->required();
        cmd->add_option("--c", c, "Sobolev radius")->required();
        cmd->add_option("--c-tilde", c_tilde, "ellipsoid radius (default c / pi^alpha)");
    }

    ProblemConfig build() const {
        return make_config(n, m, b, alpha, c,
                           std::isnan(c_tilde) ? std::nullopt : std::optional<double>(c_tilde));
    }
};

inline std::string render_rows(const std::vector<SweepRow>& rows, const std::string& format) {
    if (format == "csv") {
        std::ostringstream os;
        io::write_rows_csv(os, rows);
        return os.str();
    }
    return io::rows_to_json(rows).dump(2) + "\n";
}

}  // namespace detail

/// Front end.  All budgets on the command line are in bits; the lower-bound
/// solver converts to nats internally.
inline int run(int argc, const char* const* argv) {
    CLI::App app{
        "dnpr: distributed nonparametric regression simulator.\n"
        "Simulates the quantize-allocate-average protocol on the Gaussian sequence\n"
        "model, evaluates Bayesian lower bounds, and fits risk-rate slopes.\n"
        "All communication budgets are expressed in bits."};
    app.require_subcommand(1);

    // estimate
    auto* est = app.add_subcommand("estimate", "Monte Carlo risk of one configuration");
    detail::ConfigFlags est_cfg;
    est_cfg.add_to(est);
    std::string est_theta = "prior:match:1";
    std::uint64_t est_trials = 200, est_seed = 0;
    detail::OutputTarget est_out;
    est->add_option("--theta", est_theta, "spike:<i0> | poly:<kappa>:<rho> | prior:<regime>:<gamma>");
    est->add_option("--trials", est_trials, "Monte Carlo trials");
    est->add_option("--seed", est_seed, "base RNG seed");
    est->add_option("--out", est_out.path, "output path ('-' for stdout)");
    est->add_option("--format", est_out.format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));

    // sweep
    auto* swp = app.add_subcommand("sweep", "risk sweep along an axis (geometric grid)");
    detail::ConfigFlags swp_cfg;
    swp_cfg.add_to(swp);
    std::string swp_axis = "n", swp_derived, swp_theta = "prior:match:1";
    std::size_t swp_points = 5;
    double swp_from = 0.0, swp_to = 0.0, swp_gamma = 1.0;
    std::uint64_t swp_trials = 200, swp_seed = 0;
    detail::OutputTarget swp_out;
    swp->add_option("--axis", swp_axis, "n | m | b | mb | mn | mnb")
        ->check(CLI::IsMember({"n", "m", "b", "mb", "mn", "mnb"}));
    swp->add_option("--points", swp_points, "number of sweep points (>= 4)");
    swp->add_option("--from", swp_from, "first axis value")->required();
    swp->add_option("--to", swp_to, "last axis value")->required();
    swp->add_option("--derived", swp_derived,
                    "which of n/m/b absorbs the axis value (default: last axis factor)");
    swp->add_option("--theta", swp_theta, "theta spec (see estimate)");
    swp->add_option("--trials", swp_trials, "Monte Carlo trials per point");
    swp->add_option("--seed", swp_seed, "base RNG seed");
    swp->add_option("--gamma", swp_gamma, "prior tuning constant for bound columns");
    swp->add_option("--out", swp_out.path, "output path ('-' for stdout)");
    swp->add_option("--format", swp_out.format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));

    // regime
    auto* reg = app.add_subcommand("regime", "canonical slope experiment for one regime");
    std::string reg_which;
    int reg_alpha = 1;
    std::uint64_t reg_trials = 200, reg_seed = 0;
    detail::OutputTarget reg_out;
    reg->add_option("--which", reg_which, "insufficient | intermediate | sufficient")
        ->required()
        ->check(CLI::IsMember({"insufficient", "intermediate", "sufficient"}));
    reg->add_option("--alpha", reg_alpha, "smoothness order");
    reg->add_option("--trials", reg_trials, "Monte Carlo trials per point");
    reg->add_option("--seed", reg_seed, "base RNG seed");
    reg->add_option("--out", reg_out.path, "output path ('-' for stdout)");
    reg->add_option("--format", reg_out.format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));

    // bounds
    auto* bnd = app.add_subcommand("bounds", "lower-bound report for one configuration");
    detail::ConfigFlags bnd_cfg;
    bnd_cfg.add_to(bnd);
    double bnd_gamma = 1.0;
    detail::OutputTarget bnd_out;
    bnd->add_option("--gamma", bnd_gamma, "prior tuning constant");
    bnd->add_option("--out", bnd_out.path, "output path ('-' for stdout)");
    bnd->add_option("--format", bnd_out.format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));

    // quantizer-check
    auto* qc = app.add_subcommand("quantizer-check",
                                  "dither-law diagnostics (uniform, independent, delta^2/12)");
    double qc_delta = 0.01, qc_clamp = 1.0;
    std::uint64_t qc_samples = 100000, qc_seed = 0;
    qc->add_option("--delta", qc_delta, "grid step");
    qc->add_option("--clamp", qc_clamp, "winsorization bound");
    qc->add_option("--samples", qc_samples, "sample count");
    qc->add_option("--seed", qc_seed, "base RNG seed");

    // file
    auto* fil = app.add_subcommand("file", "run an experiment file (JSON, format_version 1)");
    std::string fil_path;
    fil->add_option("path", fil_path, "experiment file path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (est->parsed()) {
            const ProblemConfig cfg = est_cfg.build();
            const ThetaSpec theta = ThetaSpec::parse(est_theta);
            const SweepRow row = harness_point(cfg, theta, est_trials, est_seed);
            if (!row.ok) throw ValidationError(row.error);
            std::ostringstream os;
            if (est_out.format == "csv")
                io::write_estimate_csv(os, row);
            else
                os << io::estimate_to_json(row).dump(2) << '\n';
            est_out.write(os.str());
            return kExitOk;
        }
        if (swp->parsed()) {
            SweepSpec spec;
            spec.axis = *axis_from_name(swp_axis);
            spec.points = geometric_grid(swp_from, swp_to, swp_points);
            spec.held = swp_cfg.build();
            if (swp_derived.empty()) {
                // default: the least-significant factor of the axis label
                if (swp_axis == "mb") swp_derived = "b";
                else if (swp_axis == "mn" || swp_axis == "mnb") swp_derived = "n";
                else swp_derived = swp_axis;
            }
            if (swp_derived == "n") spec.derived = SweepParam::kN;
            else if (swp_derived == "m") spec.derived = SweepParam::kM;
            else if (swp_derived == "b") spec.derived = SweepParam::kB;
            else throw ValidationError("sweep: --derived must be one of n, m, b");
            spec.theta_spec = ThetaSpec::parse(swp_theta);
            spec.trials = swp_trials;
            spec.seed = swp_seed;
            spec.gamma = swp_gamma;
            const SweepTable table = run_sweep(spec);
            swp_out.write(detail::render_rows(table.rows, swp_out.format));
            return kExitOk;
        }
        if (reg->parsed()) {
            const RegimeExperiment exp =
                regime_experiment(*regime_from_name(reg_which), reg_alpha, reg_trials, reg_seed);
            if (reg_out.format == "csv") {
                reg_out.write(detail::render_rows(exp.rows, "csv"));
            } else {
                reg_out.write(io::regime_experiment_to_json(exp).dump(2) + "\n");
            }
            std::cout << "regime=" << regime_name(exp.regime) << " slope="
                      << io::format_double(exp.fit.slope)
                      << " expected=" << io::format_double(exp.expected_exponent)
                      << " tolerance=" << io::format_double(exp.tolerance)
                      << " pass=" << (exp.pass ? "true" : "false") << '\n';
            return exp.pass ? kExitOk : kExitCheckFailed;
        }
        if (bnd->parsed()) {
            const BoundReport report = bound_report(bnd_cfg.build(), bnd_gamma);
            std::ostringstream os;
            if (bnd_out.format == "csv")
                io::write_bound_report_csv(os, report);
            else
                os << io::bound_report_to_json(report).dump(2) << '\n';
            bnd_out.write(os.str());
            return kExitOk;
        }
        if (qc->parsed()) {
            const DitherLawReport report = check_dither_law(qc_delta, qc_clamp, qc_samples, qc_seed);
            std::cout << "ks_statistic=" << io::format_double(report.ks.statistic)
                      << " ks_p=" << io::format_double(report.ks.p_value)
                      << " corr=" << io::format_double(report.correlation)
                      << " mean_sq=" << io::format_double(report.mean_sq)
                      << " expected_mean_sq=" << io::format_double(report.expected_mean_sq)
                      << " pass=" << (report.pass() ? "true" : "false") << '\n';
            return report.pass() ? kExitOk : kExitCheckFailed;
        }
        if (fil->parsed()) return run_experiment_file(fil_path);
    } catch (const BudgetError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

/// estimate_risk + bound columns for one configuration.
inline SweepRow harness_point(const ProblemConfig& cfg, const ThetaSpec& theta,
                              std::uint64_t trials, std::uint64_t seed) {
    return dnpr::detail::evaluate_point(cfg, SweepAxis::kN, theta, trials,
                                        rng::derive(seed, 0x53eed, 0), 1.0);
}

inline int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    static const char* kName = "dnpr";
    argv.push_back(kName);
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

/// ExperimentFile: {"format_version": 1, "command": ..., "parameters": {...},
/// "output": {"path": ..., "format": ...}}.  Parameter keys are the long flag
/// names; unknown keys anywhere are rejected.
inline int run_experiment_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open experiment file '" + path + "'");
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("experiment file: ") + e.what());
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "format_version" && key != "command" && key != "parameters" && key != "output")
            throw ValidationError("experiment file: unknown key '" + key + "'");
    }
    if (!j.contains("format_version") || !j["format_version"].is_number_integer() ||
        j["format_version"].get<int>() != 1)
        throw ValidationError("experiment file: format_version must equal 1");
    if (!j.contains("command") || !j["command"].is_string())
        throw ValidationError("experiment file: missing command");
    const std::string command = j["command"].get<std::string>();
    static const std::vector<std::string> kCommands = {"estimate", "sweep", "regime", "bounds",
                                                       "quantizer-check"};
    if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
        throw ValidationError("experiment file: unknown command '" + command + "'");

    std::vector<std::string> args{command};
    if (j.contains("parameters")) {
        if (!j["parameters"].is_object())
            throw ValidationError("experiment file: parameters must be an object");
        for (const auto& [key, value] : j["parameters"].items()) {
            args.push_back("--" + key);
            if (value.is_string())
                args.push_back(value.get<std::string>());
            else
                args.push_back(value.dump());
        }
    }
    if (j.contains("output")) {
        const auto& out = j["output"];
        if (!out.is_object()) throw ValidationError("experiment file: output must be an object");
        for (const auto& [key, value] : out.items()) {
            if (key == "path") args.push_back("--out");
            else if (key == "format") args.push_back("--format");
            else throw ValidationError("experiment file: unknown output key '" + key + "'");
            args.push_back(value.get<std::string>());
        }
    }
    return run(args);
}

}  // namespace dnpr::cli
