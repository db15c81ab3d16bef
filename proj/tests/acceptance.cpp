// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion.  Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dnpr/cli.hpp"
#include "dnpr/harness.hpp"
#include "dnpr/io.hpp"
#include "grid_oracle.hpp"

using namespace dnpr;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

template <typename Fn>
void criterion(int id, const std::string& label, Fn&& fn) {
    const auto t0 = Clock::now();
    Outcome outcome;
    try {
        outcome = fn();
    } catch (const std::exception& e) {
        outcome.pass = false;
        outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (!outcome.pass) ++g_failures;
    std::printf("[%s] criterion %2d: %s (%s) [%.1fs]\n", outcome.pass ? "PASS" : "FAIL", id,
                label.c_str(), outcome.detail.c_str(), seconds);
    std::fflush(stdout);
}

std::string fmt(double v) { return io::format_double(v); }

// Shared state across criteria (budget accounting and determinism rerun).
std::uint64_t g_messages_checked = 0;
std::uint64_t g_budget_violations = 0;
RegimeExperiment g_insufficient_run;

void account_rows(const std::vector<SweepRow>& rows) {
    for (const SweepRow& row : rows) {
        if (!row.ok) continue;
        g_messages_checked += row.report.messages_encoded;
        const ProtocolPlan& plan = row.report.plan;
        if (plan.btilde * static_cast<std::uint64_t>(plan.b0) > plan.config.b)
            ++g_budget_violations;
    }
}

std::string render_csv(const RegimeExperiment& exp) {
    std::ostringstream os;
    io::write_rows_csv(os, exp.rows);
    return os.str();
}

}  // namespace

int main() {
    const std::uint64_t kSeed = 20240717;

    criterion(1, "dither error law at delta=0.01, clamp=1, 1e5 samples", [&] {
        const auto report = cli::check_dither_law(0.01, 1.0, 100000, kSeed);
        Outcome out;
        out.pass = report.pass_ks && report.pass_corr && report.pass_mean_sq;
        out.detail = "ks_p=" + fmt(report.ks.p_value) + " corr=" + fmt(report.correlation) +
                     " mean_sq/expected=" + fmt(report.mean_sq / report.expected_mean_sq);
        return out;
    });

    criterion(2, "insufficient-regime slope -2 +/- 0.3 (5-point mb sweep, 200 trials)", [&] {
        g_insufficient_run = regime_experiment(Regime::kInsufficient, 1, 200, kSeed);
        account_rows(g_insufficient_run.rows);
        Outcome out;
        out.pass = g_insufficient_run.pass;
        out.detail = "slope=" + fmt(g_insufficient_run.fit.slope) +
                     " r2=" + fmt(g_insufficient_run.fit.r_squared);
        return out;
    });

    criterion(3, "sufficient-regime slope -2/3 +/- 0.1 (5-point mn sweep, 200 trials)", [&] {
        const auto exp = regime_experiment(Regime::kSufficient, 1, 200, kSeed);
        account_rows(exp.rows);
        Outcome out;
        out.pass = exp.pass;
        out.detail = "slope=" + fmt(exp.fit.slope) + " r2=" + fmt(exp.fit.r_squared);
        return out;
    });

    criterion(4, "intermediate-regime slope -1/2 +/- 0.12 (5-point mnb sweep, 200 trials)", [&] {
        const auto exp = regime_experiment(Regime::kIntermediate, 1, 200, kSeed);
        account_rows(exp.rows);
        Outcome out;
        out.pass = exp.pass;
        out.detail = "slope=" + fmt(exp.fit.slope) + " r2=" + fmt(exp.fit.r_squared);
        return out;
    });

    criterion(5, "solver matches dense grid search within 1e-6 on 20 small instances", [&] {
        const rng::Stream s(kSeed, rng::Role::kGeneric, 0x05);
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            const int ell = 1 + static_cast<int>(s.uniform(4 * t) * 3.0);
            PriorSpec prior;
            prior.ell = ell;
            for (int i = 0; i < ell; ++i)
                prior.variances.push_back(0.05 + 0.95 * s.uniform(100 * t + i));
            LowerBoundInstance inst;
            inst.m = 1 + static_cast<std::uint64_t>(s.uniform(4 * t + 1) * 7.0);
            inst.b_bits = 0.25 + 3.75 * s.uniform(4 * t + 2);
            inst.eps2 = 0.1 + 1.9 * s.uniform(4 * t + 3);
            inst.prior = prior;
            const double solved = solve_optimization(inst).value;
            const double reference = grid_oracle::minimize(
                prior.variances, static_cast<double>(inst.m), inst.eps2, inst.budget_nats());
            worst = std::max(worst, std::abs(solved - reference));
        }
        Outcome out;
        out.pass = worst < 1e-6;
        out.detail = "worst |solver-grid|=" + fmt(worst);
        return out;
    });

    criterion(6, "closed-form rate slopes within 5% for alpha in {1,2}", [&] {
        Outcome out;
        out.pass = true;
        double worst_rel = 0.0;
        for (const int alpha : {1, 2}) {
            const double a = alpha;
            std::vector<double> xs, ys;
            // insufficient: axis mb
            for (double b = 1024; b <= 1.1e6; b *= 4.0) {
                const auto cfg = make_config(1, 1, static_cast<std::uint64_t>(b), alpha, 1.0, 1.0);
                xs.push_back(b);
                ys.push_back(closed_form_bound(cfg, Regime::kInsufficient, 1.0));
            }
            const double s_ins = fit_slope(xs, ys, true).slope;
            worst_rel = std::max(worst_rel, std::abs(s_ins + 2.0 * a) / (2.0 * a));
            // intermediate: axis mbn
            xs.clear();
            ys.clear();
            for (double n = 1e8; n <= 1.1e14; n *= 16.0) {
                const auto cfg = make_config(static_cast<std::uint64_t>(n), 1, 64, alpha, 1.0, 1.0);
                xs.push_back(64.0 * n);
                ys.push_back(closed_form_bound(cfg, Regime::kIntermediate, 1.0));
            }
            const double s_int = fit_slope(xs, ys, true).slope;
            const double e_int = -a / (a + 1.0);
            worst_rel = std::max(worst_rel, std::abs(s_int - e_int) / std::abs(e_int));
            // sufficient: axis mn
            xs.clear();
            ys.clear();
            for (double n = 1e6; n <= 1.1e12; n *= 16.0) {
                const auto cfg = make_config(static_cast<std::uint64_t>(n), 1, 64, alpha, 1.0, 1.0);
                xs.push_back(n);
                ys.push_back(closed_form_bound(cfg, Regime::kSufficient, 1.0));
            }
            const double s_suf = fit_slope(xs, ys, true).slope;
            const double e_suf = -2.0 * a / (2.0 * a + 1.0);
            worst_rel = std::max(worst_rel, std::abs(s_suf - e_suf) / std::abs(e_suf));
        }
        out.pass = worst_rel <= 0.05;
        out.detail = "worst relative slope error=" + fmt(worst_rel);
        return out;
    });

    criterion(7, "sandwich ordering on the 27-point lattice (matched priors, 100 trials)", [&] {
        ThetaSpec theta;
        theta.kind = ThetaSpec::Kind::kPrior;  // matched to each point's regime
        theta.gamma = 1.0;
        int violations = 0;
        std::string first;
        std::vector<SweepRow> rows;
        const auto lattice = sandwich_lattice(1);
        for (std::size_t p = 0; p < lattice.size(); ++p) {
            const SweepRow row = dnpr::detail::evaluate_point(
                lattice[p], SweepAxis::kN, theta, 100, rng::derive(kSeed, 0xacc, p), 1.0);
            if (!row.ok) {
                ++violations;
                if (first.empty()) first = row.error;
                continue;
            }
            rows.push_back(row);
            const double slack = 3.0 * row.report.std_error;
            const bool lower_ok = row.lower_solver <= row.report.mean_risk + slack;
            const bool upper_ok = row.report.mean_risk <= row.upper_total + slack;
            if (!lower_ok || !upper_ok) {
                ++violations;
                if (first.empty())
                    first = "n=" + std::to_string(row.config.n) +
                            " m=" + std::to_string(row.config.m) +
                            " b=" + std::to_string(row.config.b);
            }
        }
        account_rows(rows);
        Outcome out;
        out.pass = violations == 0;
        out.detail = "violations=" + std::to_string(violations) +
                     (first.empty() ? "" : " first=" + first);
        return out;
    });

    criterion(8, "hard per-machine budget: zero violations across criteria 2-4 and 7", [&] {
        // Message construction throws on any over-budget payload, so reaching
        // this point with all simulations complete already certifies zero
        // violations; the plan-level width check is re-asserted here.
        Outcome out;
        out.pass = g_budget_violations == 0 && g_messages_checked > 0;
        out.detail = "messages=" + std::to_string(g_messages_checked) +
                     " violations=" + std::to_string(g_budget_violations);
        return out;
    });

    criterion(9, "prior concentration: flat prior, ell=100, tau=0.5, 1e4 draws", [&] {
        PriorSpec prior;
        prior.ell = 100;
        double weight_sum = 0.0;
        for (int i = 1; i <= 100; ++i) weight_sum += ell_weight(i, 1);
        prior.variances.assign(100, 1.0 / weight_sum);
        const auto check = prior_membership_check(prior, 1, 1.0, 10000, kSeed);
        Outcome out;
        out.pass = check.within_bound;
        out.detail = "empirical=" + fmt(check.empirical_violation_rate) +
                     " bound=" + fmt(check.lemma4_bound);
        return out;
    });

    criterion(10, "determinism: criterion 2 rerun is byte-identical CSV", [&] {
        const auto rerun = regime_experiment(Regime::kInsufficient, 1, 200, kSeed);
        const std::string a = render_csv(g_insufficient_run);
        const std::string b = render_csv(rerun);
        Outcome out;
        out.pass = !a.empty() && a == b;
        out.detail = "bytes=" + std::to_string(a.size()) + (out.pass ? " identical" : " differ");
        return out;
    });

    std::printf("%d/10 criteria passed\n", 10 - g_failures);
    return g_failures;
}
