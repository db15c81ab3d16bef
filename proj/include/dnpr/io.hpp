#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dnpr/error.hpp"
#include "dnpr/harness.hpp"
#include "dnpr/lowerbound.hpp"
#include "dnpr/model.hpp"

namespace dnpr::io {

/// Shortest round-trip decimal form; keeps emitted tables byte-reproducible.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// --- coefficient sequences -----------------------------------------------------

inline void write_sequence_csv(std::ostream& os, const CoefficientSequence& seq) {
    os << "i,theta_i\n";
    for (std::size_t i = 0; i < seq.values.size(); ++i)
        os << (i + 1) << ',' << format_double(seq.values[i]) << '\n';
}

inline CoefficientSequence read_sequence_csv(std::istream& is, int alpha, double c_tilde) {
    CoefficientSequence seq;
    seq.alpha = alpha;
    seq.c_tilde = c_tilde;
    std::string line;
    if (!std::getline(is, line) || line.rfind("i,theta_i", 0) != 0)
        throw ValidationError("sequence csv: missing 'i,theta_i' header");
    std::size_t expected = 1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) throw ValidationError("sequence csv: malformed row");
        const std::size_t idx = std::stoull(line.substr(0, comma));
        if (idx != expected) throw ValidationError("sequence csv: indices must run 1..L");
        seq.values.push_back(std::stod(line.substr(comma + 1)));
        ++expected;
    }
    if (seq.values.empty()) throw ValidationError("sequence csv: no rows");
    return seq;
}

inline nlohmann::json sequence_to_json(const CoefficientSequence& seq) {
    return nlohmann::json{
        {"alpha", seq.alpha}, {"c_tilde", seq.c_tilde}, {"values", seq.values}};
}

inline CoefficientSequence sequence_from_json(const nlohmann::json& j) {
    CoefficientSequence seq;
    try {
        seq.alpha = j.at("alpha").get<int>();
        seq.c_tilde = j.at("c_tilde").get<double>();
        seq.values = j.at("values").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("sequence json: ") + e.what());
    }
    if (seq.values.empty()) throw ValidationError("sequence json: empty values");
    return seq;
}

// --- risk tables -----------------------------------------------------------------

inline constexpr const char* kRiskCsvHeader =
    "n,m,b,alpha,c_tilde,regime,trials,mean_risk,std_error,sampling_var,quant_var,tail_bias,"
    "lower_solver,lower_closed,upper_analytic";

inline void write_risk_row_csv(std::ostream& os, const SweepRow& row) {
    const ProblemConfig& c = row.config;
    os << c.n << ',' << c.m << ',' << c.b << ',' << c.alpha << ',' << format_double(c.c_tilde)
       << ',' << regime_name(row.regime) << ',' << row.report.trials << ','
       << format_double(row.report.mean_risk) << ',' << format_double(row.report.std_error) << ','
       << format_double(row.report.components.sampling_var) << ','
       << format_double(row.report.components.quant_var) << ','
       << format_double(row.report.components.tail_bias) << ','
       << format_double(row.lower_solver) << ',' << format_double(row.lower_closed) << ','
       << format_double(row.upper_total) << '\n';
}

/// CSV holds the successful rows; the JSON mirror carries failures too.
inline void write_rows_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << kRiskCsvHeader << '\n';
    for (const SweepRow& row : rows)
        if (row.ok) write_risk_row_csv(os, row);
}

inline nlohmann::json row_to_json(const SweepRow& row) {
    nlohmann::json j{{"axis_value", row.axis_value},
                     {"n", row.config.n},
                     {"m", row.config.m},
                     {"b", row.config.b},
                     {"alpha", row.config.alpha},
                     {"c_tilde", row.config.c_tilde},
                     {"regime", regime_name(row.regime)}};
    if (!row.ok) {
        j["error"] = row.error;
        return j;
    }
    j["trials"] = row.report.trials;
    j["mean_risk"] = row.report.mean_risk;
    j["std_error"] = row.report.std_error;
    j["sampling_var"] = row.report.components.sampling_var;
    j["quant_var"] = row.report.components.quant_var;
    j["tail_bias"] = row.report.components.tail_bias;
    j["lower_solver"] = row.lower_solver;
    j["lower_closed"] = row.lower_closed;
    j["upper_analytic"] = row.upper_total;
    return j;
}

inline nlohmann::json rows_to_json(const std::vector<SweepRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const SweepRow& row : rows) arr.push_back(row_to_json(row));
    return arr;
}

/// Single-row estimate output: the risk schema plus the derived plan constants.
inline void write_estimate_csv(std::ostream& os, const SweepRow& row) {
    os << kRiskCsvHeader << ",delta,b0,btilde,k,istar\n";
    if (!row.ok) throw ValidationError("write_estimate_csv: failed row: " + row.error);
    std::ostringstream line;
    write_risk_row_csv(line, row);
    std::string text = line.str();
    text.pop_back();  // newline
    const ProtocolPlan& p = row.report.plan;
    os << text << ',' << format_double(p.delta) << ',' << p.b0 << ',' << p.btilde << ',' << p.k
       << ',' << p.istar << '\n';
}

inline nlohmann::json estimate_to_json(const SweepRow& row) {
    nlohmann::json j = row_to_json(row);
    if (row.ok) {
        const ProtocolPlan& p = row.report.plan;
        j["delta"] = p.delta;
        j["b0"] = p.b0;
        j["btilde"] = p.btilde;
        j["k"] = p.k;
        j["istar"] = p.istar;
    }
    return j;
}

// --- bound reports -----------------------------------------------------------------

inline constexpr const char* kBoundCsvHeader = "n,m,b,alpha,regime,solver_value,closed_form_value";

inline void write_bound_report_csv(std::ostream& os, const BoundReport& report) {
    os << kBoundCsvHeader << '\n';
    const ProblemConfig& c = report.config;
    os << c.n << ',' << c.m << ',' << c.b << ',' << c.alpha << ',' << regime_name(report.regime)
       << ',' << format_double(report.solver_value) << ','
       << format_double(report.closed_form_value) << '\n';
}

inline nlohmann::json bound_report_to_json(const BoundReport& report) {
    return nlohmann::json{{"n", report.config.n},
                          {"m", report.config.m},
                          {"b", report.config.b},
                          {"alpha", report.config.alpha},
                          {"regime", regime_name(report.regime)},
                          {"solver_value", report.solver_value},
                          {"closed_form_value", report.closed_form_value}};
}

// --- regime experiments ---------------------------------------------------------------

inline nlohmann::json regime_experiment_to_json(const RegimeExperiment& exp) {
    nlohmann::json j{{"regime", regime_name(exp.regime)},
                     {"alpha", exp.alpha},
                     {"axis", axis_name(exp.axis)},
                     {"slope", exp.fit.slope},
                     {"intercept", exp.fit.intercept},
                     {"r_squared", exp.fit.r_squared},
                     {"expected_exponent", exp.expected_exponent},
                     {"tolerance", exp.tolerance},
                     {"pass", exp.pass}};
    j["rows"] = rows_to_json(exp.rows);
    return j;
}

}  // namespace dnpr::io
